#pragma once

// Field reconstruction from the scaled traces, axis far fields, reference
// solutions and grid output.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hsm/fem_coupling.hpp"

namespace hsm {

// ---------------------------------------------------------------- reconstruction

namespace post_detail {

// Composite rule on [lo, hi] honouring the element breaks of the trace space.
inline MappedRule trace_rule(const TraceBasis& b, const QuadratureSpec& quad) {
  MappedRule out;
  for (const TraceElement& el : b.elements()) {
    const MappedRule r = composite_rule(el.lo, el.hi, quad.recon_step, quad.recon_order);
    out.x.insert(out.x.end(), r.x.begin(), r.x.end());
    out.w.insert(out.w.end(), r.w.begin(), r.w.end());
  }
  return out;
}

inline void check_region(const WaveParams& p, int j, Point2 pt) {
  if (!in_omega_theta(j, pt, p, p.theta))
    throw RegionError("reconstruct: point (" + std::to_string(pt.x1) + ", " + std::to_string(pt.x2) +
                      ") is outside the validity region of branch " + std::to_string(wrap_index(j)));
}

}  // namespace post_detail

/// Branch-j representation of u at pt from a trace given as a function of s,
/// integrated over [-T, T] with breaks at +-a.
inline Complex reconstruct_point(const std::function<Complex(double)>& phi, double T, int j, Point2 pt,
                                 const WaveParams& p, const QuadratureSpec& quad) {
  validate(p);
  validate(quad);
  post_detail::check_region(p, j, pt);
  Complex acc{0.0, 0.0};
  const double brk[4] = {-T, -p.a, p.a, T};
  for (int seg = 0; seg < 3; ++seg) {
    const MappedRule r = composite_rule(brk[seg], brk[seg + 1], quad.recon_step, quad.recon_order);
    for (std::size_t k = 0; k < r.x.size(); ++k) acc += r.w[k] * kernel_reconstruction(p, j, pt, r.x[k]) * phi(r.x[k]);
  }
  return acc;
}

/// Branch-j representation of u at pt from the discrete traces.
inline Complex reconstruct_point(const TraceVector& v, int j, Point2 pt, const WaveParams& p,
                                 const QuadratureSpec& quad) {
  validate(p);
  validate(quad);
  post_detail::check_region(p, j, pt);
  const TraceBasis& b = *v.basis;
  const auto& c = v.coeffs[wrap_index(j)];
  Complex acc{0.0, 0.0};
  double phi[4];
  for (const TraceElement& el : b.elements()) {
    const MappedRule r = composite_rule(el.lo, el.hi, quad.recon_step, quad.recon_order);
    for (std::size_t k = 0; k < r.x.size(); ++k) {
      lagrange_values(b.q(), (r.x[k] - el.lo) / (el.hi - el.lo), phi);
      Complex val{0.0, 0.0};
      for (int l = 0; l <= b.q(); ++l) val += phi[l] * c[el.first_dof + l];
      if (val == Complex(0.0, 0.0)) continue;
      acc += r.w[k] * kernel_reconstruction(p, j, pt, r.x[k]) * val;
    }
  }
  return acc;
}

enum class Provenance { Fem, J0, J1, J2, J3, Outside };

inline std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::Fem: return "fem";
    case Provenance::J0: return "j0";
    case Provenance::J1: return "j1";
    case Provenance::J2: return "j2";
    case Provenance::J3: return "j3";
    case Provenance::Outside: return "outside";
  }
  return "outside";
}

struct FieldGrid {
  std::vector<Point2> points;
  std::vector<Complex> values;
  std::vector<Provenance> provenance;
  std::vector<std::string> warnings;
};

struct ReconstructOptions {
  bool check_overlap = false;      // evaluate every valid branch and compare
  double overlap_warn = 5e-2;      // relative disagreement that triggers a warning
};

/// u on a point set: the FE field inside [-b, b]^2 when given, otherwise the
/// first branch j with the point in Omega^j_{pi/4}. Points inside (-a, a)^2
/// without FE data, or inside the obstacle, are labelled outside with value 0.
inline FieldGrid reconstruct_field(const TraceVector& v, const FemField* u_b, const std::vector<Point2>& points,
                                   const WaveParams& p, const QuadratureSpec& quad,
                                   const ReconstructOptions& opt = {}) {
  validate(p);
  const double quarter = 0.25 * std::numbers::pi;
  std::optional<TriangleLocator> loc;
  if (u_b) loc.emplace(u_b->space->mesh());
  FieldGrid g;
  g.points = points;
  g.values.assign(points.size(), Complex(0.0, 0.0));
  g.provenance.assign(points.size(), Provenance::Outside);
  std::vector<std::string> warn(points.size());
  parallel_for(static_cast<int>(points.size()), [&](int i) {
    const Point2 x = points[i];
    const double inf_norm = std::max(std::abs(x.x1), std::abs(x.x2));
    if (u_b && inf_norm <= p.b) {
      const auto [t, bc] = loc->locate(x);
      if (t >= 0) {
        g.values[i] = fem_value(*u_b, t, bc);
        g.provenance[i] = Provenance::Fem;
      }
      if (t >= 0 || inf_norm < p.a) return;  // inside the obstacle otherwise
    }
    if (!u_b && inf_norm <= p.a) return;
    int first = -1;
    for (int j = 0; j < 4; ++j)
      if (in_omega_theta(j, x, p, quarter)) {
        first = j;
        break;
      }
    if (first < 0)
      throw RegionError("reconstruct: no branch covers (" + std::to_string(x.x1) + ", " + std::to_string(x.x2) +
                        "); theta must be below pi/4 for full coverage");
    g.values[i] = reconstruct_point(v, first, x, p, quad);
    g.provenance[i] = static_cast<Provenance>(static_cast<int>(Provenance::J0) + first);
    if (opt.check_overlap)
      for (int j = first + 1; j < 4; ++j) {
        if (!in_omega_theta(j, x, p, p.theta)) continue;
        const Complex other = reconstruct_point(v, j, x, p, quad);
        const double rel = std::abs(other - g.values[i]) / std::max(std::abs(g.values[i]), 1e-300);
        if (rel > opt.overlap_warn)
          warn[i] = "branches " + std::to_string(first) + " and " + std::to_string(j) + " disagree by " +
                    std::to_string(rel) + " at (" + std::to_string(x.x1) + ", " + std::to_string(x.x2) + ")";
      }
  });
  for (auto& w : warn)
    if (!w.empty()) g.warnings.push_back(std::move(w));
  return g;
}

/// Uniform nx x ny grid over [x0, x1] x [y0, y1].
inline std::vector<Point2> grid_points(double x0, double x1, double y0, double y1, int nx, int ny) {
  if (nx < 1 || ny < 1) throw ConfigError("grid: need at least one point per axis");
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(nx) * ny);
  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      pts.push_back({nx == 1 ? x0 : x0 + (x1 - x0) * ix / (nx - 1), ny == 1 ? y0 : y0 + (y1 - y0) * iy / (ny - 1)});
  return pts;
}

// ---------------------------------------------------------------- far field

/// sqrt(k/pi) (1-i)/2 int_{-T}^{T} phi^j(s) tau'(s) ds, integrated exactly.
inline Complex halfplane_far_field_coefficient(const TraceVector& v, int j, const WaveParams& p) {
  const TraceBasis& b = *v.basis;
  const GaussRule rule = gauss_legendre(b.q() + 1);
  const auto& c = v.coeffs[wrap_index(j)];
  Complex acc{0.0, 0.0};
  double phi[4];
  for (const TraceElement& el : b.elements()) {
    const MappedRule r = map_rule(rule, el.lo, el.hi);
    // tau' is constant on each element since +-a are element breaks
    const Complex tp = tau_prime(p, 0.5 * (el.lo + el.hi));
    for (std::size_t k = 0; k < r.x.size(); ++k) {
      lagrange_values(b.q(), (r.x[k] - el.lo) / (el.hi - el.lo), phi);
      Complex val{0.0, 0.0};
      for (int l = 0; l <= b.q(); ++l) val += phi[l] * c[el.first_dof + l];
      acc += r.w[k] * tp * val;
    }
  }
  return std::sqrt(p.k / std::numbers::pi) * Complex(0.5, -0.5) * acc;
}

/// Far-field pattern of u (u ~ F e^{ikr}/sqrt(r)) in direction (cos j pi/2, sin j pi/2).
inline Complex far_field_axis(const TraceVector& v, int j, const WaveParams& p) {
  return halfplane_far_field_coefficient(v, j, p) * std::exp(Complex(0.0, -p.k * p.a));
}

struct FarFieldReport {
  std::array<Complex, 4> F{};
  double T = 0.0;
  QuadratureSpec quad;
  WaveParams params;
};

inline FarFieldReport far_field_report(const TraceVector& v, const WaveParams& p, const QuadratureSpec& quad) {
  FarFieldReport r;
  for (int j = 0; j < 4; ++j) r.F[j] = far_field_axis(v, j, p);
  r.T = v.basis->T();
  r.quad = quad;
  r.params = p;
  return r;
}

// ---------------------------------------------------------------- references

/// amplitude * H_0(k|x|); the validation field uses amplitude i/4.
inline Complex exact_hankel_solution(const WaveParams& p, Point2 x, Complex amplitude = Complex(0.0, 0.25)) {
  const double r = std::hypot(x.x1, x.x2);
  if (!(r > 0.0)) throw std::domain_error("exact Hankel solution is singular at the origin");
  return amplitude * hankel1(0, Complex(p.k * r, 0.0));
}

/// Its scaled trace on any side: amplitude * H_0(k sqrt(a^2 + tau(s)^2)).
inline Complex exact_hankel_trace(const WaveParams& p, double s, Complex amplitude = Complex(0.0, 0.25)) {
  const Complex t = tau(p, s);
  return amplitude * hankel1(0, p.k * principal_sqrt(p.a * p.a + t * t));
}

/// Far field of amplitude * H_0(k|x|), identical in all directions.
inline Complex exact_hankel_far_field(const WaveParams& p, Complex amplitude = Complex(0.0, 0.25)) {
  return amplitude * Complex(1.0, -1.0) / std::sqrt(p.k * std::numbers::pi);
}

/// Scattering of e^{ik d.x}, d = (cos alpha, sin alpha), by a sound-soft disk.
struct MieDisk {
  double k = 2.0 * std::numbers::pi;
  double radius = 0.5;
  Point2 center{0.0, 0.0};
  double incidence = 0.0;
  double tail_tol = 1e-10;
  int max_order = 400;
};

namespace post_detail {

inline void check(const MieDisk& m) {
  if (!(m.k > 0.0) || !(m.radius > 0.0)) throw ConfigError("mie: need k > 0 and radius > 0");
}

// c_n = J_n(kR) / H_n(kR)
inline Complex mie_coefficient(const MieDisk& m, int n) {
  const double x = m.k * m.radius;
  const double jn = std::cyl_bessel_j(static_cast<double>(n), x);
  const double yn = std::cyl_neumann(static_cast<double>(n), x);
  return jn / Complex(jn, yn);
}

// sum_{n>=0} eps_n term(n), eps_0 = 1, eps_n = 2, until two successive terms are below tol
template <class Term>
Complex mie_sum(const MieDisk& m, Term term) {
  Complex sum = term(0);
  int small = 0;
  const int n_min = static_cast<int>(std::ceil(m.k * m.radius)) + 2;
  for (int n = 1; n <= m.max_order; ++n) {
    const Complex t = 2.0 * term(n);
    if (!std::isfinite(std::abs(t))) break;
    sum += t;
    small = std::abs(t) < m.tail_tol * std::max(1.0, std::abs(sum)) ? small + 1 : 0;
    if (small >= 2 && n >= n_min) return sum;
  }
  throw ConvergenceError("mie series: tail criterion not met within order " + std::to_string(m.max_order));
}

}  // namespace post_detail

inline Complex mie_incident(const MieDisk& m, Point2 x) {
  return std::exp(Complex(0.0, m.k * (x.x1 * std::cos(m.incidence) + x.x2 * std::sin(m.incidence))));
}

/// Scattered field at x (outside the disk).
inline Complex mie_scattered(const MieDisk& m, Point2 x) {
  post_detail::check(m);
  const double dx = x.x1 - m.center.x1, dy = x.x2 - m.center.x2;
  const double r = std::hypot(dx, dy);
  if (r < m.radius * (1.0 - 1e-12)) throw std::domain_error("mie: evaluation point lies inside the disk");
  const double ang = std::atan2(dy, dx) - m.incidence;
  const double kr = m.k * r;
  const Complex s = post_detail::mie_sum(m, [&](int n) {
    const Complex hn(std::cyl_bessel_j(static_cast<double>(n), kr), std::cyl_neumann(static_cast<double>(n), kr));
    Complex in{1.0, 0.0};
    for (int l = 0; l < n % 4; ++l) in *= kI;
    return in * post_detail::mie_coefficient(m, n) * hn * std::cos(n * ang);
  });
  return -mie_incident(m, m.center) * s;
}

/// Far-field pattern of the scattered field in direction angle phi.
inline Complex mie_far_field(const MieDisk& m, double phi) {
  post_detail::check(m);
  const double ang = phi - m.incidence;
  const Complex s =
      post_detail::mie_sum(m, [&](int n) { return post_detail::mie_coefficient(m, n) * std::cos(n * ang); });
  const double shift = m.k * (m.center.x1 * (std::cos(m.incidence) - std::cos(phi)) +
                              m.center.x2 * (std::sin(m.incidence) - std::sin(phi)));
  return -std::exp(Complex(0.0, shift)) * Complex(1.0, -1.0) / std::sqrt(std::numbers::pi * m.k) * s;
}

/// Absolute L^2(R) distance between trace j and f: the discrete trace vanishes
/// beyond T, so the tail of f on |s| > T is added.
inline double trace_error_full_line(const TraceVector& v, int j, const std::function<Complex(double)>& f,
                                    const WaveParams& p) {
  const auto [err, ref] = trace_l2_error(v, j, f);
  const double T = v.basis->T();
  // e^{-k sin(theta) L} below 1e-16 at the end of the tail
  const double len = 37.0 / (p.k * std::sin(p.theta));
  const MappedRule r = composite_rule(T, T + len, 0.05, 8);
  double tail = 0.0;
  for (std::size_t k = 0; k < r.x.size(); ++k) tail += r.w[k] * (std::norm(f(r.x[k])) + std::norm(f(-r.x[k])));
  return std::sqrt(err * err + tail);
}

// ---------------------------------------------------------------- norms and output

struct ErrorNorms {
  double l2_rel = 0.0;
  double linf_rel = 0.0;
  int compared = 0;
};

/// Relative discrete norms of a - b with respect to b over points defined in both.
inline ErrorNorms error_norms(const FieldGrid& a, const FieldGrid& b) {
  if (a.points.size() != b.points.size()) throw std::invalid_argument("error_norms: point sets differ in size");
  double e2 = 0.0, r2 = 0.0, einf = 0.0, rinf = 0.0;
  ErrorNorms out;
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    if (std::abs(a.points[i].x1 - b.points[i].x1) > 1e-12 || std::abs(a.points[i].x2 - b.points[i].x2) > 1e-12)
      throw std::invalid_argument("error_norms: point " + std::to_string(i) + " differs between grids");
    if (a.provenance[i] == Provenance::Outside || b.provenance[i] == Provenance::Outside) continue;
    const double d = std::abs(a.values[i] - b.values[i]);
    const double r = std::abs(b.values[i]);
    e2 += d * d;
    r2 += r * r;
    einf = std::max(einf, d);
    rinf = std::max(rinf, r);
    ++out.compared;
  }
  out.l2_rel = r2 > 0.0 ? std::sqrt(e2 / r2) : std::sqrt(e2);
  out.linf_rel = rinf > 0.0 ? einf / rinf : einf;
  return out;
}

/// Grid with the same points and provenance, values from f.
inline FieldGrid sample_like(const FieldGrid& g, const std::function<Complex(Point2)>& f) {
  FieldGrid out = g;
  out.warnings.clear();
  for (std::size_t i = 0; i < g.points.size(); ++i)
    out.values[i] = g.provenance[i] == Provenance::Outside ? Complex(0.0, 0.0) : f(g.points[i]);
  return out;
}

inline void write_field_csv(std::ostream& os, const FieldGrid& g) {
  os << "x,y,Re,Im,provenance\n";
  os.precision(17);
  for (std::size_t i = 0; i < g.points.size(); ++i)
    os << g.points[i].x1 << ',' << g.points[i].x2 << ',' << g.values[i].real() << ',' << g.values[i].imag() << ','
       << to_string(g.provenance[i]) << '\n';
}

/// Legacy VTK unstructured grid of isolated points with Re/Im arrays.
inline void write_field_vtk(std::ostream& os, const FieldGrid& g) {
  const std::size_t n = g.points.size();
  os.precision(17);
  os << "# vtk DataFile Version 3.0\nfield samples\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS " << n << " double\n";
  for (const Point2& p : g.points) os << p.x1 << ' ' << p.x2 << " 0\n";
  os << "CELLS " << n << ' ' << 2 * n << '\n';
  for (std::size_t i = 0; i < n; ++i) os << "1 " << i << '\n';
  os << "CELL_TYPES " << n << '\n';
  for (std::size_t i = 0; i < n; ++i) os << "1\n";
  os << "POINT_DATA " << n << "\nSCALARS Re double 1\nLOOKUP_TABLE default\n";
  for (const Complex& z : g.values) os << z.real() << '\n';
  os << "SCALARS Im double 1\nLOOKUP_TABLE default\n";
  for (const Complex& z : g.values) os << z.imag() << '\n';
}

/// Legacy VTK of a FE field (linear or quadratic triangles).
inline void write_fem_vtk(std::ostream& os, const FemField& u) {
  const FemSpace& sp = *u.space;
  const std::size_t n = sp.nodes().size();
  const std::size_t nt = sp.mesh().triangles.size();
  const int nl = sp.local_count();
  os.precision(17);
  os << "# vtk DataFile Version 3.0\nFE field\nASCII\nDATASET UNSTRUCTURED_GRID\nPOINTS " << n << " double\n";
  for (const Point2& p : sp.nodes()) os << p.x1 << ' ' << p.x2 << " 0\n";
  os << "CELLS " << nt << ' ' << nt * (nl + 1) << '\n';
  for (std::size_t t = 0; t < nt; ++t) {
    os << nl;
    for (int i = 0; i < nl; ++i) os << ' ' << sp.triangle_dofs(static_cast<int>(t))[i];
    os << '\n';
  }
  // VTK_TRIANGLE = 5, VTK_QUADRATIC_TRIANGLE = 22 (same local order)
  os << "CELL_TYPES " << nt << '\n';
  for (std::size_t t = 0; t < nt; ++t) os << (nl == 3 ? 5 : 22) << '\n';
  os << "POINT_DATA " << n << "\nSCALARS Re double 1\nLOOKUP_TABLE default\n";
  for (const Complex& z : u.values) os << z.real() << '\n';
  os << "SCALARS Im double 1\nLOOKUP_TABLE default\n";
  for (const Complex& z : u.values) os << z.imag() << '\n';
}

}  // namespace hsm
