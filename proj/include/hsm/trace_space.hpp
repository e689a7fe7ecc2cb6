#pragma once

// Truncated 1D Lagrange spaces on [-T, T] for the four scaled traces.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsm/quadrature.hpp"
#include "hsm/scaling_geometry.hpp"

namespace hsm {

struct TraceGridSpec {
  double T = 5.0;
  double h = 0.1;
  int q = 1;
};

/// Lagrange polynomials of degree q on [0, 1] with equispaced nodes l/q.
inline void lagrange_values(int q, double xi, double* out) {
  for (int l = 0; l <= q; ++l) {
    double v = 1.0;
    const double xl = static_cast<double>(l) / q;
    for (int m = 0; m <= q; ++m) {
      if (m == l) continue;
      const double xm = static_cast<double>(m) / q;
      v *= (xi - xm) / (xl - xm);
    }
    out[l] = v;
  }
}

inline void lagrange_derivatives(int q, double xi, double* out) {
  for (int l = 0; l <= q; ++l) {
    const double xl = static_cast<double>(l) / q;
    double sum = 0.0;
    for (int d = 0; d <= q; ++d) {
      if (d == l) continue;
      double prod = 1.0 / (xl - static_cast<double>(d) / q);
      for (int m = 0; m <= q; ++m) {
        if (m == l || m == d) continue;
        const double xm = static_cast<double>(m) / q;
        prod *= (xi - xm) / (xl - xm);
      }
      sum += prod;
    }
    out[l] = sum;
  }
}

struct TraceElement {
  double lo = 0.0;
  double hi = 0.0;
  int first_dof = 0;  // dofs first_dof .. first_dof + q
};

/// Continuous P_q space on [-T, T] with +-a and +-T as element boundaries.
class TraceBasis {
 public:
  TraceBasis() = default;

  int q() const { return q_; }
  double a() const { return a_; }
  double T() const { return T_; }
  double h_inner() const { return h_in_; }
  double h_outer() const { return h_out_; }
  int dof_count() const { return static_cast<int>(nodes_.size()); }
  int element_count() const { return static_cast<int>(elements_.size()); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<TraceElement>& elements() const { return elements_; }
  /// true for dofs whose node lies in [-a, a]; these vanish in V_{0,h}.
  const std::vector<bool>& constrained_mask() const { return constrained_; }
  /// Dofs with |node| > a, ascending.
  const std::vector<int>& free_dofs() const { return free_; }
  /// Dofs with |node| <= a, ascending.
  const std::vector<int>& constrained_dofs() const { return fixed_; }
  /// Dof carrying node -x for the dof carrying node x (the reflection s -> -s).
  int reflect(int dof) const { return dof_count() - 1 - dof; }

  /// Element containing s (the left one at interior element boundaries), or -1 outside [-T, T].
  int locate(double s) const {
    if (s < -T_ || s > T_) return -1;
    auto it = std::upper_bound(breaks_.begin(), breaks_.end(), s);
    int e = static_cast<int>(it - breaks_.begin()) - 1;
    return std::clamp(e, 0, element_count() - 1);
  }

  friend TraceBasis build_space(const TraceGridSpec& spec, double a);

 private:
  int q_ = 1;
  double a_ = 1.0;
  double T_ = 2.0;
  double h_in_ = 0.0;
  double h_out_ = 0.0;
  std::vector<double> nodes_;
  std::vector<double> breaks_;
  std::vector<TraceElement> elements_;
  std::vector<bool> constrained_;
  std::vector<int> free_;
  std::vector<int> fixed_;
};

/// Uniform layout per segment [-T,-a], [-a,a], [a,T]; each spacing is shrunk
/// to the largest value <= h that makes the segment a whole number of elements.
inline TraceBasis build_space(const TraceGridSpec& spec, double a) {
  if (!(a > 0.0)) throw ConfigError("trace space: a must be positive");
  if (!(spec.T > a)) throw ConfigError("trace space: truncation T must exceed a");
  if (!(spec.h > 0.0) || spec.h > spec.T) throw ConfigError("trace space: need 0 < h <= T");
  if (spec.q < 1 || spec.q > 3) throw ConfigError("trace space: degree q must be 1, 2 or 3");
  TraceBasis b;
  b.q_ = spec.q;
  b.a_ = a;
  b.T_ = spec.T;
  const int n_out = std::max(1, static_cast<int>(std::ceil((spec.T - a) / spec.h - 1e-9)));
  const int n_in = std::max(1, static_cast<int>(std::ceil(2.0 * a / spec.h - 1e-9)));
  b.h_out_ = (spec.T - a) / n_out;
  b.h_in_ = 2.0 * a / n_in;
  std::vector<double> brk;
  for (int i = 0; i < n_out; ++i) brk.push_back(-spec.T + i * b.h_out_);
  for (int i = 0; i < n_in; ++i) brk.push_back(-a + i * b.h_in_);
  for (int i = 0; i < n_out; ++i) brk.push_back(a + i * b.h_out_);
  brk.push_back(spec.T);
  brk[n_out] = -a;
  brk[n_out + n_in] = a;
  // exact mirror symmetry
  const std::size_t nb = brk.size();
  for (std::size_t i = 0; i < nb / 2; ++i) brk[nb - 1 - i] = -brk[i];
  if (nb % 2 == 1) brk[nb / 2] = 0.0;
  b.breaks_ = brk;
  const int ne = static_cast<int>(brk.size()) - 1;
  const int q = spec.q;
  b.nodes_.assign(static_cast<std::size_t>(ne) * q + 1, 0.0);
  for (int e = 0; e < ne; ++e) {
    b.elements_.push_back({brk[e], brk[e + 1], e * q});
    for (int l = 0; l < q; ++l) b.nodes_[e * q + l] = brk[e] + (brk[e + 1] - brk[e]) * l / q;
  }
  b.nodes_.back() = brk.back();
  // exact mirror symmetry of node positions
  const int n = b.dof_count();
  for (int d = 0; d < n / 2; ++d) b.nodes_[d] = -b.nodes_[n - 1 - d];
  if (n % 2 == 1) b.nodes_[n / 2] = 0.0;
  b.constrained_.assign(n, false);
  for (int d = 0; d < n; ++d) {
    const bool inside = std::abs(b.nodes_[d]) <= a * (1.0 + 1e-12);
    b.constrained_[d] = inside;
    (inside ? b.fixed_ : b.free_).push_back(d);
  }
  return b;
}

/// The four traces phi^0..phi^3 as coefficient arrays over one basis.
struct TraceVector {
  std::shared_ptr<const TraceBasis> basis;
  std::array<std::vector<Complex>, 4> coeffs;

  TraceVector() = default;
  explicit TraceVector(std::shared_ptr<const TraceBasis> b) : basis(std::move(b)) {
    for (auto& c : coeffs) c.assign(basis->dof_count(), Complex(0.0, 0.0));
  }
  explicit TraceVector(const TraceBasis& b) : TraceVector(std::make_shared<const TraceBasis>(b)) {}
};

/// Boundary data on the four sides of Sigma_a, in side coordinates s in [-a, a].
struct BoundaryData {
  std::array<std::function<Complex(double)>, 4> sides;
};

/// Side data from a field defined on the plane: side j at s is f(x) with x^j = (a, s).
inline BoundaryData boundary_data_from_field(double a, std::function<Complex(Point2)> f) {
  BoundaryData g;
  for (int j = 0; j < 4; ++j)
    g.sides[j] = [a, f, j](double s) { return f(global_coords(j, {a, s})); };
  return g;
}

inline Complex evaluate_trace(const TraceVector& v, int j, double s) {
  const TraceBasis& b = *v.basis;
  const int e = b.locate(s);
  if (e < 0) return {0.0, 0.0};
  const TraceElement& el = b.elements()[e];
  const auto& c = v.coeffs[wrap_index(j)];
  const double xi = (s - el.lo) / (el.hi - el.lo);
  // nodal values come back exactly
  for (int l = 0; l <= b.q(); ++l)
    if (std::abs(xi * b.q() - l) < 1e-12) return c[el.first_dof + l];
  double phi[4];
  lagrange_values(b.q(), xi, phi);
  Complex acc{0.0, 0.0};
  for (int l = 0; l <= b.q(); ++l) acc += phi[l] * c[el.first_dof + l];
  return acc;
}

/// Nodal interpolant at nodes in [-a, a], zero elsewhere. With `project` set,
/// uses the L^2(-a, a) projection onto the same dofs instead.
inline TraceVector interpolate_boundary_data(const TraceBasis& b, const BoundaryData& g,
                                             bool project = false) {
  for (int j = 0; j < 4; ++j)
    if (!g.sides[j]) throw std::invalid_argument("boundary data: missing side " + std::to_string(j));
  // corner consistency: phi^j(a) and phi^{j+1}(-a) are the same point of Sigma_a
  const double a = b.a();
  for (int j = 0; j < 4; ++j) {
    const Complex left = g.sides[j](a);
    const Complex right = g.sides[(j + 1) % 4](-a);
    if (std::abs(left - right) > 1e-9 * (1.0 + std::abs(left)))
      throw ConfigError("boundary data disagree at the corner shared by sides " + std::to_string(j) +
                        " and " + std::to_string((j + 1) % 4));
  }
  TraceVector v(b);
  const auto& fixed = b.constrained_dofs();
  if (!project) {
    for (int j = 0; j < 4; ++j)
      for (int d : fixed) v.coeffs[j][d] = g.sides[j](b.nodes()[d]);
    return v;
  }
  // projection on (-a, a): dense solve over the constrained dofs (small)
  const int nf = static_cast<int>(fixed.size());
  const int base = fixed.front();
  const GaussRule rule = gauss_legendre(b.q() + 4);
  for (int j = 0; j < 4; ++j) {
    std::vector<double> m(static_cast<std::size_t>(nf) * nf, 0.0);
    std::vector<Complex> rhs(nf, Complex(0.0, 0.0));
    for (const TraceElement& el : b.elements()) {
      if (el.hi <= -a + 1e-14 || el.lo >= a - 1e-14) continue;
      const MappedRule r = map_rule(rule, el.lo, el.hi);
      double phi[4];
      for (std::size_t k = 0; k < r.x.size(); ++k) {
        lagrange_values(b.q(), (r.x[k] - el.lo) / (el.hi - el.lo), phi);
        const Complex f = g.sides[j](r.x[k]);
        for (int l = 0; l <= b.q(); ++l) {
          const int dl = el.first_dof + l - base;
          rhs[dl] += r.w[k] * phi[l] * f;
          for (int mm = 0; mm <= b.q(); ++mm)
            m[static_cast<std::size_t>(dl) * nf + (el.first_dof + mm - base)] += r.w[k] * phi[l] * phi[mm];
        }
      }
    }
    // Gaussian elimination (SPD, no pivoting needed)
    for (int c = 0; c < nf; ++c) {
      const double piv = m[static_cast<std::size_t>(c) * nf + c];
      for (int r2 = c + 1; r2 < nf; ++r2) {
        const double f = m[static_cast<std::size_t>(r2) * nf + c] / piv;
        if (f == 0.0) continue;
        for (int cc = c; cc < nf; ++cc)
          m[static_cast<std::size_t>(r2) * nf + cc] -= f * m[static_cast<std::size_t>(c) * nf + cc];
        rhs[r2] -= f * rhs[c];
      }
    }
    for (int r2 = nf - 1; r2 >= 0; --r2) {
      Complex s = rhs[r2];
      for (int cc = r2 + 1; cc < nf; ++cc) s -= m[static_cast<std::size_t>(r2) * nf + cc] * rhs[cc];
      rhs[r2] = s / m[static_cast<std::size_t>(r2) * nf + r2];
    }
    for (int k = 0; k < nf; ++k) v.coeffs[j][fixed[k]] = rhs[k];
  }
  return v;
}

/// Dense mass matrix (row-major, dof_count^2), exact by (q+1)-point Gauss.
inline std::vector<double> mass_matrix(const TraceBasis& b) {
  const int n = b.dof_count();
  const int q = b.q();
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  const GaussRule rule = gauss_legendre(q + 1);
  double phi[4];
  for (const TraceElement& el : b.elements()) {
    const MappedRule r = map_rule(rule, el.lo, el.hi);
    for (std::size_t k = 0; k < r.x.size(); ++k) {
      lagrange_values(q, (r.x[k] - el.lo) / (el.hi - el.lo), phi);
      for (int l = 0; l <= q; ++l)
        for (int mm = l; mm <= q; ++mm) {
          const double v = r.w[k] * phi[l] * phi[mm];
          m[static_cast<std::size_t>(el.first_dof + l) * n + el.first_dof + mm] += v;
          if (mm != l) m[static_cast<std::size_t>(el.first_dof + mm) * n + el.first_dof + l] += v;
        }
    }
  }
  return m;
}

/// Restriction of a dense row-major matrix to the given row/column dof lists.
inline std::vector<double> restrict_matrix(const std::vector<double>& m, int n, const std::vector<int>& rows,
                                           const std::vector<int>& cols) {
  std::vector<double> out(rows.size() * cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      out[i * cols.size() + j] = m[static_cast<std::size_t>(rows[i]) * n + cols[j]];
  return out;
}

/// Squared L^2 norm of trace j over [lo, hi] intersected with [-T, T].
inline double trace_norm_sq(const TraceVector& v, int j, double lo = -INFINITY, double hi = INFINITY) {
  const TraceBasis& b = *v.basis;
  const GaussRule rule = gauss_legendre(b.q() + 2);
  double acc = 0.0;
  double phi[4];
  for (const TraceElement& el : b.elements()) {
    const double l = std::max(lo, el.lo);
    const double r = std::min(hi, el.hi);
    if (!(r > l)) continue;
    const MappedRule mr = map_rule(rule, l, r);
    for (std::size_t k = 0; k < mr.x.size(); ++k) {
      lagrange_values(b.q(), (mr.x[k] - el.lo) / (el.hi - el.lo), phi);
      Complex val{0.0, 0.0};
      for (int d = 0; d <= b.q(); ++d) val += phi[d] * v.coeffs[wrap_index(j)][el.first_dof + d];
      acc += mr.w[k] * std::norm(val);
    }
  }
  return acc;
}

/// L^2(-T, T) distance between trace j and a reference function, plus the
/// reference norm on the same interval: returns {||v - f||, ||f||}.
inline std::pair<double, double> trace_l2_error(const TraceVector& v, int j,
                                                const std::function<Complex(double)>& f,
                                                int extra_order = 4) {
  const TraceBasis& b = *v.basis;
  const GaussRule rule = gauss_legendre(b.q() + extra_order);
  double err = 0.0, ref = 0.0;
  double phi[4];
  for (const TraceElement& el : b.elements()) {
    const MappedRule mr = map_rule(rule, el.lo, el.hi);
    for (std::size_t k = 0; k < mr.x.size(); ++k) {
      lagrange_values(b.q(), (mr.x[k] - el.lo) / (el.hi - el.lo), phi);
      Complex val{0.0, 0.0};
      for (int d = 0; d <= b.q(); ++d) val += phi[d] * v.coeffs[wrap_index(j)][el.first_dof + d];
      const Complex fx = f(mr.x[k]);
      err += mr.w[k] * std::norm(val - fx);
      ref += mr.w[k] * std::norm(fx);
    }
  }
  return {std::sqrt(err), std::sqrt(ref)};
}

/// CSV with columns j, s_node, Re, Im.
inline void write_traces_csv(std::ostream& os, const TraceVector& v) {
  os << "j,s_node,Re,Im\n";
  os.precision(17);
  for (int j = 0; j < 4; ++j)
    for (int d = 0; d < v.basis->dof_count(); ++d)
      os << j << ',' << v.basis->nodes()[d] << ',' << v.coeffs[j][d].real() << ',' << v.coeffs[j][d].imag()
         << '\n';
}

}  // namespace hsm
