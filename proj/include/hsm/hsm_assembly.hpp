#pragma once

// Galerkin assembly of the complex-scaled half-space matching system on the
// square [-a, a]^2 and the Dirichlet solver built on it.

#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hsm/kernels.hpp"
#include "hsm/linalg.hpp"
#include "hsm/parallel.hpp"
#include "hsm/quadrature.hpp"
#include "hsm/trace_space.hpp"

namespace hsm {

struct QuadratureSpec {
  int panel_order = 5;     // Gauss points per element and direction
  double recon_step = 0.1;  // composite step of the reconstruction integrals
  int recon_order = 5;
  // Element pairs meeting at the kernel singularity t = s = a are integrated
  // after a Duffy split instead of the plain tensor rule.
  bool corner_duffy = true;
  int corner_order = 10;
};

inline void validate(const QuadratureSpec& q) {
  if (q.panel_order < 2) throw ConfigError("quadrature: panel_order must be >= 2");
  if (q.recon_order < 1) throw ConfigError("quadrature: recon_order must be >= 1");
  if (!(q.recon_step > 0.0)) throw ConfigError("quadrature: recon_step must be positive");
  if (q.corner_order < 2) throw ConfigError("quadrature: corner_order must be >= 2");
}

namespace assembly_detail {

inline bool same(double x, double y) { return std::abs(x - y) <= 1e-12 * (1.0 + std::abs(y)); }

}  // namespace assembly_detail

/// Galerkin matrix G(n, m) = int int K(t, s) phi_m(s) psi_n(t) ds dt over
/// test elements accepted by `test` and source elements accepted by `source`.
/// Pairs of elements meeting at (corner, corner) go through a Duffy split when
/// quad.corner_duffy is set. Rows and columns are full dof indices.
template <class Kernel>
DenseMatrix assemble_galerkin(const TraceBasis& b, const QuadratureSpec& quad,
                              const std::function<bool(const TraceElement&)>& test,
                              const std::function<bool(const TraceElement&)>& source, Kernel&& kernel,
                              double corner) {
  validate(quad);
  const int q = b.q();
  const int nd = b.dof_count();
  const GaussRule rule = gauss_legendre(quad.panel_order);
  const GaussRule crule = gauss_legendre(quad.corner_order);
  const int ng = rule.size();

  std::vector<int> test_el, src_el;
  for (int e = 0; e < b.element_count(); ++e) {
    if (test(b.elements()[e])) test_el.push_back(e);
    if (source(b.elements()[e])) src_el.push_back(e);
  }
  // source points, weights times basis values
  std::vector<double> s_pts(src_el.size() * ng);
  std::vector<double> s_wphi(src_el.size() * ng * (q + 1));
  double phi[4];
  for (std::size_t k = 0; k < src_el.size(); ++k) {
    const TraceElement& el = b.elements()[src_el[k]];
    const MappedRule r = map_rule(rule, el.lo, el.hi);
    for (int g = 0; g < ng; ++g) {
      s_pts[k * ng + g] = r.x[g];
      lagrange_values(q, (r.x[g] - el.lo) / (el.hi - el.lo), phi);
      for (int l = 0; l <= q; ++l) s_wphi[(k * ng + g) * (q + 1) + l] = r.w[g] * phi[l];
    }
  }

  // per test element: (q+1) x nd local rows, summed serially afterwards
  std::vector<std::vector<Complex>> local(test_el.size());
  parallel_for(static_cast<int>(test_el.size()), [&](int it) {
    const TraceElement& te = b.elements()[test_el[it]];
    std::vector<Complex> rows(static_cast<std::size_t>(q + 1) * nd, Complex(0.0, 0.0));
    const MappedRule rt = map_rule(rule, te.lo, te.hi);
    std::vector<double> t_wphi(ng * (q + 1));
    double ph[4];
    for (int g = 0; g < ng; ++g) {
      lagrange_values(q, (rt.x[g] - te.lo) / (te.hi - te.lo), ph);
      for (int l = 0; l <= q; ++l) t_wphi[g * (q + 1) + l] = rt.w[g] * ph[l];
    }
    std::vector<Complex> kv(ng * ng);
    std::vector<Complex> tmp(static_cast<std::size_t>(ng) * (q + 1));
    for (std::size_t ks = 0; ks < src_el.size(); ++ks) {
      const TraceElement& se = b.elements()[src_el[ks]];
      const bool touches = quad.corner_duffy && assembly_detail::same(te.lo, corner) &&
                           (assembly_detail::same(se.lo, corner) || assembly_detail::same(se.hi, corner));
      if (touches) {
        // t = c + ht x, s = c + sigma hs y on the unit square, singular at (0, 0)
        const double ht = te.hi - te.lo;
        const double hs = se.hi - se.lo;
        const double sigma = assembly_detail::same(se.lo, corner) ? 1.0 : -1.0;
        double pt[4], ps[4];
        for (int tri = 0; tri < 2; ++tri) {
          for (int i = 0; i < crule.size(); ++i) {
            const double xi = 0.5 * (crule.nodes[i] + 1.0);
            const double wxi = 0.5 * crule.weights[i];
            for (int j = 0; j < crule.size(); ++j) {
              const double eta = 0.5 * (crule.nodes[j] + 1.0);
              const double w = wxi * 0.5 * crule.weights[j] * xi * ht * hs;
              const double x = tri == 0 ? xi : xi * eta;
              const double y = tri == 0 ? xi * eta : xi;
              const double t = corner + ht * x;
              const double s = corner + sigma * hs * y;
              const Complex kval = kernel(t, s) * w;
              lagrange_values(q, (t - te.lo) / ht, pt);
              lagrange_values(q, (s - se.lo) / hs, ps);
              for (int l = 0; l <= q; ++l) {
                Complex* row = rows.data() + static_cast<std::size_t>(l) * nd + se.first_dof;
                const Complex kl = kval * pt[l];
                for (int m = 0; m <= q; ++m) row[m] += kl * ps[m];
              }
            }
          }
        }
        continue;
      }
      for (int i = 0; i < ng; ++i)
        for (int j = 0; j < ng; ++j) kv[i * ng + j] = kernel(rt.x[i], s_pts[ks * ng + j]);
      // tmp(i, m) = sum_j K(i, j) w_j phi_m(s_j)
      for (int i = 0; i < ng; ++i)
        for (int m = 0; m <= q; ++m) {
          Complex acc{0.0, 0.0};
          for (int j = 0; j < ng; ++j) acc += kv[i * ng + j] * s_wphi[(ks * ng + j) * (q + 1) + m];
          tmp[i * (q + 1) + m] = acc;
        }
      for (int l = 0; l <= q; ++l) {
        Complex* row = rows.data() + static_cast<std::size_t>(l) * nd + se.first_dof;
        for (int m = 0; m <= q; ++m) {
          Complex acc{0.0, 0.0};
          for (int i = 0; i < ng; ++i) acc += t_wphi[i * (q + 1) + l] * tmp[i * (q + 1) + m];
          row[m] += acc;
        }
      }
    }
    local[it] = std::move(rows);
  });

  DenseMatrix g(nd, nd);
  for (std::size_t it = 0; it < test_el.size(); ++it) {
    const TraceElement& te = b.elements()[test_el[it]];
    for (int l = 0; l <= q; ++l) {
      Complex* dst = g.row(te.first_dof + l);
      const Complex* src = local[it].data() + static_cast<std::size_t>(l) * nd;
      for (int m = 0; m < nd; ++m) dst[m] += src[m];
    }
  }
  return g;
}

/// Galerkin matrix of the scaled double-layer operator D_theta on the full
/// trace space: rows for test functions on (a, T], zero rows elsewhere.
inline DenseMatrix assemble_Dtheta_galerkin(const TraceBasis& b, const WaveParams& p,
                                            const QuadratureSpec& quad) {
  validate(p);
  const double a = b.a();
  if (!assembly_detail::same(p.a, a)) throw ConfigError("trace basis and parameters disagree on a");
  return assemble_galerkin(
      b, quad, [a](const TraceElement& e) { return e.lo >= a - 1e-12; },
      [](const TraceElement&) { return true; },
      [&p](double t, double s) { return kernel_Dtheta(p, t, s); }, a);
}

/// Galerkin matrix of the double-layer operator with dissipative wavenumber
/// k e^{i theta}, restricted to test and source supports in (a, T].
inline DenseMatrix assemble_dissipative_galerkin(const TraceBasis& b, const WaveParams& p,
                                                 const QuadratureSpec& quad) {
  validate(p);
  const double a = b.a();
  const Complex kc = p.k * std::polar(1.0, p.theta);
  auto outer = [a](const TraceElement& e) { return e.lo >= a - 1e-12; };
  return assemble_galerkin(
      b, quad, outer, outer,
      [kc, a](double t, double s) { return kernel_h_wavenumber(kc, t - a, s - a); }, a);
}

/// Galerkin matrix of the static (k = 0) double-layer kernel
/// (t - a) / (pi ((t - a)^2 + (s - a)^2)) on test and source supports in (a, T].
inline DenseMatrix assemble_static_galerkin(const TraceBasis& b, const QuadratureSpec& quad) {
  const double a = b.a();
  auto outer = [a](const TraceElement& e) { return e.lo >= a - 1e-12; };
  return assemble_galerkin(
      b, quad, outer, outer,
      [a](double t, double s) {
        const double x = t - a;
        const double y = s - a;
        return Complex(x / (std::numbers::pi * (x * x + y * y)), 0.0);
      },
      a);
}

/// The two distinct blocks of the 4x4 operator pattern, in Galerkin form:
/// DS = D_theta S and SD = S D_theta, S the reflection s -> -s.
struct BlockOperator {
  DenseMatrix DS;
  DenseMatrix SD;
};

/// DS(n, m) = G(n, S m), SD(n, m) = G(S n, m) for the node reflection S.
inline BlockOperator make_block_operator(const TraceBasis& b, const DenseMatrix& g) {
  const int n = b.dof_count();
  BlockOperator op{DenseMatrix(n, n), DenseMatrix(n, n)};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      op.DS(r, c) = g(r, b.reflect(c));
      op.SD(r, c) = g(b.reflect(r), c);
    }
  return op;
}

/// Block (row j, column l) of the operator pattern: D_theta S at l = j+1,
/// S D_theta at l = j-1, zero on the diagonal and at l = j+2.
inline const DenseMatrix* block_at(const BlockOperator& op, int j, int l) {
  const int d = wrap_index(l - j);
  if (d == 1) return &op.DS;
  if (d == 3) return &op.SD;
  return nullptr;
}

/// Galerkin pairings (sum_l B_{jl} v^l, psi_n) for all dofs n and sides j.
inline std::array<ComplexVector, 4> apply_block_operator(const BlockOperator& op,
                                                         const std::array<ComplexVector, 4>& v) {
  std::array<ComplexVector, 4> out;
  for (int j = 0; j < 4; ++j) {
    out[j].assign(op.DS.rows(), Complex(0.0, 0.0));
    for (int l = 0; l < 4; ++l) {
      const DenseMatrix* blk = block_at(op, j, l);
      if (!blk) continue;
      const ComplexVector y = matvec(*blk, v[l]);
      for (std::size_t i = 0; i < y.size(); ++i) out[j][i] += y[i];
    }
  }
  return out;
}

/// Dense system over the free dofs (|node| > a) of all four traces.
struct HsmSystem {
  DenseMatrix matrix;
  ComplexVector rhs;
  std::array<int, 4> offsets{};  // first unknown of trace j
  int block_size = 0;
};

/// I - D on V_{0,h}^4: mass minus the operator pattern, unknowns ordered by side.
inline HsmSystem assemble_block_system(const TraceBasis& b, const BlockOperator& op,
                                       const std::vector<double>& mass) {
  const auto& fr = b.free_dofs();
  const int nu = static_cast<int>(fr.size());
  const int nd = b.dof_count();
  HsmSystem sys;
  sys.block_size = nu;
  sys.matrix = DenseMatrix(4 * nu, 4 * nu);
  sys.rhs.assign(4 * nu, Complex(0.0, 0.0));
  for (int j = 0; j < 4; ++j) sys.offsets[j] = j * nu;
  for (int j = 0; j < 4; ++j) {
    for (int r = 0; r < nu; ++r) {
      Complex* row = sys.matrix.row(j * nu + r);
      for (int c = 0; c < nu; ++c) row[j * nu + c] = mass[static_cast<std::size_t>(fr[r]) * nd + fr[c]];
      for (int l = 0; l < 4; ++l) {
        const DenseMatrix* blk = block_at(op, j, l);
        if (!blk) continue;
        const Complex* br = blk->row(fr[r]);
        for (int c = 0; c < nu; ++c) row[l * nu + c] -= br[fr[c]];
      }
    }
  }
  return sys;
}

inline HsmSystem assemble_block_system(const TraceBasis& b, const WaveParams& p, const QuadratureSpec& quad) {
  return assemble_block_system(b, make_block_operator(b, assemble_Dtheta_galerkin(b, p, quad)), mass_matrix(b));
}

/// Pairing (D Phi_g, psi_n) over the free dofs for data supported in [-a, a].
inline ComplexVector assemble_rhs(const TraceBasis& b, const BlockOperator& op, const TraceVector& g) {
  for (int j = 0; j < 4; ++j)
    for (int d : b.free_dofs())
      if (g.coeffs[j][d] != Complex(0.0, 0.0))
        throw std::invalid_argument("assemble_rhs: data must vanish at nodes outside [-a, a]");
  std::array<ComplexVector, 4> v;
  for (int j = 0; j < 4; ++j) v[j] = g.coeffs[j];
  const auto dv = apply_block_operator(op, v);
  const auto& fr = b.free_dofs();
  const int nu = static_cast<int>(fr.size());
  ComplexVector rhs(4 * nu);
  for (int j = 0; j < 4; ++j)
    for (int r = 0; r < nu; ++r) rhs[j * nu + r] = dv[j][fr[r]];
  return rhs;
}

inline ComplexVector assemble_rhs(const TraceBasis& b, const WaveParams& p, const QuadratureSpec& quad,
                                  const TraceVector& g) {
  return assemble_rhs(b, make_block_operator(b, assemble_Dtheta_galerkin(b, p, quad)), g);
}

/// -(Phi_g, psi_n): the overlap of the hat functions at +-a with the first
/// free test functions. Zero when Phi_g vanishes at +-a.
inline ComplexVector mass_correction(const TraceBasis& b, const std::vector<double>& mass, const TraceVector& g) {
  const auto& fr = b.free_dofs();
  const auto& fx = b.constrained_dofs();
  const int nu = static_cast<int>(fr.size());
  const int nd = b.dof_count();
  ComplexVector out(4 * nu, Complex(0.0, 0.0));
  for (int j = 0; j < 4; ++j)
    for (int r = 0; r < nu; ++r) {
      Complex acc{0.0, 0.0};
      for (int c : fx) acc += mass[static_cast<std::size_t>(fr[r]) * nd + c] * g.coeffs[j][c];
      out[j * nu + r] = -acc;
    }
  return out;
}

enum class DenseSolver { Monolithic, Circulant };

struct DirichletOptions {
  DenseSolver solver = DenseSolver::Monolithic;
  // Keep the (Phi_g, psi) term so that the discrete equation is the Galerkin
  // projection of (I - D)(Phi_tilde + Phi_g) = 0; off drops it.
  bool mass_correction = true;
  bool project_data = false;
};

struct DirichletResult {
  TraceVector traces;  // Phi = Phi_tilde + Phi_g
  double residual = 0.0;
  int unknowns = 0;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
};

namespace assembly_detail {

// Block-circulant solve: the system is C0 x_j + C1 x_{j+1} + C3 x_{j-1} = b_j.
inline ComplexVector solve_circulant(const TraceBasis& b, const BlockOperator& op,
                                     const std::vector<double>& mass, const ComplexVector& rhs) {
  const auto& fr = b.free_dofs();
  const int nu = static_cast<int>(fr.size());
  const int nd = b.dof_count();
  ComplexVector x(4 * nu, Complex(0.0, 0.0));
  static constexpr Complex kW[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  for (int m = 0; m < 4; ++m) {
    const Complex w = kW[m];
    const Complex winv = std::conj(w);
    DenseMatrix am(nu, nu);
    for (int r = 0; r < nu; ++r)
      for (int c = 0; c < nu; ++c)
        am(r, c) = mass[static_cast<std::size_t>(fr[r]) * nd + fr[c]] - w * op.DS(fr[r], fr[c]) -
                   winv * op.SD(fr[r], fr[c]);
    ComplexVector bm(nu, Complex(0.0, 0.0));
    for (int j = 0; j < 4; ++j) {
      const Complex f = 0.25 * kW[(4 - (j * m) % 4) % 4];  // w^{-j}
      for (int r = 0; r < nu; ++r) bm[r] += f * rhs[j * nu + r];
    }
    const ComplexVector ym = LuFactorization(std::move(am)).solve(bm);
    for (int j = 0; j < 4; ++j) {
      const Complex f = kW[(j * m) % 4];  // w^{j}
      for (int r = 0; r < nu; ++r) x[j * nu + r] += f * ym[r];
    }
  }
  return x;
}

}  // namespace assembly_detail

/// Solves the Dirichlet problem outside [-a, a]^2 for data g on Sigma_a.
inline DirichletResult solve_dirichlet(const WaveParams& p, const TraceGridSpec& spec, const QuadratureSpec& quad,
                                       const BoundaryData& g, const DirichletOptions& opt = {}) {
  validate(p);
  const auto t0 = std::chrono::steady_clock::now();
  const TraceBasis basis = build_space(spec, p.a);
  const TraceVector gi = interpolate_boundary_data(basis, g, opt.project_data);
  const BlockOperator op = make_block_operator(basis, assemble_Dtheta_galerkin(basis, p, quad));
  const std::vector<double> mass = mass_matrix(basis);
  HsmSystem sys = assemble_block_system(basis, op, mass);
  sys.rhs = assemble_rhs(basis, op, gi);
  if (opt.mass_correction) {
    const ComplexVector mc = mass_correction(basis, mass, gi);
    for (std::size_t i = 0; i < mc.size(); ++i) sys.rhs[i] += mc[i];
  }
  const auto t1 = std::chrono::steady_clock::now();
  ComplexVector x;
  if (opt.solver == DenseSolver::Circulant) {
    x = assembly_detail::solve_circulant(basis, op, mass, sys.rhs);
  } else {
    x = LuFactorization(sys.matrix).solve(sys.rhs);
  }
  const auto t2 = std::chrono::steady_clock::now();
  DirichletResult res;
  res.residual = relative_residual(sys.matrix, x, sys.rhs);
  if (!std::isfinite(res.residual) || res.residual > 1e-8)
    throw SingularMatrixError("solve_dirichlet: residual " + std::to_string(res.residual) +
                              " indicates a singular discrete system");
  res.traces = gi;
  const auto& fr = basis.free_dofs();
  const int nu = static_cast<int>(fr.size());
  for (int j = 0; j < 4; ++j)
    for (int r = 0; r < nu; ++r) res.traces.coeffs[j][fr[r]] = x[j * nu + r];
  res.unknowns = 4 * nu;
  res.assembly_seconds = std::chrono::duration<double>(t1 - t0).count();
  res.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  return res;
}

/// Little-endian dump: uint64 rows, uint64 cols, then row-major (re, im) doubles.
inline void write_system_binary(std::ostream& os, const DenseMatrix& m) {
  const std::uint64_t dims[2] = {m.rows(), m.cols()};
  os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  os.write(reinterpret_cast<const char*>(m.data().data()),
           static_cast<std::streamsize>(m.data().size() * sizeof(Complex)));
}

}  // namespace hsm
