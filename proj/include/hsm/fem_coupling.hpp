#pragma once

// Lagrange FEM on Omega_b (minus an optional obstacle) coupled to the four
// complex-scaled traces: Robin pairing through the Dirichlet-to-Robin
// operator on Sigma_b and trace matching on Sigma_a.

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hsm/hsm_assembly.hpp"
#include "hsm/mesh.hpp"

namespace hsm {

using SparseMatrixC = Eigen::SparseMatrix<Complex>;
using SparseMatrixR = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------- FE space

/// Continuous P1 or P2 Lagrange space. Local P2 order: vertices 0, 1, 2 then
/// midpoints of edges (0,1), (1,2), (2,0). Dofs: vertices first, then edges.
class FemSpace {
 public:
  FemSpace(std::shared_ptr<const Mesh2D> mesh, int degree) : mesh_(std::move(mesh)), degree_(degree) {
    if (degree_ != 1 && degree_ != 2) throw ConfigError("fem: degree must be 1 or 2");
    nodes_ = mesh_->vertices;
    const int nt = static_cast<int>(mesh_->triangles.size());
    tri_dofs_.resize(nt);
    for (int t = 0; t < nt; ++t) {
      const auto& tri = mesh_->triangles[t];
      auto& d = tri_dofs_[t];
      d = {tri[0], tri[1], tri[2], -1, -1, -1};
      if (degree_ == 2)
        for (int e = 0; e < 3; ++e) {
          const auto key = edge_key(tri[e], tri[(e + 1) % 3]);
          auto it = mid_.find(key);
          if (it == mid_.end()) {
            const Point2& p = mesh_->vertices[key.first];
            const Point2& q = mesh_->vertices[key.second];
            it = mid_.emplace(key, static_cast<int>(nodes_.size())).first;
            nodes_.push_back({0.5 * (p.x1 + q.x1), 0.5 * (p.x2 + q.x2)});
          }
          d[3 + e] = it->second;
        }
    }
  }

  const Mesh2D& mesh() const { return *mesh_; }
  std::shared_ptr<const Mesh2D> mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int dof_count() const { return static_cast<int>(nodes_.size()); }
  int local_count() const { return degree_ == 1 ? 3 : 6; }
  const std::vector<Point2>& nodes() const { return nodes_; }
  const std::array<int, 6>& triangle_dofs(int t) const { return tri_dofs_[t]; }

  /// Dofs along the edge v0 -> v1 in the order v0, (midpoint), v1.
  std::vector<int> edge_dofs(int v0, int v1) const {
    if (degree_ == 1) return {v0, v1};
    const auto it = mid_.find(edge_key(v0, v1));
    if (it == mid_.end()) throw MeshError("fem: edge is not part of the mesh");
    return {v0, it->second, v1};
  }

  /// Dofs on the closure of all edges carrying `tag`.
  std::vector<int> tagged_dofs(EdgeTag tag) const {
    std::vector<int> out;
    for (const TaggedEdge& e : mesh_->edges)
      if (e.tag == tag)
        for (int d : edge_dofs(e.v0, e.v1)) out.push_back(d);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  std::shared_ptr<const Mesh2D> mesh_;
  int degree_;
  std::vector<Point2> nodes_;
  std::vector<std::array<int, 6>> tri_dofs_;
  std::map<std::pair<int, int>, int> mid_;
};

namespace fem_detail {

struct TriPoint {
  double l0, l1, l2, w;
};

// symmetric 7-point rule, exact for degree 5 (weights sum to 1)
inline const std::array<TriPoint, 7>& triangle_rule() {
  static const std::array<TriPoint, 7> rule = [] {
    const double a1 = 0.059715871789769820, b1 = 0.470142064105115090, w1 = 0.132394152788506181;
    const double a2 = 0.797426985353087322, b2 = 0.101286507323456339, w2 = 0.125939180544827153;
    return std::array<TriPoint, 7>{TriPoint{1.0 / 3, 1.0 / 3, 1.0 / 3, 0.225},
                                   {a1, b1, b1, w1}, {b1, a1, b1, w1}, {b1, b1, a1, w1},
                                   {a2, b2, b2, w2}, {b2, a2, b2, w2}, {b2, b2, a2, w2}};
  }();
  return rule;
}

// shape values from barycentric coordinates
inline void shape(int degree, const std::array<double, 3>& l, double* out) {
  if (degree == 1) {
    out[0] = l[0];
    out[1] = l[1];
    out[2] = l[2];
    return;
  }
  for (int i = 0; i < 3; ++i) out[i] = l[i] * (2.0 * l[i] - 1.0);
  out[3] = 4.0 * l[0] * l[1];
  out[4] = 4.0 * l[1] * l[2];
  out[5] = 4.0 * l[2] * l[0];
}

// shape gradients given barycentrics and the constant barycentric gradients g[i]
inline void shape_grad(int degree, const std::array<double, 3>& l, const std::array<Point2, 3>& g, Point2* out) {
  auto comb = [](double c0, const Point2& p, double c1, const Point2& q) {
    return Point2{c0 * p.x1 + c1 * q.x1, c0 * p.x2 + c1 * q.x2};
  };
  if (degree == 1) {
    for (int i = 0; i < 3; ++i) out[i] = g[i];
    return;
  }
  for (int i = 0; i < 3; ++i) out[i] = comb(4.0 * l[i] - 1.0, g[i], 0.0, g[i]);
  out[3] = comb(4.0 * l[1], g[0], 4.0 * l[0], g[1]);
  out[4] = comb(4.0 * l[2], g[1], 4.0 * l[1], g[2]);
  out[5] = comb(4.0 * l[0], g[2], 4.0 * l[2], g[0]);
}

struct TriGeometry {
  double area;
  std::array<Point2, 3> grad;  // gradients of the barycentric coordinates
};

inline TriGeometry geometry(const Mesh2D& m, int t) {
  const auto& tri = m.triangles[t];
  const Point2& p0 = m.vertices[tri[0]];
  const Point2& p1 = m.vertices[tri[1]];
  const Point2& p2 = m.vertices[tri[2]];
  const double area = signed_area(p0, p1, p2);
  const double inv = 1.0 / (2.0 * area);
  return {area,
          {Point2{(p1.x2 - p2.x2) * inv, (p2.x1 - p1.x1) * inv}, Point2{(p2.x2 - p0.x2) * inv, (p0.x1 - p2.x1) * inv},
           Point2{(p0.x2 - p1.x2) * inv, (p1.x1 - p0.x1) * inv}}};
}

inline Point2 map_point(const Mesh2D& m, int t, const std::array<double, 3>& l) {
  const auto& tri = m.triangles[t];
  Point2 p{0.0, 0.0};
  for (int i = 0; i < 3; ++i) {
    p.x1 += l[i] * m.vertices[tri[i]].x1;
    p.x2 += l[i] * m.vertices[tri[i]].x2;
  }
  return p;
}

}  // namespace fem_detail

// ---------------------------------------------------------------- fields

struct FemField {
  std::shared_ptr<const FemSpace> space;
  std::vector<Complex> values;
};

/// u_h at barycentric point l of triangle t.
inline Complex fem_value(const FemField& u, int t, const std::array<double, 3>& l) {
  double phi[6];
  fem_detail::shape(u.space->degree(), l, phi);
  const auto& d = u.space->triangle_dofs(t);
  Complex v{0.0, 0.0};
  for (int i = 0; i < u.space->local_count(); ++i) v += phi[i] * u.values[d[i]];
  return v;
}

/// grad u_h at barycentric point l of triangle t.
inline std::array<Complex, 2> fem_gradient(const FemField& u, int t, const std::array<double, 3>& l) {
  const auto geo = fem_detail::geometry(u.space->mesh(), t);
  Point2 g[6];
  fem_detail::shape_grad(u.space->degree(), l, geo.grad, g);
  const auto& d = u.space->triangle_dofs(t);
  std::array<Complex, 2> out{Complex(0.0, 0.0), Complex(0.0, 0.0)};
  for (int i = 0; i < u.space->local_count(); ++i) {
    out[0] += g[i].x1 * u.values[d[i]];
    out[1] += g[i].x2 * u.values[d[i]];
  }
  return out;
}

/// Nodal interpolant of a field.
inline FemField interpolate_field(std::shared_ptr<const FemSpace> space, const std::function<Complex(Point2)>& f) {
  FemField u{space, std::vector<Complex>(space->dof_count())};
  for (int d = 0; d < space->dof_count(); ++d) u.values[d] = f(space->nodes()[d]);
  return u;
}

// ---------------------------------------------------------------- materials

struct MaterialField {
  std::vector<double> rho{1.0, 1.0};           // per region label
  std::function<Complex(Point2)> f;           // source, integrated over the inner region only
};

inline void validate(const MaterialField& mat, const Mesh2D& m) {
  int max_region = 0;
  for (int r : m.regions) max_region = std::max(max_region, r);
  if (static_cast<int>(mat.rho.size()) <= max_region) throw ConfigError("materials: missing rho for a region label");
  for (double r : mat.rho)
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("materials: rho must be positive");
  if (mat.rho[kRegionOuter] != 1.0) throw ConfigError("materials: rho must equal 1 outside (-a, a)^2");
}

// ---------------------------------------------------------------- FEM assembly

struct FemParts {
  SparseMatrixR stiffness;
  SparseMatrixR mass_rho;  // rho-weighted mass
  SparseMatrixR robin;     // boundary mass on Sigma_b
  std::vector<Complex> load;
};

inline FemParts assemble_fem_parts(const FemSpace& sp, const MaterialField& mat) {
  const Mesh2D& m = sp.mesh();
  validate(mat, m);
  const int n = sp.dof_count();
  const int nl = sp.local_count();
  std::vector<Eigen::Triplet<double>> tk, tm, tr;
  FemParts parts;
  parts.load.assign(n, Complex(0.0, 0.0));
  double phi[6];
  Point2 grad[6];
  for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
    const auto geo = fem_detail::geometry(m, t);
    const auto& d = sp.triangle_dofs(t);
    const double rho = mat.rho[m.regions[t]];
    const bool source = mat.f && m.regions[t] == kRegionInner;
    double ke[6][6] = {}, me[6][6] = {};
    for (const auto& qp : fem_detail::triangle_rule()) {
      const std::array<double, 3> l{qp.l0, qp.l1, qp.l2};
      const double w = qp.w * geo.area;
      fem_detail::shape(sp.degree(), l, phi);
      fem_detail::shape_grad(sp.degree(), l, geo.grad, grad);
      for (int i = 0; i < nl; ++i)
        for (int k = 0; k < nl; ++k) {
          ke[i][k] += w * (grad[i].x1 * grad[k].x1 + grad[i].x2 * grad[k].x2);
          me[i][k] += w * rho * phi[i] * phi[k];
        }
      if (source) {
        const Complex fv = mat.f(fem_detail::map_point(m, t, l));
        for (int i = 0; i < nl; ++i) parts.load[d[i]] += w * fv * phi[i];
      }
    }
    for (int i = 0; i < nl; ++i)
      for (int k = 0; k < nl; ++k) {
        tk.emplace_back(d[i], d[k], ke[i][k]);
        tm.emplace_back(d[i], d[k], me[i][k]);
      }
  }
  const GaussRule g = gauss_legendre(sp.degree() + 2);
  double ph[4];
  for (const TaggedEdge& e : m.edges) {
    const int code = static_cast<int>(e.tag);
    if (code < static_cast<int>(EdgeTag::SigmaB0) || code > static_cast<int>(EdgeTag::SigmaB3)) continue;
    const auto ed = sp.edge_dofs(e.v0, e.v1);
    const Point2& p = m.vertices[e.v0];
    const Point2& q = m.vertices[e.v1];
    const double len = std::hypot(q.x1 - p.x1, q.x2 - p.x2);
    const MappedRule r = map_rule(g, 0.0, 1.0);
    for (int k = 0; k < g.size(); ++k) {
      lagrange_values(sp.degree(), r.x[k], ph);
      for (std::size_t i = 0; i < ed.size(); ++i)
        for (std::size_t l = 0; l < ed.size(); ++l) tr.emplace_back(ed[i], ed[l], len * r.w[k] * ph[i] * ph[l]);
    }
  }
  parts.stiffness.resize(n, n);
  parts.mass_rho.resize(n, n);
  parts.robin.resize(n, n);
  parts.stiffness.setFromTriplets(tk.begin(), tk.end());
  parts.mass_rho.setFromTriplets(tm.begin(), tm.end());
  parts.robin.setFromTriplets(tr.begin(), tr.end());
  return parts;
}

struct FemAssembly {
  SparseMatrixC matrix;  // stiffness - k^2 rho-mass - i k Sigma_b mass
  std::vector<Complex> load;
};

inline FemAssembly assemble_fem(const FemSpace& sp, const MaterialField& mat, const WaveParams& p) {
  validate_general(p);
  const FemParts parts = assemble_fem_parts(sp, mat);
  FemAssembly out;
  out.matrix = parts.stiffness.cast<Complex>() - (p.k * p.k) * parts.mass_rho.cast<Complex>() -
               Complex(0.0, p.k) * parts.robin.cast<Complex>();
  out.load = parts.load;
  return out;
}

// ---------------------------------------------------------------- couplings

/// Per side j: rows are the FE dofs on Sigma_b^j, columns all trace dofs;
/// entry (n, m) = int_{-b}^{b} (Lambda_theta phi_m)(t) v_n(t) dt.
struct LambdaCoupling {
  std::array<std::vector<int>, 4> fem_rows;
  std::array<DenseMatrix, 4> blocks;
};

inline LambdaCoupling assemble_lambda_coupling(const TraceBasis& basis, const FemSpace& sp, const WaveParams& p,
                                               const QuadratureSpec& quad) {
  validate_general(p);
  validate(quad);
  const Mesh2D& m = sp.mesh();
  const int nd = basis.dof_count();
  const int q = basis.q();
  const GaussRule rule = gauss_legendre(quad.panel_order);

  // source quadrature over the whole trace line
  std::vector<double> s_pts;
  std::vector<double> s_w;
  std::vector<int> s_first;
  std::vector<std::array<double, 4>> s_phi;
  for (const TraceElement& el : basis.elements()) {
    const MappedRule r = map_rule(rule, el.lo, el.hi);
    for (int g = 0; g < rule.size(); ++g) {
      std::array<double, 4> ph{};
      lagrange_values(q, (r.x[g] - el.lo) / (el.hi - el.lo), ph.data());
      s_pts.push_back(r.x[g]);
      s_w.push_back(r.w[g]);
      s_first.push_back(el.first_dof);
      s_phi.push_back(ph);
    }
  }

  // test points on every Sigma_b edge: (side, t, weight, edge dofs, basis values)
  struct TestPoint {
    int side;
    double t;
    double w;
    std::vector<int> dofs;
    std::array<double, 4> v;
  };
  std::vector<TestPoint> pts;
  const GaussRule trule = gauss_legendre(quad.panel_order);
  for (const TaggedEdge& e : m.edges) {
    const int code = static_cast<int>(e.tag);
    if (code < static_cast<int>(EdgeTag::SigmaB0) || code > static_cast<int>(EdgeTag::SigmaB3)) continue;
    const int j = code - static_cast<int>(EdgeTag::SigmaB0);
    const double t0 = local_coords(j, m.vertices[e.v0]).x2;
    const double t1 = local_coords(j, m.vertices[e.v1]).x2;
    const MappedRule r = map_rule(trule, 0.0, 1.0);
    for (int g = 0; g < trule.size(); ++g) {
      TestPoint tp{j, t0 + r.x[g] * (t1 - t0), r.w[g] * std::abs(t1 - t0), sp.edge_dofs(e.v0, e.v1), {}};
      lagrange_values(sp.degree(), r.x[g], tp.v.data());
      pts.push_back(std::move(tp));
    }
  }

  // I_m(t) = int Lambda kernel(t, s) phi_m(s) ds, shared by sides with the same t
  std::map<long long, int> key_of;
  std::vector<double> ts;
  std::vector<int> row_of(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const long long key = std::llround(pts[i].t * 1e11);
    auto it = key_of.find(key);
    if (it == key_of.end()) {
      it = key_of.emplace(key, static_cast<int>(ts.size())).first;
      ts.push_back(pts[i].t);
    }
    row_of[i] = it->second;
  }
  std::vector<std::vector<Complex>> rows(ts.size());
  parallel_for(static_cast<int>(ts.size()), [&](int i) {
    std::vector<Complex> r(nd, Complex(0.0, 0.0));
    for (std::size_t g = 0; g < s_pts.size(); ++g) {
      const Complex kv = kernel_Lambda_theta(p, ts[i], s_pts[g]) * s_w[g];
      for (int l = 0; l <= q; ++l) r[s_first[g] + l] += kv * s_phi[g][l];
    }
    rows[i] = std::move(r);
  });

  LambdaCoupling out;
  for (int j = 0; j < 4; ++j) {
    out.fem_rows[j] = sp.tagged_dofs(sigma_b_tag(j));
    out.blocks[j] = DenseMatrix(out.fem_rows[j].size(), nd);
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const TestPoint& tp = pts[i];
    const auto& fr = out.fem_rows[tp.side];
    const std::vector<Complex>& r = rows[row_of[i]];
    for (std::size_t l = 0; l < tp.dofs.size(); ++l) {
      const int row = static_cast<int>(std::lower_bound(fr.begin(), fr.end(), tp.dofs[l]) - fr.begin());
      Complex* dst = out.blocks[tp.side].row(row);
      const double c = tp.w * tp.v[l];
      for (int k = 0; k < nd; ++k) dst[k] += c * r[k];
    }
  }
  return out;
}

/// Phi(u_b): for side j and the c-th constrained trace dof, the FE dof at the
/// same point of Sigma_a^j.
struct TraceMatching {
  std::array<std::vector<int>, 4> fem_dof;
};

inline TraceMatching assemble_trace_matching(const TraceBasis& basis, const FemSpace& sp) {
  const double a = basis.a();
  if (std::abs(sp.mesh().a - a) > 1e-12 * a) throw MeshError("trace matching: mesh and trace space disagree on a");
  if (sp.degree() != basis.q())
    throw ConfigError("trace matching: trace degree q must equal the FE degree on Sigma_a");
  TraceMatching out;
  const double tol = 1e-9 * a;
  for (int j = 0; j < 4; ++j) {
    const std::vector<int> on = sp.tagged_dofs(sigma_a_tag(j));
    std::vector<std::pair<double, int>> by_t;
    for (int d : on) by_t.push_back({local_coords(j, sp.nodes()[d]).x2, d});
    std::sort(by_t.begin(), by_t.end());
    const auto& fx = basis.constrained_dofs();
    if (by_t.size() != fx.size())
      throw MeshError("trace matching: side " + std::to_string(j) + " has " + std::to_string(by_t.size()) +
                      " FE nodes on Sigma_a but " + std::to_string(fx.size()) + " trace nodes in [-a, a]");
    for (std::size_t c = 0; c < fx.size(); ++c) {
      const double s = basis.nodes()[fx[c]];
      if (std::abs(by_t[c].first - s) > tol)
        throw MeshError("trace matching: FE node at t = " + std::to_string(by_t[c].first) + " on side " +
                        std::to_string(j) + " does not align with trace node " + std::to_string(s));
      out.fem_dof[j].push_back(by_t[c].second);
    }
  }
  return out;
}

/// Phi(u_b) as a trace vector (zero at the free dofs).
inline TraceVector apply_trace_matching(const TraceMatching& tm, std::shared_ptr<const TraceBasis> basis,
                                        const FemField& u) {
  TraceVector v(std::move(basis));
  const auto& fx = v.basis->constrained_dofs();
  for (int j = 0; j < 4; ++j)
    for (std::size_t c = 0; c < fx.size(); ++c) v.coeffs[j][fx[c]] = u.values[tm.fem_dof[j][c]];
  return v;
}

// ---------------------------------------------------------------- coupled solve

enum class CoupledSolver { Schur, Monolithic };

struct GeneralOptions {
  CoupledSolver solver = CoupledSolver::Schur;
  bool mass_correction = true;  // as in DirichletOptions
  int fem_degree = 2;
  std::size_t monolithic_limit = 6000;  // dense path size guard
};

struct GeneralResult {
  FemField u;
  TraceVector traces;  // Phi = Phi_tilde + Phi(u_b)
  double residual = 0.0;
  int fem_unknowns = 0;
  int trace_unknowns = 0;
  double assembly_seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Assembled pieces of the coupled problem, kept for solves and checks.
struct CoupledSystem {
  std::shared_ptr<const TraceBasis> basis;
  std::shared_ptr<const FemSpace> space;
  BlockOperator op;
  std::vector<double> trace_mass;
  FemAssembly fem;
  LambdaCoupling lambda;
  TraceMatching matching;
};

inline CoupledSystem assemble_coupled(const WaveParams& p, const TraceGridSpec& spec, const QuadratureSpec& quad,
                                      std::shared_ptr<const Mesh2D> mesh, const MaterialField& mat, int degree) {
  validate_general(p);
  if (std::abs(mesh->a - p.a) > 1e-12 * p.a || std::abs(mesh->b - p.b) > 1e-12 * p.b)
    throw MeshError("coupled solve: mesh a, b differ from the wave parameters");
  CoupledSystem cs;
  cs.basis = std::make_shared<const TraceBasis>(build_space(spec, p.a));
  cs.space = std::make_shared<const FemSpace>(std::move(mesh), degree);
  cs.matching = assemble_trace_matching(*cs.basis, *cs.space);
  cs.op = make_block_operator(*cs.basis, assemble_Dtheta_galerkin(*cs.basis, p, quad));
  cs.trace_mass = mass_matrix(*cs.basis);
  cs.fem = assemble_fem(*cs.space, mat, p);
  cs.lambda = assemble_lambda_coupling(*cs.basis, *cs.space, p, quad);
  return cs;
}

namespace fem_detail {

// Dense trace rows over free test dofs: columns (l, c) for all dofs c of side l.
inline DenseMatrix trace_rows(const TraceBasis& b, const BlockOperator& op, const std::vector<double>& mass,
                              bool mass_on_constrained) {
  const auto& fr = b.free_dofs();
  const int nu = static_cast<int>(fr.size());
  const int nd = b.dof_count();
  DenseMatrix k(4 * nu, 4 * nd);
  for (int j = 0; j < 4; ++j)
    for (int r = 0; r < nu; ++r) {
      Complex* row = k.row(j * nu + r);
      for (int c = 0; c < nd; ++c)
        if (mass_on_constrained || !b.constrained_mask()[c])
          row[j * nd + c] = mass[static_cast<std::size_t>(fr[r]) * nd + c];
      for (int l = 0; l < 4; ++l) {
        const DenseMatrix* blk = block_at(op, j, l);
        if (!blk) continue;
        const Complex* br = blk->row(fr[r]);
        for (int c = 0; c < nd; ++c) row[l * nd + c] -= br[c];
      }
    }
  return k;
}

}  // namespace fem_detail

/// Solves the coupled trace/FEM problem. With an obstacle, `obstacle_g` gives
/// the Dirichlet data on its boundary (nodal interpolation).
inline GeneralResult solve_general(const WaveParams& p, const TraceGridSpec& spec, const QuadratureSpec& quad,
                                   std::shared_ptr<const Mesh2D> mesh, const MaterialField& mat,
                                   const std::function<Complex(Point2)>& obstacle_g,
                                   const GeneralOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (mesh->has_obstacle() != static_cast<bool>(obstacle_g))
    throw ConfigError("coupled solve: obstacle data must be given exactly when the mesh has an obstacle");
  const CoupledSystem cs = assemble_coupled(p, spec, quad, std::move(mesh), mat, opt.fem_degree);
  const TraceBasis& b = *cs.basis;
  const FemSpace& sp = *cs.space;
  const int nd = b.dof_count();
  const auto& fr = b.free_dofs();
  const auto& fx = b.constrained_dofs();
  const int nu = static_cast<int>(fr.size());
  const int nc = static_cast<int>(fx.size());
  const int nf = sp.dof_count();

  // FE unknowns: all dofs except the obstacle boundary
  std::vector<Complex> gd(nf, Complex(0.0, 0.0));
  std::vector<bool> dirichlet(nf, false);
  if (obstacle_g)
    for (int d : sp.tagged_dofs(EdgeTag::Obstacle)) {
      dirichlet[d] = true;
      gd[d] = obstacle_g(sp.nodes()[d]);
    }
  std::vector<int> fidx(nf, -1);
  std::vector<int> fdofs;
  for (int d = 0; d < nf; ++d)
    if (!dirichlet[d]) {
      fidx[d] = static_cast<int>(fdofs.size());
      fdofs.push_back(d);
    }
  const int nfu = static_cast<int>(fdofs.size());
  for (int j = 0; j < 4; ++j)
    for (int d : cs.matching.fem_dof[j])
      if (dirichlet[d]) throw MeshError("coupled solve: obstacle touches Sigma_a");

  // B = A_ff - sum_j L_j[:, constrained] P_j and rhs_fem = F_f - A_fD g_D
  std::vector<Eigen::Triplet<Complex>> tb;
  std::vector<Complex> rhs_fem(nfu, Complex(0.0, 0.0));
  for (int d = 0; d < nfu; ++d) rhs_fem[d] = cs.fem.load[fdofs[d]];
  for (int col = 0; col < cs.fem.matrix.outerSize(); ++col)
    for (SparseMatrixC::InnerIterator it(cs.fem.matrix, col); it; ++it) {
      const int r = static_cast<int>(it.row());
      if (dirichlet[r]) continue;
      if (dirichlet[col])
        rhs_fem[fidx[r]] -= it.value() * gd[col];
      else
        tb.emplace_back(fidx[r], fidx[col], it.value());
    }
  for (int j = 0; j < 4; ++j) {
    const auto& rows = cs.lambda.fem_rows[j];
    for (std::size_t n = 0; n < rows.size(); ++n) {
      if (dirichlet[rows[n]]) continue;
      for (int c = 0; c < nc; ++c)
        tb.emplace_back(fidx[rows[n]], fidx[cs.matching.fem_dof[j][c]], -cs.lambda.blocks[j](n, fx[c]));
    }
  }
  SparseMatrixC bmat(nfu, nfu);
  bmat.setFromTriplets(tb.begin(), tb.end());
  bmat.makeCompressed();

  const DenseMatrix kt = fem_detail::trace_rows(b, cs.op, cs.trace_mass, opt.mass_correction);
  const int nt = 4 * nu;
  // L_F applied to Phi_tilde and its transpose structure
  auto apply_lf = [&](const ComplexVector& phi, std::vector<Complex>& out) {
    for (int j = 0; j < 4; ++j) {
      const auto& rows = cs.lambda.fem_rows[j];
      for (std::size_t n = 0; n < rows.size(); ++n) {
        if (dirichlet[rows[n]]) continue;
        Complex acc{0.0, 0.0};
        const Complex* lr = cs.lambda.blocks[j].row(n);
        for (int r = 0; r < nu; ++r) acc += lr[fr[r]] * phi[j * nu + r];
        out[fidx[rows[n]]] += acc;
      }
    }
  };
  // Kt_C P u for a full FE unknown vector
  auto apply_ktc = [&](const std::vector<Complex>& uf, ComplexVector& out) {
    for (int row = 0; row < nt; ++row) {
      const Complex* kr = kt.row(row);
      Complex acc{0.0, 0.0};
      for (int l = 0; l < 4; ++l)
        for (int c = 0; c < nc; ++c) acc += kr[l * nd + fx[c]] * uf[fidx[cs.matching.fem_dof[l][c]]];
      out[row] += acc;
    }
  };
  const auto t1 = std::chrono::steady_clock::now();

  ComplexVector phi(nt, Complex(0.0, 0.0));
  std::vector<Complex> uf(nfu, Complex(0.0, 0.0));
  if (opt.solver == CoupledSolver::Monolithic) {
    const std::size_t n = static_cast<std::size_t>(nt + nfu);
    if (n > opt.monolithic_limit)
      throw ConfigError("coupled solve: monolithic system of size " + std::to_string(n) +
                        " exceeds the dense limit; use the Schur path");
    DenseMatrix big(n, n);
    for (int row = 0; row < nt; ++row) {
      const Complex* kr = kt.row(row);
      for (int l = 0; l < 4; ++l) {
        for (int r = 0; r < nu; ++r) big(row, l * nu + r) = kr[l * nd + fr[r]];
        for (int c = 0; c < nc; ++c) big(row, nt + fidx[cs.matching.fem_dof[l][c]]) += kr[l * nd + fx[c]];
      }
    }
    for (int col = 0; col < bmat.outerSize(); ++col)
      for (SparseMatrixC::InnerIterator it(bmat, col); it; ++it) big(nt + it.row(), nt + col) += it.value();
    for (int j = 0; j < 4; ++j) {
      const auto& rows = cs.lambda.fem_rows[j];
      for (std::size_t m = 0; m < rows.size(); ++m) {
        if (dirichlet[rows[m]]) continue;
        for (int r = 0; r < nu; ++r) big(nt + fidx[rows[m]], j * nu + r) -= cs.lambda.blocks[j](m, fr[r]);
      }
    }
    ComplexVector rhs(n, Complex(0.0, 0.0));
    for (int d = 0; d < nfu; ++d) rhs[nt + d] = rhs_fem[d];
    const ComplexVector x = LuFactorization(std::move(big)).solve(rhs);
    std::copy(x.begin(), x.begin() + nt, phi.begin());
    std::copy(x.begin() + nt, x.end(), uf.begin());
  } else {
    Eigen::SparseLU<SparseMatrixC, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(bmat);
    lu.factorize(bmat);
    if (lu.info() != Eigen::Success) throw SingularMatrixError("coupled solve: sparse FEM block is singular");
    // W = P B^{-1}, one transposed solve per distinct Sigma_a dof
    std::vector<int> sig;
    for (int j = 0; j < 4; ++j)
      for (int d : cs.matching.fem_dof[j]) sig.push_back(fidx[d]);
    std::sort(sig.begin(), sig.end());
    sig.erase(std::unique(sig.begin(), sig.end()), sig.end());
    const int ns = static_cast<int>(sig.size());
    std::vector<Eigen::VectorXcd> w(ns);
    for (int i = 0; i < ns; ++i) {
      Eigen::VectorXcd e = Eigen::VectorXcd::Zero(nfu);
      e[sig[i]] = 1.0;
      w[i] = lu.transpose().solve(e);
    }
    auto sig_index = [&](int f) {
      return static_cast<int>(std::lower_bound(sig.begin(), sig.end(), f) - sig.begin());
    };
    // X = W L_F (ns x nt) and y = W rhs_fem
    DenseMatrix x(ns, nt);
    ComplexVector y(ns, Complex(0.0, 0.0));
    for (int i = 0; i < ns; ++i) {
      for (int d = 0; d < nfu; ++d) y[i] += w[i][d] * rhs_fem[d];
      for (int j = 0; j < 4; ++j) {
        const auto& rows = cs.lambda.fem_rows[j];
        for (std::size_t m = 0; m < rows.size(); ++m) {
          if (dirichlet[rows[m]]) continue;
          const Complex wv = w[i][fidx[rows[m]]];
          const Complex* lr = cs.lambda.blocks[j].row(m);
          Complex* xr = x.row(i) + j * nu;
          for (int r = 0; r < nu; ++r) xr[r] += wv * lr[fr[r]];
        }
      }
    }
    // S = Kt_F + Kt_C X, rhs = -Kt_C y
    DenseMatrix s(nt, nt);
    ComplexVector rs(nt, Complex(0.0, 0.0));
    std::vector<std::pair<int, int>> cmap;  // (column in kt, row of x)
    for (int l = 0; l < 4; ++l)
      for (int c = 0; c < nc; ++c) cmap.push_back({l * nd + fx[c], sig_index(fidx[cs.matching.fem_dof[l][c]])});
    for (int row = 0; row < nt; ++row) {
      const Complex* kr = kt.row(row);
      Complex* sr = s.row(row);
      for (int l = 0; l < 4; ++l)
        for (int r = 0; r < nu; ++r) sr[l * nu + r] = kr[l * nd + fr[r]];
      for (const auto& [col, xi] : cmap) {
        const Complex kv = kr[col];
        if (kv == Complex(0.0, 0.0)) continue;
        const Complex* xr = x.row(xi);
        for (int k = 0; k < nt; ++k) sr[k] += kv * xr[k];
        rs[row] -= kv * y[xi];
      }
    }
    phi = LuFactorization(std::move(s)).solve(rs);
    std::vector<Complex> rhs2 = rhs_fem;
    apply_lf(phi, rhs2);
    const Eigen::VectorXcd u2 = lu.solve(Eigen::Map<const Eigen::VectorXcd>(rhs2.data(), nfu));
    for (int d = 0; d < nfu; ++d) uf[d] = u2[d];
  }
  const auto t2 = std::chrono::steady_clock::now();

  // residual of the full coupled system
  ComplexVector r1(nt, Complex(0.0, 0.0));
  for (int row = 0; row < nt; ++row) {
    const Complex* kr = kt.row(row);
    Complex acc{0.0, 0.0};
    for (int l = 0; l < 4; ++l)
      for (int r = 0; r < nu; ++r) acc += kr[l * nd + fr[r]] * phi[l * nu + r];
    r1[row] = acc;
  }
  apply_ktc(uf, r1);
  const Eigen::VectorXcd bu = bmat * Eigen::Map<const Eigen::VectorXcd>(uf.data(), nfu);
  std::vector<Complex> r2(nfu);
  for (int d = 0; d < nfu; ++d) r2[d] = bu[d] - rhs_fem[d];
  {
    std::vector<Complex> lf(nfu, Complex(0.0, 0.0));
    apply_lf(phi, lf);
    for (int d = 0; d < nfu; ++d) r2[d] -= lf[d];
  }
  double rn = 0.0, bn = 0.0;
  for (const Complex& z : r1) rn += std::norm(z);
  for (const Complex& z : r2) rn += std::norm(z);
  for (const Complex& z : rhs_fem) bn += std::norm(z);
  GeneralResult res;
  res.residual = bn > 0.0 ? std::sqrt(rn / bn) : std::sqrt(rn);
  if (!std::isfinite(res.residual) || (bn > 0.0 && res.residual > 1e-8))
    throw SingularMatrixError("coupled solve: residual " + std::to_string(res.residual) +
                              " indicates a singular discrete system");

  res.u = FemField{cs.space, gd};
  for (int d = 0; d < nfu; ++d) res.u.values[fdofs[d]] = uf[d];
  res.traces = apply_trace_matching(cs.matching, cs.basis, res.u);
  for (int j = 0; j < 4; ++j)
    for (int r = 0; r < nu; ++r) res.traces.coeffs[j][fr[r]] = phi[j * nu + r];
  res.fem_unknowns = nfu;
  res.trace_unknowns = nt;
  res.assembly_seconds = std::chrono::duration<double>(t1 - t0).count();
  res.solve_seconds = std::chrono::duration<double>(t2 - t1).count();
  return res;
}

}  // namespace hsm
