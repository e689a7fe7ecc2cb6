#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "hsm/fem_coupling.hpp"

using hsm::Complex;
using hsm::Point2;
using hsm::WaveParams;

namespace {
constexpr double kPi = std::numbers::pi;

WaveParams params(double theta = kPi / 6.0) {
  WaveParams p;
  p.a = 0.8;
  p.b = 1.2;
  p.theta = theta;
  return p;
}

std::shared_ptr<const hsm::Mesh2D> mesh_ptr(double h, std::optional<hsm::Obstacle> ob = std::nullopt) {
  hsm::MeshSpec spec;
  spec.h = h;
  spec.obstacle = ob;
  return std::make_shared<const hsm::Mesh2D>(hsm::build_mesh(spec));
}

Complex hankel_field(const WaveParams& p, Point2 x) {
  return hsm::hankel1(0, Complex(p.k * std::hypot(x.x1, x.x2), 0.0));
}

// gradient of H_0(k|x|)
std::array<Complex, 2> hankel_grad(const WaveParams& p, Point2 x) {
  const double r = std::hypot(x.x1, x.x2);
  const Complex d = -p.k * hsm::hankel1(1, Complex(p.k * r, 0.0));
  return {d * x.x1 / r, d * x.x2 / r};
}

Complex exact_trace(const WaveParams& p, double s) {
  const Complex t = hsm::tau(p, s);
  return hsm::hankel1(0, p.k * std::sqrt(p.a * p.a + t * t));
}

double sparse_asym(const hsm::SparseMatrixR& m) {
  const hsm::SparseMatrixR d = m - hsm::SparseMatrixR(m.transpose());
  return d.norm() / m.norm();
}
}  // namespace

TEST(Mesh, TagsAndMeasures) {
  for (std::optional<hsm::Obstacle> ob :
       {std::optional<hsm::Obstacle>{}, std::optional<hsm::Obstacle>{hsm::DiskObstacle{{0.0, 0.0}, 0.5}},
        std::optional<hsm::Obstacle>{hsm::TriangleObstacle{{Point2{-0.4, -0.3}, Point2{0.5, -0.2}, Point2{0.0, 0.45}}}}}) {
    const auto m = mesh_ptr(0.1, ob);
    double area = 0.0;
    for (const auto& t : m->triangles) {
      const double s = hsm::signed_area(m->vertices[t[0]], m->vertices[t[1]], m->vertices[t[2]]);
      EXPECT_GT(s, 0.0);
      area += s;
    }
    std::array<double, 9> len{};
    for (const auto& e : m->edges)
      len[static_cast<int>(e.tag)] += std::hypot(m->vertices[e.v1].x1 - m->vertices[e.v0].x1,
                                                 m->vertices[e.v1].x2 - m->vertices[e.v0].x2);
    for (int j = 0; j < 4; ++j) {
      EXPECT_NEAR(len[static_cast<int>(hsm::sigma_b_tag(j))], 2.0 * m->b, 1e-12);
      EXPECT_NEAR(len[static_cast<int>(hsm::sigma_a_tag(j))], 2.0 * m->a, 1e-12);
    }
    EXPECT_EQ(m->has_obstacle(), ob.has_value());
    if (!ob) EXPECT_NEAR(area, 4.0 * m->b * m->b, 1e-12);
    if (ob && std::holds_alternative<hsm::DiskObstacle>(*ob)) {
      // inscribed polygon: slightly more area than the exact complement
      EXPECT_GT(area, 4.0 * m->b * m->b - kPi * 0.25);
      EXPECT_LT(area, 4.0 * m->b * m->b - kPi * 0.25 + 0.01);
      EXPECT_NEAR(len[0], 2.0 * kPi * 0.5, 0.01);
    }
  }
}

TEST(Mesh, RoundTripAndLocator) {
  const auto m = mesh_ptr(0.1, hsm::DiskObstacle{{0.1, -0.1}, 0.4});
  std::stringstream ss;
  hsm::write_mesh(ss, *m);
  const hsm::Mesh2D r = hsm::read_mesh(ss);
  EXPECT_EQ(r.a, m->a);
  EXPECT_EQ(r.b, m->b);
  ASSERT_EQ(r.vertices.size(), m->vertices.size());
  for (std::size_t i = 0; i < r.vertices.size(); ++i) {
    EXPECT_EQ(r.vertices[i].x1, m->vertices[i].x1);
    EXPECT_EQ(r.vertices[i].x2, m->vertices[i].x2);
  }
  EXPECT_EQ(r.triangles, m->triangles);
  EXPECT_EQ(r.regions, m->regions);
  ASSERT_EQ(r.edges.size(), m->edges.size());

  const hsm::TriangleLocator loc(*m);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-m->b, m->b);
  int found = 0;
  for (int i = 0; i < 2000; ++i) {
    const Point2 p{u(rng), u(rng)};
    const auto [t, bc] = loc.locate(p);
    const bool inside_obstacle = std::hypot(p.x1 - 0.1, p.x2 + 0.1) < 0.39;
    if (inside_obstacle) {
      EXPECT_EQ(t, -1);
      continue;
    }
    if (std::hypot(p.x1 - 0.1, p.x2 + 0.1) < 0.41) continue;  // polygonal boundary band
    ASSERT_GE(t, 0);
    ++found;
    Point2 q{0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      q.x1 += bc[k] * m->vertices[m->triangles[t][k]].x1;
      q.x2 += bc[k] * m->vertices[m->triangles[t][k]].x2;
    }
    EXPECT_NEAR(q.x1, p.x1, 1e-12);
    EXPECT_NEAR(q.x2, p.x2, 1e-12);
  }
  EXPECT_GT(found, 1000);
}

TEST(Mesh, RejectsBadInput) {
  hsm::MeshSpec spec;
  spec.obstacle = hsm::DiskObstacle{{0.0, 0.0}, 0.85};
  EXPECT_THROW(hsm::build_mesh(spec), hsm::ConfigError);
  std::stringstream bad("not a mesh\n");
  EXPECT_THROW(hsm::read_mesh(bad), hsm::MeshError);
}

TEST(FemCoupling, SigmaANodesMatchTraceSpace) {
  const WaveParams p = params();
  for (int q : {1, 2}) {
    const hsm::FemSpace sp(mesh_ptr(0.1), q);
    const hsm::TraceBasis b = hsm::build_space({3.0, 0.1, q}, p.a);
    const hsm::TraceMatching tm = hsm::assemble_trace_matching(b, sp);
    for (int j = 0; j < 4; ++j)
      for (std::size_t c = 0; c < b.constrained_dofs().size(); ++c) {
        const Point2 x = hsm::global_coords(j, {p.a, b.nodes()[b.constrained_dofs()[c]]});
        const Point2 y = sp.nodes()[tm.fem_dof[j][c]];
        EXPECT_NEAR(x.x1, y.x1, 1e-14);
        EXPECT_NEAR(x.x2, y.x2, 1e-14);
      }
    // corners are shared: phi^j(a) and phi^{j+1}(-a) use one FE dof
    for (int j = 0; j < 4; ++j) EXPECT_EQ(tm.fem_dof[j].back(), tm.fem_dof[(j + 1) % 4].front());
  }
  const hsm::FemSpace sp(mesh_ptr(0.1), 2);
  EXPECT_THROW(hsm::assemble_trace_matching(hsm::build_space({3.0, 0.08, 2}, p.a), sp), hsm::MeshError);
  EXPECT_THROW(hsm::assemble_trace_matching(hsm::build_space({3.0, 0.1, 1}, p.a), sp), hsm::ConfigError);
}

TEST(FemCoupling, PatchTests) {
  // P1 reproduces linears, P2 reproduces quadratics: K u_I = load on interior rows
  const auto m = mesh_ptr(0.2, hsm::DiskObstacle{{0.0, 0.0}, 0.4});
  for (int deg : {1, 2}) {
    auto sp = std::make_shared<const hsm::FemSpace>(m, deg);
    hsm::MaterialField mat;
    // u = x^2 + 2y^2 - xy has -Delta u = -6; u = 3x - y + 1 for P1
    mat.f = [deg](Point2) { return Complex(deg == 2 ? -6.0 : 0.0, 0.0); };
    const auto uex = [deg](Point2 x) {
      return deg == 2 ? Complex(x.x1 * x.x1 + 2.0 * x.x2 * x.x2 - x.x1 * x.x2, 0.0)
                      : Complex(3.0 * x.x1 - x.x2 + 1.0, 0.0);
    };
    const hsm::FemParts parts = hsm::assemble_fem_parts(*sp, mat);
    const hsm::FemField ui = hsm::interpolate_field(sp, uex);
    const Eigen::VectorXcd ku =
        parts.stiffness.cast<Complex>() * Eigen::Map<const Eigen::VectorXcd>(ui.values.data(), sp->dof_count());
    // rows supported strictly inside the inner region (the source lives there)
    std::vector<bool> boundary(sp->dof_count(), false);
    for (int t = 0; t < static_cast<int>(m->triangles.size()); ++t)
      if (m->regions[t] != hsm::kRegionInner)
        for (int i = 0; i < sp->local_count(); ++i) boundary[sp->triangle_dofs(t)[i]] = true;
    for (const auto& e : m->edges)
      for (int d : sp->edge_dofs(e.v0, e.v1)) boundary[d] = true;
    int checked = 0;
    for (int d = 0; d < sp->dof_count(); ++d) {
      if (boundary[d]) continue;
      ++checked;
      EXPECT_NEAR(std::abs(ku[d] - parts.load[d]), 0.0, 1e-12) << "degree " << deg << " dof " << d;
    }
    EXPECT_GT(checked, 10);
  }
}

TEST(FemCoupling, MatrixSymmetryAndMeasures) {
  const auto m = mesh_ptr(0.2);
  for (int deg : {1, 2}) {
    const hsm::FemSpace sp(m, deg);
    hsm::MaterialField mat;
    mat.rho = {1.0, 2.5};
    const hsm::FemParts parts = hsm::assemble_fem_parts(sp, mat);
    EXPECT_LT(sparse_asym(parts.stiffness), 1e-14);
    EXPECT_LT(sparse_asym(parts.mass_rho), 1e-14);
    EXPECT_LT(sparse_asym(parts.robin), 1e-14);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(sp.dof_count());
    // 1^T M 1 is the rho-weighted area, 1^T R 1 the length of Sigma_b, K 1 = 0
    EXPECT_NEAR(one.dot(parts.mass_rho * one), 4.0 * (1.44 - 0.64) + 2.5 * 4.0 * 0.64, 1e-12);
    EXPECT_NEAR(one.dot(parts.robin * one), 8.0 * 1.2, 1e-12);
    EXPECT_LT((parts.stiffness * one).norm(), 1e-12);
  }
  hsm::MaterialField bad;
  bad.rho = {2.0, 1.0};
  EXPECT_THROW(hsm::assemble_fem_parts(hsm::FemSpace(m, 1), bad), hsm::ConfigError);
}

TEST(FemCoupling, LambdaMatchesRobinTraceOfOutgoingField) {
  // for u = H_0(k|x|), L_j applied to the exact scaled trace equals
  // int (d_nu u - i k u) v_n on Sigma_b^j
  const WaveParams p = params();
  auto sp = std::make_shared<const hsm::FemSpace>(mesh_ptr(0.1), 2);
  const hsm::TraceBasis b = hsm::build_space({6.0, 0.05, 2}, p.a);
  const hsm::LambdaCoupling lc = hsm::assemble_lambda_coupling(b, *sp, p, {});
  std::vector<Complex> phi(b.dof_count());
  for (int d = 0; d < b.dof_count(); ++d) phi[d] = exact_trace(p, b.nodes()[d]);
  const hsm::GaussRule g = hsm::gauss_legendre(8);
  double err = 0.0, ref = 0.0;
  for (int j = 0; j < 4; ++j) {
    const auto& rows = lc.fem_rows[j];
    std::vector<Complex> direct(rows.size(), Complex(0.0, 0.0));
    for (const auto& e : sp->mesh().edges) {
      if (e.tag != hsm::sigma_b_tag(j)) continue;
      const auto ed = sp->edge_dofs(e.v0, e.v1);
      const Point2 x0 = sp->nodes()[e.v0], x1 = sp->nodes()[e.v1];
      const double len = std::hypot(x1.x1 - x0.x1, x1.x2 - x0.x2);
      const hsm::MappedRule r = hsm::map_rule(g, 0.0, 1.0);
      for (int k = 0; k < g.size(); ++k) {
        const Point2 x{x0.x1 + r.x[k] * (x1.x1 - x0.x1), x0.x2 + r.x[k] * (x1.x2 - x0.x2)};
        const auto gr = hankel_grad(p, x);
        const Point2 nu = hsm::global_coords(j, {1.0, 0.0});
        const Complex robin = gr[0] * nu.x1 + gr[1] * nu.x2 - Complex(0.0, p.k) * hankel_field(p, x);
        double v[3];
        hsm::lagrange_values(2, r.x[k], v);
        for (int l = 0; l < 3; ++l) {
          const auto it = std::lower_bound(rows.begin(), rows.end(), ed[l]);
          direct[it - rows.begin()] += len * r.w[k] * v[l] * robin;
        }
      }
    }
    for (std::size_t n = 0; n < rows.size(); ++n) {
      Complex acc{0.0, 0.0};
      for (int d = 0; d < b.dof_count(); ++d) acc += lc.blocks[j](n, d) * phi[d];
      err += std::norm(acc - direct[n]);
      ref += std::norm(direct[n]);
    }
  }
  EXPECT_LE(std::sqrt(err / ref), 1e-3);
}

TEST(FemCoupling, LambdaColumnsDecay) {
  // columns for trace dofs far out on the scaled path barely reach Sigma_b
  const WaveParams p = params();
  const hsm::FemSpace sp(mesh_ptr(0.2), 1);
  const hsm::TraceBasis b = hsm::build_space({6.0, 0.1, 1}, p.a);
  const hsm::LambdaCoupling lc = hsm::assemble_lambda_coupling(b, sp, p, {});
  auto col_norm = [&](double s) {
    const int d = b.locate(s) ;
    double acc = 0.0;
    for (std::size_t n = 0; n < lc.fem_rows[0].size(); ++n) acc += std::norm(lc.blocks[0](n, d));
    return std::sqrt(acc);
  };
  const double near = col_norm(1.0), mid = col_norm(3.0), far = col_norm(5.5);
  EXPECT_GT(near, 10.0 * mid);
  EXPECT_GT(mid, 10.0 * far);
}

TEST(FemCoupling, DiskWithHankelDataReproducesField) {
  // Dirichlet data H_0(k|x|) on a centred disk: the exterior solution is H_0 itself
  const WaveParams p = params();
  const auto m = mesh_ptr(0.1, hsm::DiskObstacle{{0.0, 0.0}, 0.4});
  const auto field = [&](Point2 x) { return hankel_field(p, x); };
  const hsm::GeneralResult r = hsm::solve_general(p, {4.0, 0.1, 2}, {}, m, {}, field);
  EXPECT_LE(r.residual, 1e-10);
  double err = 0.0, ref = 0.0;
  for (int d = 0; d < r.u.space->dof_count(); ++d) {
    const Complex ex = field(r.u.space->nodes()[d]);
    err = std::max(err, std::abs(r.u.values[d] - ex));
    ref = std::max(ref, std::abs(ex));
  }
  EXPECT_LE(err / ref, 2e-2);
  for (int j = 0; j < 4; ++j) {
    const auto [e, f] = hsm::trace_l2_error(r.traces, j, [&](double s) { return exact_trace(p, s); });
    EXPECT_LE(e / f, 2e-2) << "side " << j;
  }
}

TEST(FemCoupling, TraceRowsAgreeWithDirichletSolver) {
  // with Sigma_a data taken from the coupled solution, the square solver gives the same free traces
  const WaveParams p = params();
  const auto m = mesh_ptr(0.2, hsm::DiskObstacle{{0.1, 0.05}, 0.35});
  const auto field = [&](Point2 x) { return Complex(std::cos(3.0 * x.x1), std::sin(2.0 * x.x2)); };
  const hsm::TraceGridSpec spec{3.0, 0.2, 2};
  const hsm::GeneralResult r = hsm::solve_general(p, spec, {}, m, {}, field);
  const hsm::TraceBasis& b = *r.traces.basis;
  hsm::BoundaryData g;
  for (int j = 0; j < 4; ++j) g.sides[j] = [&, j](double s) { return hsm::evaluate_trace(r.traces, j, s); };
  const hsm::DirichletResult d = hsm::solve_dirichlet(p, spec, {}, g);
  double scale = 0.0;
  for (const auto& c : r.traces.coeffs)
    for (const Complex& z : c) scale = std::max(scale, std::abs(z));
  for (int j = 0; j < 4; ++j)
    for (int dof : b.free_dofs()) EXPECT_LE(std::abs(d.traces.coeffs[j][dof] - r.traces.coeffs[j][dof]), 1e-9 * scale);
}

TEST(FemCoupling, SchurMatchesMonolithic) {
  const WaveParams p = params(kPi / 5.0);
  const auto m = mesh_ptr(0.2, hsm::TriangleObstacle{{Point2{-0.4, -0.3}, Point2{0.5, -0.2}, Point2{0.0, 0.45}}});
  hsm::MaterialField mat;
  mat.rho = {1.0, 1.7};
  const auto field = [&](Point2 x) { return -std::exp(Complex(0.0, p.k * x.x1)); };
  hsm::GeneralOptions mono;
  mono.solver = hsm::CoupledSolver::Monolithic;
  const auto r1 = hsm::solve_general(p, {3.0, 0.2, 2}, {}, m, mat, field);
  const auto r2 = hsm::solve_general(p, {3.0, 0.2, 2}, {}, m, mat, field, mono);
  EXPECT_LE(r1.residual, 1e-10);
  EXPECT_LE(r2.residual, 1e-10);
  for (std::size_t d = 0; d < r1.u.values.size(); ++d) EXPECT_LE(std::abs(r1.u.values[d] - r2.u.values[d]), 1e-9);
  for (int j = 0; j < 4; ++j)
    for (std::size_t d = 0; d < r1.traces.coeffs[j].size(); ++d)
      EXPECT_LE(std::abs(r1.traces.coeffs[j][d] - r2.traces.coeffs[j][d]), 1e-9);
}

TEST(FemCoupling, ZeroSourceGivesZeroAndLinearity) {
  const WaveParams p = params();
  const auto m = mesh_ptr(0.2);
  hsm::MaterialField zero;
  zero.rho = {1.0, 3.0};
  const auto r0 = hsm::solve_general(p, {3.0, 0.2, 1}, {}, m, zero, nullptr, {.fem_degree = 1});
  for (const Complex& z : r0.u.values) EXPECT_EQ(z, Complex(0.0, 0.0));

  hsm::MaterialField src = zero;
  src.f = [](Point2 x) { return Complex(std::exp(-10.0 * (x.x1 * x.x1 + x.x2 * x.x2)), 0.0); };
  const Complex alpha(0.4, -2.0);
  hsm::MaterialField src2 = src;
  src2.f = [&](Point2 x) { return alpha * src.f(x); };
  const auto r1 = hsm::solve_general(p, {3.0, 0.2, 1}, {}, m, src, nullptr, {.fem_degree = 1});
  const auto r2 = hsm::solve_general(p, {3.0, 0.2, 1}, {}, m, src2, nullptr, {.fem_degree = 1});
  double scale = 0.0;
  for (const Complex& z : r1.u.values) scale = std::max(scale, std::abs(z));
  EXPECT_GT(scale, 0.0);
  for (std::size_t d = 0; d < r1.u.values.size(); ++d)
    EXPECT_LE(std::abs(r2.u.values[d] - alpha * r1.u.values[d]), 1e-10 * std::abs(alpha) * scale);
}

TEST(FemCoupling, RejectsBadInput) {
  const WaveParams p = params(kPi / 3.0);
  const auto m = mesh_ptr(0.2);
  EXPECT_THROW(hsm::solve_general(p, {3.0, 0.2, 2}, {}, m, {}, nullptr), hsm::ConfigError);
  const WaveParams ok = params();
  const auto field = [](Point2) { return Complex(1.0, 0.0); };
  // obstacle data without an obstacle
  EXPECT_THROW(hsm::solve_general(ok, {3.0, 0.2, 2}, {}, m, {}, field), hsm::ConfigError);
  hsm::GeneralOptions mono;
  mono.solver = hsm::CoupledSolver::Monolithic;
  mono.monolithic_limit = 10;
  EXPECT_THROW(hsm::solve_general(ok, {3.0, 0.2, 2}, {}, m, {}, nullptr, mono), hsm::ConfigError);
  // mesh built for another Sigma_a
  WaveParams shifted = ok;
  shifted.a = 0.7;
  EXPECT_THROW(hsm::solve_general(shifted, {3.0, 0.2, 2}, {}, m, {}, nullptr), hsm::MeshError);
}
