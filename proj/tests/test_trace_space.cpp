#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "hsm/complex_special.hpp"
#include "hsm/linalg.hpp"
#include "hsm/trace_space.hpp"

using hsm::Complex;
using hsm::TraceBasis;
using hsm::TraceGridSpec;

namespace {
constexpr double kPi = std::numbers::pi;

double l2_error_on(const hsm::TraceVector& v, int j, const std::function<Complex(double)>& f, double lo,
                   double hi) {
  const auto r = hsm::composite_rule(lo, hi, 0.01, 8);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.x.size(); ++i) acc += r.w[i] * std::norm(hsm::evaluate_trace(v, j, r.x[i]) - f(r.x[i]));
  return std::sqrt(acc);
}
}  // namespace

TEST(TraceSpace, Counting) {
  const TraceBasis b = hsm::build_space({5.0, 0.1, 1}, 1.0);
  EXPECT_EQ(b.element_count(), 100);
  EXPECT_EQ(b.dof_count(), 101);
  EXPECT_EQ(b.constrained_dofs().size(), 21u);
  for (int d : b.constrained_dofs()) EXPECT_LE(std::abs(b.nodes()[d]), 1.0 + 1e-12);
  for (int d : b.free_dofs()) EXPECT_GT(std::abs(b.nodes()[d]), 1.0);
  for (int q = 1; q <= 3; ++q) {
    const TraceBasis bq = hsm::build_space({2.6, 0.07, q}, 1.0);
    EXPECT_EQ(bq.dof_count(), bq.element_count() * q + 1);
  }
  EXPECT_THROW(hsm::build_space({1.0, 0.1, 1}, 1.0), hsm::ConfigError);
  EXPECT_THROW(hsm::build_space({2.0, 0.1, 4}, 1.0), hsm::ConfigError);
  EXPECT_THROW(hsm::build_space({2.0, 0.0, 1}, 1.0), hsm::ConfigError);
}

TEST(TraceSpace, IncommensurateSpacingAdjusted) {
  const TraceBasis b = hsm::build_space({2.6, 0.07, 2}, 1.0);
  EXPECT_LE(b.h_outer(), 0.07);
  EXPECT_LE(b.h_inner(), 0.07);
  bool has_a = false, has_ma = false;
  for (double x : b.nodes()) {
    has_a |= x == 1.0;
    has_ma |= x == -1.0;
  }
  EXPECT_TRUE(has_a && has_ma);
  EXPECT_EQ(b.nodes().front(), -2.6);
  EXPECT_EQ(b.nodes().back(), 2.6);
  for (int d = 0; d < b.dof_count(); ++d) EXPECT_EQ(b.nodes()[b.reflect(d)], -b.nodes()[d]);
  for (int d = 1; d < b.dof_count(); ++d) EXPECT_GT(b.nodes()[d], b.nodes()[d - 1]);
}

TEST(TraceSpace, PartitionOfUnityAndPolynomialReproduction) {
  std::mt19937_64 rng(1);
  for (int q = 1; q <= 3; ++q) {
    const TraceBasis b = hsm::build_space({3.0, 0.13, q}, 0.8);
    hsm::TraceVector one(b), poly(b);
    auto p = [q](double s) { return std::pow(s, q) - 0.5 * s + 0.25; };
    for (int d = 0; d < b.dof_count(); ++d) {
      one.coeffs[0][d] = 1.0;
      poly.coeffs[2][d] = p(b.nodes()[d]);
    }
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 1000; ++i) {
      const double t = u(rng);
      EXPECT_NEAR(std::abs(hsm::evaluate_trace(one, 0, t) - 1.0), 0.0, 1e-13);
      EXPECT_NEAR(std::abs(hsm::evaluate_trace(poly, 2, t) - p(t)), 0.0, 1e-12);
    }
    for (int d = 0; d < b.dof_count(); ++d)
      EXPECT_EQ(hsm::evaluate_trace(poly, 2, b.nodes()[d]), poly.coeffs[2][d]) << q << " " << d;
    EXPECT_EQ(hsm::evaluate_trace(one, 0, 3.01), Complex(0.0, 0.0));
    EXPECT_EQ(hsm::evaluate_trace(one, 0, -7.0), Complex(0.0, 0.0));
  }
}

TEST(TraceSpace, ConstantDataInterpolation) {
  const TraceBasis b = hsm::build_space({3.0, 0.1, 2}, 1.0);
  hsm::BoundaryData g;
  for (auto& s : g.sides) s = [](double) { return Complex(1.0, 0.0); };
  const hsm::TraceVector v = hsm::interpolate_boundary_data(b, g);
  for (int j = 0; j < 4; ++j)
    for (int d = 0; d < b.dof_count(); ++d)
      EXPECT_EQ(v.coeffs[j][d], b.constrained_mask()[d] ? Complex(1.0, 0.0) : Complex(0.0, 0.0));
}

TEST(TraceSpace, HankelTraceInterpolationRate) {
  const double k = 2 * kPi, a = 1.0;
  auto u = [k](hsm::Point2 x) { return 0.25 * hsm::kI * hsm::hankel1(0, Complex(k * std::hypot(x.x1, x.x2), 0.0)); };
  const hsm::BoundaryData g = hsm::boundary_data_from_field(a, u);
  for (int q = 1; q <= 3; ++q) {
    std::vector<double> err;
    for (double h : {0.1, 0.05, 0.025}) {
      const TraceBasis b = hsm::build_space({2.0, h, q}, a);
      const hsm::TraceVector v = hsm::interpolate_boundary_data(b, g);
      err.push_back(l2_error_on(v, 1, g.sides[1], -a, a));
    }
    const double rate = std::log2(err[1] / err[2]);
    EXPECT_NEAR(rate, q + 1, 0.2 * (q + 1)) << "q=" << q;
    // corner values shared exactly between adjacent sides
    const TraceBasis b = hsm::build_space({2.0, 0.1, q}, a);
    const hsm::TraceVector v = hsm::interpolate_boundary_data(b, g);
    const int right = b.constrained_dofs().back();
    const int left = b.constrained_dofs().front();
    for (int j = 0; j < 4; ++j) EXPECT_EQ(v.coeffs[j][right], v.coeffs[(j + 1) % 4][left]);
  }
}

TEST(TraceSpace, ProjectionVariant) {
  const TraceBasis b = hsm::build_space({2.0, 0.05, 2}, 1.0);
  hsm::BoundaryData g;
  for (auto& s : g.sides) s = [](double t) { return Complex(std::cos(3 * t), t * t); };
  const hsm::TraceVector vi = hsm::interpolate_boundary_data(b, g);
  const hsm::TraceVector vp = hsm::interpolate_boundary_data(b, g, true);
  const double ei = l2_error_on(vi, 0, g.sides[0], -1.0, 1.0);
  const double ep = l2_error_on(vp, 0, g.sides[0], -1.0, 1.0);
  EXPECT_LT(ep, ei * 1.01);
  EXPECT_LT(ep, 1e-4);
}

TEST(TraceSpace, CornerMismatchRejected) {
  const TraceBasis b = hsm::build_space({2.0, 0.1, 1}, 1.0);
  hsm::BoundaryData g;
  for (int j = 0; j < 4; ++j) g.sides[j] = [j](double) { return Complex(j, 0.0); };
  EXPECT_THROW(hsm::interpolate_boundary_data(b, g), hsm::ConfigError);
}

TEST(TraceSpace, MassMatrix) {
  const TraceBasis b = hsm::build_space({3.0, 0.1, 1}, 1.0);
  const auto m = hsm::mass_matrix(b);
  const int n = b.dof_count();
  const double h = 0.1;
  for (int i = 1; i + 1 < n; ++i) {
    EXPECT_NEAR(m[i * n + i], 2 * h / 3, 1e-14);
    EXPECT_NEAR(m[i * n + i + 1], h / 6, 1e-14);
    if (i + 2 < n) EXPECT_EQ(m[i * n + i + 2], 0.0);
  }
  for (int q = 1; q <= 3; ++q) {
    const TraceBasis bq = hsm::build_space({1.6, 0.1, q}, 0.5);
    const int nq = bq.dof_count();
    const auto mq = hsm::mass_matrix(bq);
    // symmetry and row sums = integral of each basis function
    hsm::TraceVector e(bq);
    for (int i = 0; i < nq; ++i) {
      double row = 0.0;
      for (int j = 0; j < nq; ++j) {
        EXPECT_EQ(mq[i * nq + j], mq[j * nq + i]);
        row += mq[i * nq + j];
      }
      const auto r = hsm::composite_rule(-1.6, 1.6, 0.05, 6);
      e.coeffs[0].assign(nq, 0.0);
      e.coeffs[0][i] = 1.0;
      double integral = 0.0;
      for (std::size_t k = 0; k < r.x.size(); ++k) integral += r.w[k] * hsm::evaluate_trace(e, 0, r.x[k]).real();
      EXPECT_NEAR(row, integral, 1e-13);
    }
    const auto ev = hsm::symmetric_eigenvalues(mq, nq);
    const double hh = bq.h_outer();
    EXPECT_GT(ev.front(), 0.01 * hh) << q;
    EXPECT_LT(ev.back(), 1.5 * hh) << q;
  }
}

TEST(TraceSpace, ConstrainedSubspaceVanishesInside) {
  const TraceBasis b = hsm::build_space({3.0, 0.1, 3}, 1.0);
  hsm::TraceVector v(b);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int d = 0; d < b.dof_count(); ++d)
    if (!b.constrained_mask()[d]) v.coeffs[1][d] = Complex(g(rng), g(rng));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 1000; ++i) EXPECT_EQ(hsm::evaluate_trace(v, 1, u(rng)), Complex(0.0, 0.0));
  // L^2 splits over (-inf,-a), (-a,a), (a,inf)
  for (int d = 0; d < b.dof_count(); ++d) v.coeffs[1][d] += Complex(0.3, -0.1);
  const double total = hsm::trace_norm_sq(v, 1);
  const double parts = hsm::trace_norm_sq(v, 1, -INFINITY, -1.0) + hsm::trace_norm_sq(v, 1, -1.0, 1.0) +
                       hsm::trace_norm_sq(v, 1, 1.0, INFINITY);
  EXPECT_NEAR(parts, total, 1e-12 * total);
}

// L^2 projection of e^{-alpha|s|} 1_{|s|>a} onto V_h improves with h and T.
TEST(TraceSpace, ApproximationProperty) {
  const double a = 1.0, alpha = 2.0;
  auto f = [&](double s) { return std::abs(s) > a ? std::exp(-alpha * std::abs(s)) : 0.0; };
  auto proj_err = [&](double T, double h) {
    const TraceBasis b = hsm::build_space({T, h, 1}, a);
    const int n = b.dof_count();
    const auto m = hsm::mass_matrix(b);
    const auto l = hsm::cholesky(m, n);
    std::vector<double> rhs(n, 0.0);
    const hsm::GaussRule rule = hsm::gauss_legendre(8);
    for (const auto& el : b.elements()) {
      const auto mr = hsm::map_rule(rule, el.lo, el.hi);
      double phi[2];
      for (std::size_t k = 0; k < mr.x.size(); ++k) {
        hsm::lagrange_values(1, (mr.x[k] - el.lo) / (el.hi - el.lo), phi);
        for (int d = 0; d < 2; ++d) rhs[el.first_dof + d] += mr.w[k] * phi[d] * f(mr.x[k]);
      }
    }
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < i; ++k) rhs[i] -= l[i * n + k] * rhs[k];
      rhs[i] /= l[i * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
      for (int k = i + 1; k < n; ++k) rhs[i] -= l[k * n + i] * rhs[k];
      rhs[i] /= l[i * n + i];
    }
    hsm::TraceVector v(b);
    for (int d = 0; d < n; ++d) v.coeffs[0][d] = rhs[d];
    return l2_error_on(v, 0, [&](double s) { return Complex(f(s), 0.0); }, -T - 2.0, T + 2.0) +
           std::sqrt(std::exp(-2 * alpha * (T + 2.0)) / alpha);
  };
  double prev = INFINITY;
  for (double h : {0.2, 0.1, 0.05, 0.025}) {
    const double e = proj_err(4.0, h);
    EXPECT_LT(e, prev);
    prev = e;
  }
  prev = INFINITY;
  for (double T : {1.5, 2.0, 3.0, 4.0}) {
    const double e = proj_err(T, 0.05);
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(TraceSpace, CsvLayout) {
  const TraceBasis b = hsm::build_space({2.0, 0.5, 1}, 1.0);
  hsm::TraceVector v(b);
  v.coeffs[3][0] = Complex(1.5, -2.0);
  std::ostringstream os;
  hsm::write_traces_csv(os, v);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "j,s_node,Re,Im");
  EXPECT_NE(s.find("3,-2,1.5,-2\n"), std::string::npos);
  int lines = 0;
  for (char c : s) lines += c == '\n';
  EXPECT_EQ(lines, 1 + 4 * b.dof_count());
}
