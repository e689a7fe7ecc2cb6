#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hsm {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int size() const { return static_cast<int>(nodes.size()); }
};

/// n-point Gauss-Legendre rule by Newton iteration on P_n, nodes ascending.
inline GaussRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: need at least one node");
  GaussRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 1.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = n * (z * p1 - p2) / (z * z - 1.0);
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // one more derivative evaluation at the converged root
    double p1 = 1.0, p2 = 0.0;
    for (int j = 1; j <= n; ++j) {
      const double p3 = p2;
      p2 = p1;
      p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
    }
    pp = n * (z * p1 - p2) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * pp * pp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

/// Nodes and weights of a rule mapped to [lo, hi].
struct MappedRule {
  std::vector<double> x;
  std::vector<double> w;
};

inline MappedRule map_rule(const GaussRule& rule, double lo, double hi) {
  MappedRule out;
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  out.x.resize(rule.nodes.size());
  out.w.resize(rule.nodes.size());
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    out.x[i] = mid + half * rule.nodes[i];
    out.w[i] = half * rule.weights[i];
  }
  return out;
}

/// Composite rule: [lo, hi] cut into panels of length <= step, `order` points each.
inline MappedRule composite_rule(double lo, double hi, double step, int order) {
  if (!(hi > lo)) return {};
  if (!(step > 0.0)) throw std::invalid_argument("composite_rule: step must be positive");
  const GaussRule base = gauss_legendre(order);
  const int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / step - 1e-12)));
  MappedRule out;
  out.x.reserve(static_cast<std::size_t>(panels) * order);
  out.w.reserve(static_cast<std::size_t>(panels) * order);
  const double width = (hi - lo) / panels;
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    const double b = (p + 1 == panels) ? hi : a + width;
    MappedRule piece = map_rule(base, a, b);
    out.x.insert(out.x.end(), piece.x.begin(), piece.x.end());
    out.w.insert(out.w.end(), piece.w.begin(), piece.w.end());
  }
  return out;
}

}  // namespace hsm
