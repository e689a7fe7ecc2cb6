#pragma once

// Hankel functions of the first kind H_0, H_1, H_2 at complex argument with
// Re(z) > 0, plus the exponentially scaled variant e^{-iz} H_n(z).
//
// Three evaluation branches are used:
//   |z| <  2.5  ascending series for J_n and Y_n
//   |z| <  17   Laplace-type integral for the scaled function, composite Gauss
//   |z| >= 17   Hankel asymptotic expansion, summed to its smallest term
// The series branch alone loses everything to cancellation in J + iY once
// Im(z) is large, which is exactly the regime the complex-scaled kernels live in.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

namespace hsm {

using Complex = std::complex<double>;

inline constexpr Complex kI{0.0, 1.0};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace special_detail {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr int kSeriesTermCap = 200;
inline constexpr double kSeriesLowerRadius = 2.5;
inline constexpr double kAsymptoticRadius = 17.0;

inline void check_order(int order) {
  if (order < 0 || order > 2)
    throw std::domain_error("hankel order must be 0, 1 or 2, got " + std::to_string(order));
}

inline void check_domain(Complex z) {
  if (!(z.real() > 0.0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw std::domain_error("hankel argument requires Re(z) > 0");
}

// Gauss-Legendre 10-point rule on [-1, 1] (positive half).
inline constexpr std::array<double, 5> kGl10Nodes = {
    0.1488743389816312108848260, 0.4333953941292471907992659, 0.6794095682990244062343274,
    0.8650633666889845107320967, 0.9739065285171717200779640};
inline constexpr std::array<double, 5> kGl10Weights = {
    0.2955242247147528701738930, 0.2692667193099963550912269, 0.2190863625159820439955349,
    0.1494513491505805931457763, 0.0666713443086881375935688};

// Scaled H_0, H_1 from
//   e^{-iz} H_nu(z) = sqrt(2/(pi z)) e^{-i(nu pi/2 + pi/4)} / Gamma(nu + 1/2)
//                     * int_0^inf e^{-u} u^{nu - 1/2} (1 + iu/(2z))^{nu - 1/2} du
// with u = v^2. The integrand is analytic on the real v axis for Re(z) > 0;
// singularities sit at v = +-sqrt(2iz).
inline std::pair<Complex, Complex> scaled_h01_laplace(Complex z) {
  const Complex c = kI / (2.0 * z);
  Complex int0{0.0, 0.0};
  Complex int1{0.0, 0.0};
  constexpr int kPanels = 6;
  constexpr double kWidth = 1.0;
  for (int p = 0; p < kPanels; ++p) {
    const double mid = (p + 0.5) * kWidth;
    const double half = 0.5 * kWidth;
    for (int i = 0; i < 5; ++i) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const double v = mid + sgn * half * kGl10Nodes[i];
        const double w = half * kGl10Weights[i];
        const double v2 = v * v;
        const double damp = std::exp(-v2) * w;
        const Complex base = 1.0 + c * v2;
        const Complex root = std::sqrt(base);
        int0 += damp / root;
        int1 += damp * v2 * root;
      }
    }
  }
  const Complex pre = std::sqrt(2.0 / (std::numbers::pi * z));
  const double sqrt_pi = std::sqrt(std::numbers::pi);
  const Complex phase0 = std::exp(Complex(0.0, -std::numbers::pi / 4.0));
  const Complex phase1 = std::exp(Complex(0.0, -3.0 * std::numbers::pi / 4.0));
  const Complex h0 = pre * phase0 * (2.0 * int0 / sqrt_pi);
  const Complex h1 = pre * phase1 * (2.0 * int1 / (0.5 * sqrt_pi));
  return {h0, h1};
}

// Scaled H_nu by the Hankel asymptotic expansion, nu in {0, 1, 2}.
inline Complex scaled_asymptotic(int order, Complex z) {
  const double mu = 4.0 * order * order;
  Complex sum{1.0, 0.0};
  Complex term{1.0, 0.0};
  double last = 1.0;
  for (int k = 1; k < 80; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= kI * (mu - odd * odd) / (8.0 * k * z);
    const double mag = std::abs(term);
    if (mag > last) break;
    sum += term;
    last = mag;
    if (mag < 1e-17 * std::abs(sum)) break;
  }
  const Complex pre = std::sqrt(2.0 / (std::numbers::pi * z));
  const Complex phase =
      std::exp(Complex(0.0, -(order * std::numbers::pi / 2.0 + std::numbers::pi / 4.0)));
  return pre * phase * sum;
}

}  // namespace special_detail

/// Ascending series for (J_order(z), Y_order(z)), order in {0,1,2}.
///
/// Intended for |z| <= series_radius (12); beyond that the alternating terms
/// cancel too heavily to be trusted. Throws ConvergenceError if the terms have
/// not dropped below tolerance within 200 terms.
inline std::pair<Complex, Complex> bessel_jy_series(int order, Complex z) {
  special_detail::check_order(order);
  if (z == Complex(0.0, 0.0))
    throw std::domain_error("bessel_jy_series: Y is singular at z = 0");
  const int n = order;
  const Complex half = 0.5 * z;
  const Complex q = -half * half;

  // (z/2)^n / n!
  Complex lead{1.0, 0.0};
  for (int i = 1; i <= n; ++i) lead *= half / static_cast<double>(i);

  // psi(m + 1) = -gamma + H_m
  auto psi1 = [](int m) {
    double h = 0.0;
    for (int i = 1; i <= m; ++i) h += 1.0 / i;
    return -special_detail::kEulerGamma + h;
  };

  Complex term = lead;  // (-1)^k (z/2)^{2k+n} / (k! (k+n)!)
  Complex jsum = term;
  Complex ysum = (psi1(0) + psi1(n)) * term;
  double hk = 0.0;   // H_k
  double hkn = 0.0;  // H_{k+n}
  for (int i = 1; i <= n; ++i) hkn += 1.0 / i;
  bool converged = false;
  for (int k = 1; k < special_detail::kSeriesTermCap; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k + n));
    hk += 1.0 / k;
    hkn += 1.0 / (k + n);
    jsum += term;
    const Complex yterm = (2.0 * -special_detail::kEulerGamma + hk + hkn) * term;
    ysum += yterm;
    if (std::abs(term) <= 1e-17 * std::abs(jsum) && std::abs(yterm) <= 1e-17 * std::abs(ysum)) {
      converged = true;
      break;
    }
  }
  if (!converged)
    throw ConvergenceError("bessel_jy_series: no convergence within 200 terms");

  // Finite part: sum_{k=0}^{n-1} (n-k-1)!/k! (z/2)^{2k-n}
  Complex finite{0.0, 0.0};
  for (int k = 0; k < n; ++k) {
    double fac = 1.0;
    for (int i = 2; i <= n - k - 1; ++i) fac *= i;
    double kf = 1.0;
    for (int i = 2; i <= k; ++i) kf *= i;
    finite += (fac / kf) * std::pow(half, 2 * k - n);
  }
  const double inv_pi = 1.0 / std::numbers::pi;
  const Complex y = 2.0 * inv_pi * jsum * std::log(half) - inv_pi * finite - inv_pi * ysum;
  return {jsum, y};
}

/// e^{-iz} H^{(1)}_order(z) for Re(z) > 0. Bounded by ~|z|^{-1/2} away from 0,
/// so it never overflows for large Im(z).
inline Complex hankel1_scaled(int order, Complex z) {
  special_detail::check_order(order);
  special_detail::check_domain(z);
  const double r = std::abs(z);
  if (r >= special_detail::kAsymptoticRadius) return special_detail::scaled_asymptotic(order, z);

  // Distance of the Laplace-integrand singularities from the real axis.
  const double sing = std::abs(std::sqrt(2.0 * kI * z).imag());
  if (r >= special_detail::kSeriesLowerRadius && sing >= 1.0) {
    auto [h0, h1] = special_detail::scaled_h01_laplace(z);
    if (order == 0) return h0;
    if (order == 1) return h1;
    return (2.0 / z) * h1 - h0;
  }
  auto [j, y] = bessel_jy_series(order, z);
  return std::exp(-kI * z) * (j + kI * y);
}

/// H^{(1)}_order(z) = J_order(z) + i Y_order(z) for Re(z) > 0.
/// Throws std::overflow_error when e^{-Im z} leaves double range; use
/// hankel1_scaled in that case.
inline Complex hankel1(int order, Complex z) {
  special_detail::check_domain(z);
  if (-z.imag() > 700.0)
    throw std::overflow_error("hankel1: result overflows, use hankel1_scaled");
  return std::exp(kI * z) * hankel1_scaled(order, z);
}

/// Scaled H_0, H_1, H_2 evaluated together (shares the expensive branch work).
inline std::array<Complex, 3> hankel1_scaled_012(Complex z) {
  special_detail::check_domain(z);
  const double r = std::abs(z);
  Complex h0, h1;
  if (r >= special_detail::kAsymptoticRadius) {
    h0 = special_detail::scaled_asymptotic(0, z);
    h1 = special_detail::scaled_asymptotic(1, z);
  } else {
    const double sing = std::abs(std::sqrt(2.0 * kI * z).imag());
    if (r >= special_detail::kSeriesLowerRadius && sing >= 1.0) {
      std::tie(h0, h1) = special_detail::scaled_h01_laplace(z);
    } else {
      const Complex e = std::exp(-kI * z);
      auto [j0, y0] = bessel_jy_series(0, z);
      auto [j1, y1] = bessel_jy_series(1, z);
      h0 = e * (j0 + kI * y0);
      h1 = e * (j1 + kI * y1);
    }
  }
  return {h0, h1, (2.0 / z) * h1 - h0};
}

}  // namespace hsm
