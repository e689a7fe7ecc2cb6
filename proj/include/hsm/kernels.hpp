#pragma once

// Half-plane double-layer kernel h, the Dirichlet-to-Robin kernel lambda, and
// their compositions with the complex path. Every evaluator carries the
// exponential e^{ikR} analytically on top of the scaled Hankel function.

#include <complex>
#include <stdexcept>

#include "hsm/complex_special.hpp"
#include "hsm/scaling_geometry.hpp"

namespace hsm {

/// R landed on (or across) the branch cut: a caller evaluated outside the
/// region where the continuation is analytic.
class BranchError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Point outside the validity region of the requested representation.
class RegionError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace kernel_detail {

inline Complex checked_kr(Complex kr) {
  if (!(kr.real() > 0.0)) throw BranchError("kernel argument k*R left the half-plane Re > 0");
  return kr;
}

inline Complex exp_ikr(Complex kr) {
  // e^{ikR} = e^{-Im kR} e^{i Re kR}
  if (-kr.imag() > 700.0) throw std::overflow_error("kernel: e^{ikR} overflows");
  return std::polar(std::exp(-kr.imag()), kr.real());
}

}  // namespace kernel_detail

/// (i kc x1 / 2) H_1(kc R) / R for a possibly complex wavenumber kc.
inline Complex kernel_h_wavenumber(Complex kc, Complex x1, Complex z) {
  const Complex r = complex_distance(x1, z);
  const Complex kr = kernel_detail::checked_kr(kc * r);
  const Complex h1 = hankel1_scaled(1, kr) * kernel_detail::exp_ikr(kr);
  return 0.5 * kI * kc * x1 * h1 / r;
}

/// h(x1, z) = (i k x1 / 2) H_1(kR) / R, R = (x1^2 + z^2)^{1/2}.
inline Complex kernel_h(const WaveParams& p, Complex x1, Complex z) {
  return kernel_h_wavenumber(Complex(p.k, 0.0), x1, z);
}

/// lambda = d_1 h - i k h, in closed form.
inline Complex kernel_lambda(const WaveParams& p, Complex x1, Complex z) {
  const Complex r = complex_distance(x1, z);
  const Complex kr = kernel_detail::checked_kr(p.k * r);
  const auto hs = hankel1_scaled_012(kr);
  const Complex e = kernel_detail::exp_ikr(kr);
  const double k = p.k;
  const Complex bracket = (1.0 - kI * k * x1) * hs[1] - (k * x1 * x1 / r) * hs[2];
  return kI * k / (2.0 * r) * bracket * e;
}

/// Integrand of the scaled double-layer operator: h(tau(t)-a, a-tau(s)) tau'(s), t > a.
inline Complex kernel_Dtheta(const WaveParams& p, double t, double s) {
  if (!(t > p.a)) throw std::domain_error("kernel_Dtheta: test point must satisfy t > a");
  return kernel_h(p, tau(p, t) - p.a, p.a - tau(p, s)) * tau_prime(p, s);
}

/// Integrand of the Dirichlet-to-Robin operator on the outer side:
/// lambda(b-a, t-tau(s)) tau'(s), |t| <= b.
inline Complex kernel_Lambda_theta(const WaveParams& p, double t, double s) {
  return kernel_lambda(p, Complex(p.b - p.a, 0.0), t - tau(p, s)) * tau_prime(p, s);
}

/// Integrand of the deformed half-plane representation of branch j at p:
/// h(x1^j - a, x2^j - tau(s)) tau'(s).
inline Complex kernel_reconstruction(const WaveParams& p, int j, Point2 pt, double s) {
  if (!in_omega_theta(j, pt, p, p.theta))
    throw RegionError("kernel_reconstruction: point outside the validity region of branch " +
                      std::to_string(wrap_index(j)));
  const Point2 q = local_coords(j, pt);
  return kernel_h(p, Complex(q.x1 - p.a, 0.0), q.x2 - tau(p, s)) * tau_prime(p, s);
}

}  // namespace hsm
