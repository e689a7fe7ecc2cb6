#pragma once

// Complex scaling path, half-plane local coordinates and the validity regions
// of the deformed half-plane representations.

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hsm/complex_special.hpp"

namespace hsm {

/// Thrown when a configuration or parameter set violates its invariants.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Wavenumber k, inner half-width a, outer half-width b, scaling angle theta.
struct WaveParams {
  double k = 2.0 * std::numbers::pi;
  double a = 1.0;
  double b = 1.5;
  double theta = std::numbers::pi / 6.0;
};

/// Checks k > 0, a > 0, b > a and theta in (0, pi/2).
inline void validate(const WaveParams& p) {
  if (!(p.k > 0.0) || !std::isfinite(p.k)) throw ConfigError("wavenumber k must be positive");
  if (!(p.a > 0.0) || !std::isfinite(p.a)) throw ConfigError("half-width a must be positive");
  if (!(p.b > p.a) || !std::isfinite(p.b)) throw ConfigError("outer half-width b must exceed a");
  if (!(p.theta > 0.0 && p.theta < 0.5 * std::numbers::pi))
    throw ConfigError("scaling angle theta must lie in (0, pi/2)");
}

/// Stricter check for the coupled solver, which needs theta < pi/4.
inline void validate_general(const WaveParams& p) {
  validate(p);
  if (!(p.theta < 0.25 * std::numbers::pi))
    throw ConfigError("the coupled solver requires theta < pi/4");
}

struct Point2 {
  double x1 = 0.0;
  double x2 = 0.0;
};

/// Half-plane index arithmetic modulo 4.
inline int wrap_index(int j) { return ((j % 4) + 4) % 4; }

/// The bent path: identity on [-a, a], rotated by e^{i theta} outside.
inline Complex tau(const WaveParams& p, double s) {
  const Complex rot = std::polar(1.0, p.theta);
  if (s > p.a) return p.a + (s - p.a) * rot;
  if (s < -p.a) return -p.a + (s + p.a) * rot;
  return {s, 0.0};
}

/// Derivative of tau; the kinks at +-a take the outer value.
inline Complex tau_prime(const WaveParams& p, double s) {
  if (std::abs(s) >= p.a) return std::polar(1.0, p.theta);
  return {1.0, 0.0};
}

namespace geometry_detail {
// cos(j pi/2), sin(j pi/2) without rounding noise
inline std::array<int, 2> rotation(int j) {
  static constexpr int c[4] = {1, 0, -1, 0};
  static constexpr int s[4] = {0, 1, 0, -1};
  j = wrap_index(j);
  return {c[j], s[j]};
}
}  // namespace geometry_detail

/// Global point to the local coordinates (x1^j, x2^j) of half-plane j.
inline Point2 local_coords(int j, Point2 p) {
  const auto [c, s] = geometry_detail::rotation(j);
  return {c * p.x1 + s * p.x2, -s * p.x1 + c * p.x2};
}

/// Inverse of local_coords.
inline Point2 global_coords(int j, Point2 q) {
  const auto [c, s] = geometry_detail::rotation(j);
  return {c * q.x1 - s * q.x2, s * q.x1 + c * q.x2};
}

/// Principal branch, Arg in (-pi, pi]; the cut is approached from above.
inline Complex principal_sqrt(Complex z) {
  if (z.imag() == 0.0 && z.real() < 0.0) return {0.0, std::sqrt(-z.real())};
  return std::sqrt(z);
}

/// Analytic continuation of (w^2 + z^2)^{1/2}.
inline Complex complex_distance(Complex w, Complex z) { return principal_sqrt(w * w + z * z); }

/// Strict membership x1^j - a > (|x2^j| - a) tan(angle), shrunk by `margin`.
inline bool in_omega_theta(int j, Point2 p, const WaveParams& params, double angle,
                           double margin = 0.0) {
  if (!(angle > 0.0 && angle < 0.5 * std::numbers::pi))
    throw std::domain_error("in_omega_theta: angle must lie in (0, pi/2)");
  const Point2 q = local_coords(j, p);
  return q.x1 - params.a > (std::abs(q.x2) - params.a) * std::tan(angle) + margin;
}

}  // namespace hsm
