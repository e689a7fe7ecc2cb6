#pragma once

// Parameter sweeps and reference experiments shared by the driver and the
// acceptance suite.

#include <chrono>
#include <cmath>
#include <vector>

#include "hsm/postprocess.hpp"

namespace hsm {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Square problem with the trace of amplitude * H_0(k|x|) as data.
inline DirichletResult solve_hankel_square(const WaveParams& p, const TraceGridSpec& spec, const QuadratureSpec& quad,
                                           const DirichletOptions& opt, Complex amplitude) {
  const BoundaryData g =
      boundary_data_from_field(p.a, [=](Point2 x) { return exact_hankel_solution(p, x, amplitude); });
  return solve_dirichlet(p, spec, quad, g, opt);
}

struct StudyPoint {
  double param = 0.0;
  double error = 0.0;  // absolute L^2(R) error of phi^0
  int unknowns = 0;
  double seconds = 0.0;
};

/// Error of phi^0 against the exact scaled trace for each truncation T.
inline std::vector<StudyPoint> truncation_study(const WaveParams& p, double h, int q, const std::vector<double>& Ts,
                                                const QuadratureSpec& quad, const DirichletOptions& opt,
                                                Complex amplitude) {
  std::vector<StudyPoint> rows;
  for (double T : Ts) {
    const auto t0 = std::chrono::steady_clock::now();
    const DirichletResult r = solve_hankel_square(p, {T, h, q}, quad, opt, amplitude);
    const double err =
        trace_error_full_line(r.traces, 0, [&](double s) { return exact_hankel_trace(p, s, amplitude); }, p);
    rows.push_back({T, err, r.unknowns, seconds_since(t0)});
  }
  return rows;
}

/// Least-squares slope of log10(error) against the parameter over [lo, hi].
inline double fit_log10_slope(const std::vector<StudyPoint>& rows, double lo, double hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (const StudyPoint& r : rows) {
    if (r.param < lo - 1e-12 || r.param > hi + 1e-12 || !(r.error > 0.0)) continue;
    const double y = std::log10(r.error);
    sx += r.param;
    sy += y;
    sxx += r.param * r.param;
    sxy += r.param * y;
    ++n;
  }
  if (n < 2) throw ConfigError("slope fit: fewer than two study points inside the fit window");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct FarFieldPoint {
  double theta = 0.0;
  double T = 0.0;
  std::array<Complex, 4> F{};
  double error = 0.0;  // max_j |F_j - exact|
  int unknowns = 0;
  double seconds = 0.0;
};

/// Axis far fields of the Hankel square problem against the exact value.
inline FarFieldPoint hankel_far_field(const WaveParams& p, const TraceGridSpec& spec, const QuadratureSpec& quad,
                                      const DirichletOptions& opt, Complex amplitude) {
  const auto t0 = std::chrono::steady_clock::now();
  const DirichletResult r = solve_hankel_square(p, spec, quad, opt, amplitude);
  FarFieldPoint out{p.theta, spec.T, {}, 0.0, r.unknowns, 0.0};
  const Complex ref = exact_hankel_far_field(p, amplitude);
  for (int j = 0; j < 4; ++j) {
    out.F[j] = far_field_axis(r.traces, j, p);
    out.error = std::max(out.error, std::abs(out.F[j] - ref));
  }
  out.seconds = seconds_since(t0);
  return out;
}

struct ScatteringResult {
  GeneralResult solution;
  MieDisk reference;
  std::array<Complex, 4> F{};
  std::array<Complex, 4> F_mie{};
  double far_rel_max = 0.0;
  double overlap_rel = 0.0;  // FE field vs branch representation between Sigma_a and Sigma_b
  double seconds = 0.0;
};

/// Points on the square |x|_inf = (a + b) / 2, each inside some Omega^j_theta.
inline std::vector<Point2> overlap_points(const WaveParams& p, int per_side = 9) {
  const double c = 0.5 * (p.a + p.b);
  std::vector<Point2> pts;
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < per_side; ++i) {
      const double s = -0.9 * c + 1.8 * c * i / (per_side - 1);
      pts.push_back(global_coords(j, {c, s}));
    }
  return pts;
}

/// Relative discrete L^2 gap between the FE field and the branch representation.
inline double fem_trace_overlap(const GeneralResult& r, const WaveParams& p, const QuadratureSpec& quad) {
  const TriangleLocator loc(r.u.space->mesh());
  double e2 = 0.0, r2 = 0.0;
  for (const Point2& x : overlap_points(p)) {
    const auto [t, bc] = loc.locate(x);
    if (t < 0) throw MeshError("overlap check: point outside the FE mesh");
    int j = 0;
    while (j < 4 && !in_omega_theta(j, x, p, p.theta)) ++j;
    if (j == 4) continue;
    const Complex uf = fem_value(r.u, t, bc);
    const Complex ub = reconstruct_point(r.traces, j, x, p, quad);
    e2 += std::norm(uf - ub);
    r2 += std::norm(uf);
  }
  return r2 > 0.0 ? std::sqrt(e2 / r2) : std::sqrt(e2);
}

/// Sound-soft disk hit by a plane wave; compares axis far fields with the Mie series.
inline ScatteringResult disk_scattering(const WaveParams& p, const TraceGridSpec& spec, const QuadratureSpec& quad,
                                        const MeshSpec& mesh_spec, double incidence, const GeneralOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!mesh_spec.obstacle || !std::holds_alternative<DiskObstacle>(*mesh_spec.obstacle))
    throw ConfigError("disk scattering: the mesh needs a disk obstacle");
  const DiskObstacle disk = std::get<DiskObstacle>(*mesh_spec.obstacle);
  ScatteringResult out;
  out.reference.k = p.k;
  out.reference.radius = disk.radius;
  out.reference.center = disk.center;
  out.reference.incidence = incidence;
  const auto mesh = std::make_shared<const Mesh2D>(build_mesh(mesh_spec));
  const MieDisk& m = out.reference;
  out.solution = solve_general(p, spec, quad, mesh, {}, [&](Point2 x) { return -mie_incident(m, x); }, opt);
  for (int j = 0; j < 4; ++j) {
    out.F[j] = far_field_axis(out.solution.traces, j, p);
    out.F_mie[j] = mie_far_field(m, j * 0.5 * std::numbers::pi);
    out.far_rel_max = std::max(out.far_rel_max, std::abs(out.F[j] - out.F_mie[j]) / std::abs(out.F_mie[j]));
  }
  out.overlap_rel = fem_trace_overlap(out.solution, p, quad);
  out.seconds = seconds_since(t0);
  return out;
}

}  // namespace hsm
