#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "hsm/acceptance.hpp"
#include "hsm/config.hpp"

namespace fs = std::filesystem;

namespace {

using hsm::Complex;
using hsm::Json;
using hsm::RunConfig;

enum ExitCode { kOk = 0, kFailed = 1, kConfig = 2, kNumerical = 3, kMesh = 4 };

Json complex_json(Complex z) { return Json::array({z.real(), z.imag()}); }

void write_json(const fs::path& path, const Json& j) {
  std::ofstream os(path);
  if (!os) throw hsm::ConfigError("cannot write " + path.string());
  os << j.dump(2) << "\n";
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw hsm::ConfigError("cannot write " + path.string());
  return os;
}

hsm::MieDisk incident_wave(const RunConfig& c) {
  hsm::MieDisk m;
  m.k = c.wave.k;
  m.incidence = c.incidence;
  if (c.mesh.obstacle && std::holds_alternative<hsm::DiskObstacle>(*c.mesh.obstacle)) {
    const auto& d = std::get<hsm::DiskObstacle>(*c.mesh.obstacle);
    m.center = d.center;
    m.radius = d.radius;
  }
  return m;
}

/// Dirichlet data on the square or the obstacle; a plane wave enters as -u^i.
std::function<Complex(hsm::Point2)> boundary_field(const RunConfig& c) {
  const hsm::WaveParams p = c.wave;
  switch (c.data) {
    case hsm::DataKind::HankelTrace:
      return [p, amp = c.amplitude](hsm::Point2 x) { return hsm::exact_hankel_solution(p, x, amp); };
    case hsm::DataKind::PlaneWave:
      return [m = incident_wave(c)](hsm::Point2 x) { return -hsm::mie_incident(m, x); };
    case hsm::DataKind::Constant:
      return [v = c.constant](hsm::Point2) { return v; };
    case hsm::DataKind::None:
      break;
  }
  return [](hsm::Point2) { return Complex(0.0, 0.0); };
}

bool mie_reference(const RunConfig& c) {
  if (c.problem != hsm::ProblemKind::General || c.data != hsm::DataKind::PlaneWave || !c.mesh_file.empty()) return false;
  if (!c.mesh.obstacle || !std::holds_alternative<hsm::DiskObstacle>(*c.mesh.obstacle)) return false;
  for (double r : c.rho)
    if (r != 1.0) return false;
  return c.source_kind == "none";
}

bool hankel_reference(const RunConfig& c) {
  return c.problem == hsm::ProblemKind::DirichletSquare && c.data == hsm::DataKind::HankelTrace;
}

struct Solution {
  hsm::TraceVector traces;
  std::optional<hsm::GeneralResult> general;
  Json report;
};

Solution solve(const RunConfig& c) {
  Solution s;
  Json& r = s.report;
  if (c.problem == hsm::ProblemKind::DirichletSquare) {
    const hsm::BoundaryData g = hsm::boundary_data_from_field(c.wave.a, boundary_field(c));
    const hsm::DirichletResult d = hsm::solve_dirichlet(c.wave, c.trace, c.quad, g, c.dirichlet);
    s.traces = d.traces;
    r["unknowns"] = d.unknowns;
    r["residual"] = d.residual;
    r["assembly_seconds"] = d.assembly_seconds;
    r["solve_seconds"] = d.solve_seconds;
    if (hankel_reference(c)) {
      Json errs = Json::array();
      for (int j = 0; j < 4; ++j)
        errs.push_back(hsm::trace_error_full_line(
            d.traces, j, [&](double t) { return hsm::exact_hankel_trace(c.wave, t, c.amplitude); }, c.wave));
      r["trace_l2_error"] = errs;
    }
  } else {
    std::shared_ptr<const hsm::Mesh2D> mesh;
    if (c.mesh_file.empty()) {
      mesh = std::make_shared<const hsm::Mesh2D>(hsm::build_mesh(c.mesh));
    } else {
      std::ifstream is(c.mesh_file);
      mesh = std::make_shared<const hsm::Mesh2D>(hsm::read_mesh(is));
    }
    hsm::MaterialField mat;
    mat.rho = c.rho;
    if (c.source_kind == "gaussian")
      mat.f = [ctr = c.source_center, w = c.source_width, amp = c.source_amplitude](hsm::Point2 x) {
        const double dx = x.x1 - ctr.x1, dy = x.x2 - ctr.x2;
        return amp * std::exp(-(dx * dx + dy * dy) / (w * w));
      };
    if (!mesh->has_obstacle() && c.data != hsm::DataKind::None)
      throw hsm::ConfigError("data.kind must be none for a mesh without an obstacle");
    std::function<Complex(hsm::Point2)> g;
    if (mesh->has_obstacle()) g = boundary_field(c);
    s.general = hsm::solve_general(c.wave, c.trace, c.quad, mesh, mat, g, c.general);
    s.traces = s.general->traces;
    r["fem_unknowns"] = s.general->fem_unknowns;
    r["trace_unknowns"] = s.general->trace_unknowns;
    r["residual"] = s.general->residual;
    r["assembly_seconds"] = s.general->assembly_seconds;
    r["solve_seconds"] = s.general->solve_seconds;
    r["fe_trace_overlap_rel"] = hsm::fem_trace_overlap(*s.general, c.wave, c.quad);
  }
  Json far = Json::array();
  double far_err = 0.0;
  for (int j = 0; j < 4; ++j) {
    const Complex f = hsm::far_field_axis(s.traces, j, c.wave);
    Json e{{"j", j}, {"F", complex_json(f)}};
    if (hankel_reference(c)) {
      const Complex ref = hsm::exact_hankel_far_field(c.wave, c.amplitude);
      e["F_exact"] = complex_json(ref);
      far_err = std::max(far_err, std::abs(f - ref));
    } else if (mie_reference(c)) {
      const Complex ref = hsm::mie_far_field(incident_wave(c), j * 0.5 * std::numbers::pi);
      e["F_mie"] = complex_json(ref);
      far_err = std::max(far_err, std::abs(f - ref) / std::abs(ref));
    }
    far.push_back(e);
  }
  r["far_field"] = far;
  if (hankel_reference(c)) r["far_field_abs_error_max"] = far_err;
  if (mie_reference(c)) r["far_field_rel_error_max_vs_mie"] = far_err;
  return s;
}

/// Error measure used by sweeps: full-line trace error or far field against Mie.
double reference_error(const RunConfig& c, const Solution& s) {
  if (hankel_reference(c)) return s.report["trace_l2_error"][0].get<double>();
  if (mie_reference(c)) return s.report["far_field_rel_error_max_vs_mie"].get<double>();
  throw hsm::ConfigError("study needs a reference: hankel-trace data on the square or a plane wave on a disk");
}

void write_traces(const fs::path& dir, const hsm::TraceVector& v) {
  std::ofstream os = open_out(dir / "traces.csv");
  hsm::write_traces_csv(os, v);
}

int cmd_solve(const RunConfig& c, const fs::path& out, bool general) {
  if ((c.problem == hsm::ProblemKind::General) != general)
    throw hsm::ConfigError(std::string("problem must be ") + (general ? "general" : "dirichlet-square") +
                           " for this command");
  const auto t0 = std::chrono::steady_clock::now();
  Solution s = solve(c);
  s.report["total_seconds"] = hsm::seconds_since(t0);
  write_traces(out, s.traces);
  if (s.general) {
    std::ofstream os = open_out(out / "u_b.vtk");
    hsm::write_fem_vtk(os, s.general->u);
    std::ofstream ms = open_out(out / "mesh.hsm");
    hsm::write_mesh(ms, s.general->u.space->mesh());
  }
  write_json(out / "report.json", s.report);
  std::cout << s.report.dump(2) << "\n";
  return kOk;
}

std::vector<double> angles(const RunConfig& c) {
  return c.study.angles.empty() ? std::vector<double>{c.wave.theta} : c.study.angles;
}

int cmd_farfield(RunConfig c, const fs::path& out) {
  if (c.study.param != "T") throw hsm::ConfigError("farfield sweeps study.param = T");
  std::ofstream os = open_out(out / "farfield.csv");
  os.precision(17);
  os << "theta,T,j,Re,Im,error,unknowns\n";
  for (double theta : angles(c)) {
    c.wave.theta = theta;
    for (double T : c.study.values) {
      c.trace.T = T;
      const auto t0 = std::chrono::steady_clock::now();
      const Solution s = solve(c);
      const double sec = hsm::seconds_since(t0);
      const int unknowns = s.general ? s.general->fem_unknowns + s.general->trace_unknowns
                                     : s.report["unknowns"].get<int>();
      for (int j = 0; j < 4; ++j) {
        const Json& e = s.report["far_field"][j];
        const Complex f(e["F"][0].get<double>(), e["F"][1].get<double>());
        double err = std::nan("");
        if (e.contains("F_exact")) err = std::abs(f - Complex(e["F_exact"][0].get<double>(), e["F_exact"][1].get<double>()));
        if (e.contains("F_mie")) {
          const Complex m(e["F_mie"][0].get<double>(), e["F_mie"][1].get<double>());
          err = std::abs(f - m) / std::abs(m);
        }
        os << theta << "," << T << "," << j << "," << f.real() << "," << f.imag() << "," << err << "," << unknowns << "\n";
      }
      const Json& e0 = s.report["far_field"][0]["F"];
      std::cout << "theta=" << theta << " T=" << T << " F_0=" << e0[0].get<double>() << (e0[1].get<double>() < 0 ? "" : "+")
                << e0[1].get<double>() << "i (" << sec << " s)\n";
    }
  }
  return kOk;
}

int cmd_study(RunConfig c, const fs::path& out) {
  std::ofstream os = open_out(out / "study.csv");
  os.precision(17);
  os << "theta,param,error,unknowns,slope\n";
  const std::vector<double> thetas = c.study.param == "theta" ? std::vector<double>{c.wave.theta} : angles(c);
  for (double theta : thetas) {
    c.wave.theta = theta;
    std::vector<hsm::StudyPoint> rows;
    for (double v : c.study.values) {
      RunConfig run = c;
      if (c.study.param == "T") run.trace.T = v;
      if (c.study.param == "h") run.trace.h = v;
      if (c.study.param == "theta") run.wave.theta = v;
      hsm::validate(run.wave);
      const auto t0 = std::chrono::steady_clock::now();
      const Solution s = solve(run);
      const int unknowns = s.general ? s.general->fem_unknowns + s.general->trace_unknowns
                                     : s.report["unknowns"].get<int>();
      rows.push_back({v, reference_error(run, s), unknowns, hsm::seconds_since(t0)});
      std::cout << "theta=" << theta << " " << c.study.param << "=" << v << " error=" << rows.back().error << " ("
                << rows.back().seconds << " s)\n";
    }
    const double lo = c.study.fit_lo.value_or(c.study.values.front());
    const double hi = c.study.fit_hi.value_or(c.study.values.back());
    std::string slope;
    try {
      std::ostringstream ss;
      ss.precision(17);
      ss << hsm::fit_log10_slope(rows, lo, hi);
      slope = ss.str();
      std::cout << "theta=" << theta << " log10 slope over [" << lo << ", " << hi << "] = " << slope << "\n";
    } catch (const hsm::ConfigError&) {
      // fewer than two points in the window: no slope
    }
    for (const auto& r : rows)
      os << theta << "," << r.param << "," << r.error << "," << r.unknowns << "," << slope << "\n";
  }
  return kOk;
}

int cmd_reconstruct(const RunConfig& c, const fs::path& out) {
  const Solution s = solve(c);
  write_traces(out, s.traces);
  if (s.general) {
    std::ofstream os = open_out(out / "u_b.vtk");
    hsm::write_fem_vtk(os, s.general->u);
  }
  const auto pts = hsm::grid_points(c.grid.x0, c.grid.x1, c.grid.y0, c.grid.y1, c.grid.nx, c.grid.ny);
  hsm::ReconstructOptions ro;
  ro.check_overlap = c.grid.check_overlap;
  hsm::FieldGrid grid =
      hsm::reconstruct_field(s.traces, s.general ? &s.general->u : nullptr, pts, c.wave, c.quad, ro);
  if (c.grid.total) {
    if (c.data != hsm::DataKind::PlaneWave) throw hsm::ConfigError("grid.total needs plane-wave data");
    const hsm::MieDisk m = incident_wave(c);
    for (std::size_t i = 0; i < grid.points.size(); ++i)
      if (grid.provenance[i] != hsm::Provenance::Outside) grid.values[i] += hsm::mie_incident(m, grid.points[i]);
  }
  {
    std::ofstream os = open_out(out / "field.csv");
    hsm::write_field_csv(os, grid);
  }
  {
    std::ofstream os = open_out(out / "field.vtk");
    hsm::write_field_vtk(os, grid);
  }
  Json report = s.report;
  report["grid_points"] = grid.points.size();
  report["warnings"] = grid.warnings;
  write_json(out / "report.json", report);
  for (const auto& w : grid.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "wrote " << grid.points.size() << " field values to " << (out / "field.csv").string() << "\n";
  return kOk;
}

std::vector<std::string> property_suites() {
  std::vector<std::string> out;
  std::stringstream ss(HSM_PROPERTY_SUITES);
  for (std::string item; std::getline(ss, item, '|');)
    if (!item.empty()) out.push_back(item);
  return out;
}

int cmd_validate(const fs::path& out, const std::vector<int>& only, bool strict) {
  hsm::AcceptanceOptions opt;
  opt.property_commands = property_suites();
  opt.only = only;
  const auto results = hsm::run_acceptance(opt, std::cout);
  const std::string summary = hsm::acceptance_summary(results);
  std::cout << summary << std::endl;
  std::ofstream os = open_out(out / "acceptance_report.txt");
  for (const auto& r : results) os << hsm::format_line(r) << "\n";
  os << summary << "\n";
  return hsm::acceptance_exit_code(results, strict) == 0 ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Complex-scaled half-space matching solver for 2D Helmholtz scattering"};
  app.require_subcommand(1);
  std::string config_file, preset, out_dir = "out";
  std::vector<std::string> sets;
  int threads = 1;
  app.add_option("--config", config_file, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--preset", preset, "fig7 | fig9-left | fig9-right | fig11 | fig12");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_option("--set", sets, "Override a config key, e.g. --set trace.h=0.05 --set wave.theta=pi/4");
  struct Flag {
    const char* name;
    const char* key;
    std::string value;
  };
  std::vector<Flag> flags{{"--k", "wave.k", ""},     {"--a", "wave.a", ""}, {"--b", "wave.b", ""},
                          {"--theta", "wave.theta", ""}, {"--T", "trace.T", ""}, {"--trace-h", "trace.h", ""},
                          {"--q", "trace.q", ""}};
  for (Flag& f : flags) app.add_option(f.name, f.value, std::string("Shorthand for --set ") + f.key + "=...");

  auto* solve_square = app.add_subcommand("solve-square", "Exterior Dirichlet problem on the square");
  auto* solve_general = app.add_subcommand("solve-general", "Coupled FE / trace problem with obstacle or source");
  auto* farfield = app.add_subcommand("farfield", "Axis far fields over a sweep of T (and study.angles)");
  auto* reconstruct = app.add_subcommand("reconstruct", "Solve and evaluate the field on a grid");
  auto* study = app.add_subcommand("study", "Error against a reference over a sweep of T, h or theta");
  auto* validate = app.add_subcommand("validate", "Run the acceptance suite");
  std::vector<int> only;
  bool strict = false;
  validate->add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 8));
  validate->add_flag("--strict", strict, "Fail on known-unattainable criteria too");
  CLI11_PARSE(app, argc, argv);

  try {
    hsm::set_thread_count(threads);
    const fs::path out(out_dir);
    fs::create_directories(out);
    if (validate->parsed()) return cmd_validate(out, only, strict);
    for (const Flag& f : flags)
      if (!f.value.empty()) sets.push_back(std::string(f.key) + "=" + f.value);
    Json resolved = hsm::resolve_config(preset, config_file, sets);
    const RunConfig c = hsm::to_run_config(resolved);
    resolved["threads"] = threads;
    write_json(out / "config.json", resolved);
    if (solve_square->parsed()) return cmd_solve(c, out, false);
    if (solve_general->parsed()) return cmd_solve(c, out, true);
    if (farfield->parsed()) return cmd_farfield(c, out);
    if (reconstruct->parsed()) return cmd_reconstruct(c, out);
    if (study->parsed()) return cmd_study(c, out);
  } catch (const hsm::MeshError& e) {
    std::cerr << "mesh error: " << e.what() << "\n";
    return kMesh;
  } catch (const std::invalid_argument& e) {  // ConfigError and malformed numbers
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const hsm::Json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  }
  return kFailed;
}
