#pragma once

// Run configuration: a JSON document merged over built-in defaults, with named
// presets and dotted-key overrides. Unknown keys are rejected.

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <json.hpp>

#include "hsm/fem_coupling.hpp"

namespace hsm {

using Json = nlohmann::json;

/// Number or string such as "pi/6", "2pi", "0.5*pi", "1.25".
inline double parse_scalar(const Json& v, const std::string& key) {
  if (v.is_number()) return v.get<double>();
  if (!v.is_string()) throw ConfigError(key + ": expected a number");
  const std::string s = v.get<std::string>();
  static const std::regex re(R"(^\s*([-+]?[0-9]*\.?[0-9]*(?:[eE][-+]?[0-9]+)?)\s*\*?\s*(pi)?\s*(?:/\s*([0-9]*\.?[0-9]+))?\s*$)");
  std::smatch m;
  if (!std::regex_match(s, m, re) || (m[1].length() == 0 && !m[2].matched))
    throw ConfigError(key + ": cannot parse '" + s + "'");
  double x = 1.0;
  if (m[1].length() > 0) {
    const std::string c = m[1].str();
    x = (c == "-" || c == "+") ? (c == "-" ? -1.0 : 1.0) : std::stod(c);
  }
  if (m[2].matched) x *= std::numbers::pi;
  if (m[3].matched) x /= std::stod(m[3].str());
  if (!std::isfinite(x)) throw ConfigError(key + ": value is not finite");
  return x;
}

inline Complex parse_complex(const Json& v, const std::string& key) {
  if (v.is_array() && v.size() == 2) return {parse_scalar(v[0], key), parse_scalar(v[1], key)};
  if (v.is_number() || v.is_string()) return {parse_scalar(v, key), 0.0};
  throw ConfigError(key + ": expected a number or [re, im]");
}

inline Json default_config() {
  return Json::parse(R"({
    "problem": "dirichlet-square",
    "wave": {"k": "2pi", "a": 1.0, "b": 1.5, "theta": "pi/6"},
    "trace": {"T": 5.0, "h": 0.1, "q": 1},
    "quadrature": {"panel_order": 5, "recon_step": 0.1, "recon_order": 5, "corner_duffy": true, "corner_order": 10},
    "solver": {"dense": "monolithic", "coupled": "schur", "mass_correction": true, "fem_degree": 2},
    "data": {"kind": "hankel-trace", "amplitude": [0.0, 0.25], "incidence": 0.0, "value": [1.0, 0.0]},
    "mesh": {"file": "", "h": 0.05, "radial_layers": 0,
             "obstacle": {"kind": "none", "center": [0.0, 0.0], "radius": 0.5,
                          "vertices": [[-0.3, -0.2], [0.3, -0.2], [0.0, 0.3]]}},
    "material": {"rho": [1.0, 1.0],
                 "source": {"kind": "none", "center": [0.0, 0.0], "width": 0.2, "amplitude": [1.0, 0.0]}},
    "study": {"param": "T", "from": 1.4, "to": 2.0, "step": 0.1, "angles": [], "fit": [null, null]},
    "grid": {"x0": -4.0, "x1": 4.0, "y0": -4.0, "y1": 4.0, "nx": 81, "ny": 81, "total": false,
             "check_overlap": false}
  })");
}

/// Recursive merge that rejects keys absent from `base`; arrays are replaced.
inline void merge_strict(Json& base, const Json& patch, const std::string& path = "") {
  if (!patch.is_object()) throw ConfigError("config" + (path.empty() ? "" : " '" + path + "'") + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string key = path.empty() ? it.key() : path + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("config: unknown key '" + key + "'");
    Json& slot = base[it.key()];
    if (slot.is_object())
      merge_strict(slot, it.value(), key);
    else
      slot = it.value();
  }
}

/// Applies "a.b.c=value"; value is read as JSON when it parses, else as a string.
inline void apply_override(Json& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t p; (p = rest.find('.')) != std::string::npos; rest = rest.substr(p + 1)) parts.push_back(rest.substr(0, p));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = Json{{*it, patch}};
  merge_strict(cfg, patch);
}

inline Json preset_config(const std::string& name) {
  if (name == "fig7")
    return Json::parse(R"({"problem": "dirichlet-square",
      "wave": {"k": "2pi", "a": 1.0, "b": 1.5, "theta": "pi/6"},
      "trace": {"T": 5.0, "h": 0.1, "q": 1},
      "data": {"kind": "hankel-trace", "amplitude": [0.0, 0.25]},
      "grid": {"x0": -4.0, "x1": 4.0, "y0": -4.0, "y1": 4.0, "nx": 161, "ny": 161}})");
  if (name == "fig9-left" || name == "fig9-right")
    return Json{{"problem", "dirichlet-square"},
                {"wave", {{"k", name == "fig9-left" ? "pi" : "2pi"}, {"a", 1.0}, {"b", 1.5}, {"theta", "pi/6"}}},
                {"trace", {{"T", 2.6}, {"h", 0.01}, {"q", 3}}},
                {"data", {{"kind", "hankel-trace"}, {"amplitude", {0.0, 0.25}}}},
                {"study", {{"param", "T"}, {"from", 1.2}, {"to", 2.6}, {"step", 0.2},
                           {"angles", {"pi/6", "pi/4", "pi/3"}}, {"fit", {1.4, 2.0}}}}};
  if (name == "fig11")
    return Json::parse(R"({"problem": "dirichlet-square",
      "wave": {"k": "2pi", "a": 1.0, "b": 1.5, "theta": "pi/6"},
      "trace": {"T": 2.6, "h": 0.01, "q": 3},
      "data": {"kind": "hankel-trace", "amplitude": [1.0, 0.0]},
      "study": {"param": "T", "from": 1.0, "to": 2.7, "step": 0.1, "angles": ["pi/6", "pi/4", "pi/3"]}})");
  if (name == "fig12")
    return Json::parse(R"({"problem": "general",
      "wave": {"k": "2pi", "a": 0.8, "b": 1.2, "theta": "pi/6"},
      "trace": {"T": 5.0, "h": 0.05, "q": 2},
      "data": {"kind": "plane-wave", "incidence": "pi/6"},
      "mesh": {"h": 0.05, "obstacle": {"kind": "disk", "center": [0.0, 0.0], "radius": 0.5}},
      "grid": {"x0": -3.0, "x1": 3.0, "y0": -3.0, "y1": 3.0, "nx": 121, "ny": 121, "total": true}})");
  throw ConfigError("unknown preset '" + name + "' (fig7, fig9-left, fig9-right, fig11, fig12)");
}

enum class ProblemKind { DirichletSquare, General };
enum class DataKind { HankelTrace, PlaneWave, Constant, None };

struct StudySpec {
  std::string param = "T";  // T | h | theta
  std::vector<double> values;
  std::vector<double> angles;  // empty: wave.theta only
  std::optional<double> fit_lo, fit_hi;
};

struct GridSpec {
  double x0 = -4, x1 = 4, y0 = -4, y1 = 4;
  int nx = 81, ny = 81;
  bool total = false;  // add the incident plane wave
  bool check_overlap = false;
};

struct RunConfig {
  ProblemKind problem = ProblemKind::DirichletSquare;
  WaveParams wave;
  TraceGridSpec trace;
  QuadratureSpec quad;
  DirichletOptions dirichlet;
  GeneralOptions general;
  DataKind data = DataKind::HankelTrace;
  Complex amplitude{0.0, 0.25};
  double incidence = 0.0;
  Complex constant{1.0, 0.0};
  std::string mesh_file;
  MeshSpec mesh;
  std::vector<double> rho{1.0, 1.0};
  std::string source_kind = "none";
  Point2 source_center{0.0, 0.0};
  double source_width = 0.2;
  Complex source_amplitude{1.0, 0.0};
  StudySpec study;
  GridSpec grid;
};

namespace config_detail {

inline Point2 point(const Json& v, const std::string& key) {
  if (!v.is_array() || v.size() != 2) throw ConfigError(key + ": expected [x, y]");
  return {parse_scalar(v[0], key), parse_scalar(v[1], key)};
}

inline int integer(const Json& v, const std::string& key) {
  if (!v.is_number_integer()) throw ConfigError(key + ": expected an integer");
  return v.get<int>();
}

inline bool boolean(const Json& v, const std::string& key) {
  if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
  return v.get<bool>();
}

inline std::string string(const Json& v, const std::string& key) {
  if (!v.is_string()) throw ConfigError(key + ": expected a string");
  return v.get<std::string>();
}

}  // namespace config_detail

/// Typed view of a merged document; checks enums, ranges and referenced files.
inline RunConfig to_run_config(const Json& j) {
  using namespace config_detail;
  RunConfig c;
  const std::string problem = string(j["problem"], "problem");
  if (problem == "dirichlet-square") c.problem = ProblemKind::DirichletSquare;
  else if (problem == "general") c.problem = ProblemKind::General;
  else throw ConfigError("problem: expected dirichlet-square or general, got '" + problem + "'");

  const Json& w = j["wave"];
  c.wave = {parse_scalar(w["k"], "wave.k"), parse_scalar(w["a"], "wave.a"), parse_scalar(w["b"], "wave.b"),
            parse_scalar(w["theta"], "wave.theta")};
  validate(c.wave);
  c.trace = {parse_scalar(j["trace"]["T"], "trace.T"), parse_scalar(j["trace"]["h"], "trace.h"),
             integer(j["trace"]["q"], "trace.q")};

  const Json& q = j["quadrature"];
  c.quad.panel_order = integer(q["panel_order"], "quadrature.panel_order");
  c.quad.recon_step = parse_scalar(q["recon_step"], "quadrature.recon_step");
  c.quad.recon_order = integer(q["recon_order"], "quadrature.recon_order");
  c.quad.corner_duffy = boolean(q["corner_duffy"], "quadrature.corner_duffy");
  c.quad.corner_order = integer(q["corner_order"], "quadrature.corner_order");
  validate(c.quad);

  const Json& s = j["solver"];
  const std::string dense = string(s["dense"], "solver.dense");
  if (dense == "monolithic") c.dirichlet.solver = DenseSolver::Monolithic;
  else if (dense == "circulant") c.dirichlet.solver = DenseSolver::Circulant;
  else throw ConfigError("solver.dense: expected monolithic or circulant");
  const std::string coupled = string(s["coupled"], "solver.coupled");
  if (coupled == "schur") c.general.solver = CoupledSolver::Schur;
  else if (coupled == "monolithic") c.general.solver = CoupledSolver::Monolithic;
  else throw ConfigError("solver.coupled: expected schur or monolithic");
  c.dirichlet.mass_correction = c.general.mass_correction = boolean(s["mass_correction"], "solver.mass_correction");
  c.general.fem_degree = integer(s["fem_degree"], "solver.fem_degree");

  const Json& d = j["data"];
  const std::string kind = string(d["kind"], "data.kind");
  if (kind == "hankel-trace") c.data = DataKind::HankelTrace;
  else if (kind == "plane-wave") c.data = DataKind::PlaneWave;
  else if (kind == "constant") c.data = DataKind::Constant;
  else if (kind == "none") c.data = DataKind::None;
  else throw ConfigError("data.kind: expected hankel-trace, plane-wave, constant or none");
  c.amplitude = parse_complex(d["amplitude"], "data.amplitude");
  c.incidence = parse_scalar(d["incidence"], "data.incidence");
  c.constant = parse_complex(d["value"], "data.value");

  const Json& m = j["mesh"];
  c.mesh_file = string(m["file"], "mesh.file");
  if (!c.mesh_file.empty() && !std::ifstream(c.mesh_file))
    throw ConfigError("mesh.file: cannot open '" + c.mesh_file + "'");
  c.mesh.a = c.wave.a;
  c.mesh.b = c.wave.b;
  c.mesh.h = parse_scalar(m["h"], "mesh.h");
  c.mesh.radial_layers = integer(m["radial_layers"], "mesh.radial_layers");
  const Json& ob = m["obstacle"];
  const std::string ok = string(ob["kind"], "mesh.obstacle.kind");
  if (ok == "disk") {
    c.mesh.obstacle = DiskObstacle{point(ob["center"], "mesh.obstacle.center"),
                                   parse_scalar(ob["radius"], "mesh.obstacle.radius")};
  } else if (ok == "triangle") {
    const Json& v = ob["vertices"];
    if (!v.is_array() || v.size() != 3) throw ConfigError("mesh.obstacle.vertices: expected three points");
    TriangleObstacle t;
    for (int i = 0; i < 3; ++i) t.vertices[i] = point(v[i], "mesh.obstacle.vertices");
    c.mesh.obstacle = t;
  } else if (ok != "none") {
    throw ConfigError("mesh.obstacle.kind: expected none, disk or triangle");
  }

  const Json& mat = j["material"];
  if (!mat["rho"].is_array()) throw ConfigError("material.rho: expected an array");
  c.rho.clear();
  for (const Json& r : mat["rho"]) c.rho.push_back(parse_scalar(r, "material.rho"));
  const Json& src = mat["source"];
  c.source_kind = string(src["kind"], "material.source.kind");
  if (c.source_kind != "none" && c.source_kind != "gaussian")
    throw ConfigError("material.source.kind: expected none or gaussian");
  c.source_center = point(src["center"], "material.source.center");
  c.source_width = parse_scalar(src["width"], "material.source.width");
  if (!(c.source_width > 0.0)) throw ConfigError("material.source.width must be positive");
  c.source_amplitude = parse_complex(src["amplitude"], "material.source.amplitude");

  const Json& st = j["study"];
  c.study.param = string(st["param"], "study.param");
  if (c.study.param != "T" && c.study.param != "h" && c.study.param != "theta")
    throw ConfigError("study.param: expected T, h or theta");
  const double from = parse_scalar(st["from"], "study.from"), to = parse_scalar(st["to"], "study.to"),
               step = parse_scalar(st["step"], "study.step");
  if (to < from) throw ConfigError("study: reversed range (from > to)");
  if (!(step > 0.0)) throw ConfigError("study.step must be positive");
  const int n = static_cast<int>(std::floor((to - from) / step + 1e-9)) + 1;
  for (int i = 0; i < n; ++i) c.study.values.push_back(from + i * step);
  if (!st["angles"].is_array()) throw ConfigError("study.angles: expected an array");
  for (const Json& a : st["angles"]) c.study.angles.push_back(parse_scalar(a, "study.angles"));
  const Json& fit = st["fit"];
  if (!fit.is_array() || fit.size() != 2) throw ConfigError("study.fit: expected [lo, hi]");
  if (!fit[0].is_null()) c.study.fit_lo = parse_scalar(fit[0], "study.fit");
  if (!fit[1].is_null()) c.study.fit_hi = parse_scalar(fit[1], "study.fit");

  const Json& g = j["grid"];
  c.grid = {parse_scalar(g["x0"], "grid.x0"), parse_scalar(g["x1"], "grid.x1"), parse_scalar(g["y0"], "grid.y0"),
            parse_scalar(g["y1"], "grid.y1"), integer(g["nx"], "grid.nx"), integer(g["ny"], "grid.ny"),
            boolean(g["total"], "grid.total"), boolean(g["check_overlap"], "grid.check_overlap")};
  if (c.grid.nx < 1 || c.grid.ny < 1) throw ConfigError("grid: nx and ny must be positive");

  if (c.problem == ProblemKind::General) {
    validate_general(c.wave);
    if (c.mesh.obstacle && c.data == DataKind::None)
      throw ConfigError("data.kind: an obstacle needs boundary data");
    if (!c.mesh.obstacle && c.mesh_file.empty() && c.data != DataKind::None)
      throw ConfigError("data.kind must be none without an obstacle (the FE source drives the problem)");
  }
  return c;
}

/// Defaults, then preset, then file, then overrides.
inline Json resolve_config(const std::string& preset, const std::string& file, const std::vector<std::string>& sets) {
  Json cfg = default_config();
  if (!preset.empty()) merge_strict(cfg, preset_config(preset));
  if (!file.empty()) {
    std::ifstream is(file);
    if (!is) throw ConfigError("cannot open config file '" + file + "'");
    Json doc = Json::parse(is, nullptr, false, true);
    if (doc.is_discarded()) throw ConfigError("config file '" + file + "' is not valid JSON");
    merge_strict(cfg, doc);
  }
  for (const std::string& s : sets) apply_override(cfg, s);
  return cfg;
}

}  // namespace hsm
