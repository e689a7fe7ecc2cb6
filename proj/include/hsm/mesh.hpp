#pragma once

// Triangle meshes of Omega_b = (-b, b)^2 (optionally minus an obstacle) with
// tagged edges on the outer sides Sigma_b^j, the matching lines Sigma_a^j and
// the obstacle boundary; structured mesher and the "hsm-mesh v1" text format.

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hsm/scaling_geometry.hpp"

namespace hsm {

class MeshError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class EdgeTag { Obstacle, SigmaB0, SigmaB1, SigmaB2, SigmaB3, SigmaA0, SigmaA1, SigmaA2, SigmaA3 };

inline EdgeTag sigma_b_tag(int j) { return static_cast<EdgeTag>(static_cast<int>(EdgeTag::SigmaB0) + wrap_index(j)); }
inline EdgeTag sigma_a_tag(int j) { return static_cast<EdgeTag>(static_cast<int>(EdgeTag::SigmaA0) + wrap_index(j)); }

inline std::string to_string(EdgeTag t) {
  if (t == EdgeTag::Obstacle) return "obstacle";
  const int v = static_cast<int>(t);
  if (v <= static_cast<int>(EdgeTag::SigmaB3)) return "sigma_b" + std::to_string(v - static_cast<int>(EdgeTag::SigmaB0));
  return "sigma_a" + std::to_string(v - static_cast<int>(EdgeTag::SigmaA0));
}

inline EdgeTag parse_edge_tag(const std::string& s) {
  if (s == "obstacle") return EdgeTag::Obstacle;
  if (s.size() == 8 && (s.rfind("sigma_b", 0) == 0 || s.rfind("sigma_a", 0) == 0) && s[7] >= '0' && s[7] <= '3') {
    const int j = s[7] - '0';
    return s[6] == 'b' ? sigma_b_tag(j) : sigma_a_tag(j);
  }
  throw MeshError("unknown edge tag '" + s + "'");
}

struct TaggedEdge {
  int v0 = 0;
  int v1 = 0;
  EdgeTag tag = EdgeTag::Obstacle;
};

// region 0: Omega_b outside the closed square [-a, a]^2, region 1: inside
inline constexpr int kRegionOuter = 0;
inline constexpr int kRegionInner = 1;

struct Mesh2D {
  double a = 0.0;
  double b = 0.0;
  std::vector<Point2> vertices;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> regions;
  std::vector<TaggedEdge> edges;

  bool has_obstacle() const {
    return std::any_of(edges.begin(), edges.end(), [](const TaggedEdge& e) { return e.tag == EdgeTag::Obstacle; });
  }
};

inline double signed_area(const Point2& p0, const Point2& p1, const Point2& p2) {
  return 0.5 * ((p1.x1 - p0.x1) * (p2.x2 - p0.x2) - (p2.x1 - p0.x1) * (p1.x2 - p0.x2));
}

inline std::pair<int, int> edge_key(int i, int j) { return i < j ? std::pair{i, j} : std::pair{j, i}; }

/// Checks orientation, conformity, tag placement and coverage of Sigma_a/Sigma_b.
inline void validate(const Mesh2D& m) {
  if (!(m.a > 0.0) || !(m.b > m.a)) throw MeshError("mesh: need 0 < a < b");
  if (m.regions.size() != m.triangles.size()) throw MeshError("mesh: one region label per triangle required");
  const int nv = static_cast<int>(m.vertices.size());
  std::map<std::pair<int, int>, int> count;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    for (int v : tri)
      if (v < 0 || v >= nv) throw MeshError("mesh: triangle " + std::to_string(t) + " has a bad vertex index");
    if (!(signed_area(m.vertices[tri[0]], m.vertices[tri[1]], m.vertices[tri[2]]) > 0.0))
      throw MeshError("mesh: triangle " + std::to_string(t) + " is not positively oriented");
    for (int e = 0; e < 3; ++e) ++count[edge_key(tri[e], tri[(e + 1) % 3])];
  }
  for (const auto& [key, c] : count)
    if (c > 2) throw MeshError("mesh: edge shared by more than two triangles");
  const double tol = 1e-9 * m.b;
  std::map<std::pair<int, int>, EdgeTag> tags;
  std::array<double, 4> len_b{}, len_a{};
  for (const TaggedEdge& e : m.edges) {
    const auto key = edge_key(e.v0, e.v1);
    const auto it = count.find(key);
    if (it == count.end()) throw MeshError("mesh: tagged edge " + std::to_string(e.v0) + "-" + std::to_string(e.v1) + " is not a triangle edge");
    const Point2 p = m.vertices[e.v0];
    const Point2 q = m.vertices[e.v1];
    const int code = static_cast<int>(e.tag);
    if (e.tag != EdgeTag::Obstacle) {
      const bool outer = code <= static_cast<int>(EdgeTag::SigmaB3);
      const int j = code - static_cast<int>(outer ? EdgeTag::SigmaB0 : EdgeTag::SigmaA0);
      const double level = outer ? m.b : m.a;
      const Point2 lp = local_coords(j, p);
      const Point2 lq = local_coords(j, q);
      if (std::abs(lp.x1 - level) > tol || std::abs(lq.x1 - level) > tol || std::abs(lp.x2) > level + tol ||
          std::abs(lq.x2) > level + tol)
        throw MeshError("mesh: edge tagged " + to_string(e.tag) + " at (" + std::to_string(p.x1) + ", " +
                        std::to_string(p.x2) + ") is off its side");
      (outer ? len_b : len_a)[j] += std::abs(lq.x2 - lp.x2);
      if (outer && it->second != 1) throw MeshError("mesh: " + to_string(e.tag) + " edge is not on the boundary");
    } else {
      const double r = std::max(std::abs(p.x1), std::abs(p.x2));
      if (!(r < m.a - tol)) throw MeshError("mesh: obstacle must lie strictly inside (-a, a)^2");
      if (it->second != 1) throw MeshError("mesh: obstacle edge is not on the boundary");
    }
    tags[key] = e.tag;
  }
  for (int j = 0; j < 4; ++j) {
    if (std::abs(len_b[j] - 2.0 * m.b) > 1e-8 * m.b)
      throw MeshError("mesh: sigma_b" + std::to_string(j) + " edges do not cover the side");
    if (std::abs(len_a[j] - 2.0 * m.a) > 1e-8 * m.a)
      throw MeshError("mesh: sigma_a" + std::to_string(j) + " edges do not cover the side (alignment)");
  }
  for (const auto& [key, c] : count)
    if (c == 1 && !tags.count(key)) throw MeshError("mesh: untagged boundary edge");
}

// ---------------------------------------------------------------- obstacles

struct DiskObstacle {
  Point2 center{0.0, 0.0};
  double radius = 0.5;
};

struct TriangleObstacle {
  std::array<Point2, 3> vertices;
};

using Obstacle = std::variant<DiskObstacle, TriangleObstacle>;

/// Point where the ray from the obstacle centre towards `target` leaves the obstacle.
inline Point2 obstacle_ray_exit(const Obstacle& ob, const Point2& target) {
  if (const auto* d = std::get_if<DiskObstacle>(&ob)) {
    const double dx = target.x1 - d->center.x1;
    const double dy = target.x2 - d->center.x2;
    const double n = std::hypot(dx, dy);
    return {d->center.x1 + d->radius * dx / n, d->center.x2 + d->radius * dy / n};
  }
  const auto& v = std::get<TriangleObstacle>(ob).vertices;
  const Point2 c{(v[0].x1 + v[1].x1 + v[2].x1) / 3.0, (v[0].x2 + v[1].x2 + v[2].x2) / 3.0};
  const double dx = target.x1 - c.x1;
  const double dy = target.x2 - c.x2;
  double best = INFINITY;
  for (int e = 0; e < 3; ++e) {
    const Point2 p = v[e];
    const Point2 q = v[(e + 1) % 3];
    const double ex = q.x1 - p.x1;
    const double ey = q.x2 - p.x2;
    const double den = dx * ey - dy * ex;
    if (std::abs(den) < 1e-300) continue;
    // c + s d = p + u e
    const double s = ((p.x1 - c.x1) * ey - (p.x2 - c.x2) * ex) / den;
    const double u = ((p.x1 - c.x1) * dy - (p.x2 - c.x2) * dx) / den;
    if (s > 0.0 && u >= -1e-12 && u <= 1.0 + 1e-12) best = std::min(best, s);
  }
  return {c.x1 + best * dx, c.x2 + best * dy};
}

inline Point2 obstacle_center(const Obstacle& ob) {
  if (const auto* d = std::get_if<DiskObstacle>(&ob)) return d->center;
  const auto& v = std::get<TriangleObstacle>(ob).vertices;
  return {(v[0].x1 + v[1].x1 + v[2].x1) / 3.0, (v[0].x2 + v[1].x2 + v[2].x2) / 3.0};
}

/// Largest sup-norm |x| over the obstacle boundary.
inline double obstacle_extent(const Obstacle& ob) {
  if (const auto* d = std::get_if<DiskObstacle>(&ob))
    return std::max(std::abs(d->center.x1), std::abs(d->center.x2)) + d->radius;
  double r = 0.0;
  for (const Point2& p : std::get<TriangleObstacle>(ob).vertices) r = std::max({r, std::abs(p.x1), std::abs(p.x2)});
  return r;
}

// ---------------------------------------------------------------- mesher

struct MeshSpec {
  double a = 0.8;
  double b = 1.2;
  double h = 0.05;
  std::optional<Obstacle> obstacle;
  int radial_layers = 0;  // layers between obstacle and Sigma_a; 0 picks ~h spacing
};

namespace mesh_detail {

inline std::vector<double> axis(double a, double b, double h) {
  const int n_in = static_cast<int>(std::ceil(2.0 * a / h - 1e-9));
  const int n_out = static_cast<int>(std::ceil((b - a) / h - 1e-9));
  std::vector<double> x;
  for (int i = 0; i < n_out; ++i) x.push_back(-b + (b - a) * i / n_out);
  for (int i = 0; i < n_in; ++i) x.push_back(-a + 2.0 * a * i / n_in);
  for (int i = 0; i <= n_out; ++i) x.push_back(a + (b - a) * i / n_out);
  // exact mirror symmetry and exact +-a, +-b
  const int n = static_cast<int>(x.size());
  for (int i = 0; i < n / 2; ++i) x[n - 1 - i] = -x[i];
  if (n % 2) x[n / 2] = 0.0;
  return x;
}

// Adds the quad p0 p1 p2 p3 (counter-clockwise) as two triangles, splitting
// along the shorter diagonal.
inline void add_quad(Mesh2D& m, int p0, int p1, int p2, int p3, int region) {
  const auto& v = m.vertices;
  auto d2 = [&](int i, int j) {
    return std::pow(v[i].x1 - v[j].x1, 2) + std::pow(v[i].x2 - v[j].x2, 2);
  };
  auto push = [&](int i, int j, int k) {
    if (signed_area(v[i], v[j], v[k]) < 0.0) std::swap(j, k);
    m.triangles.push_back({i, j, k});
    m.regions.push_back(region);
  };
  if (d2(p0, p2) <= d2(p1, p3) * (1.0 + 1e-12)) {
    push(p0, p1, p2);
    push(p0, p2, p3);
  } else {
    push(p0, p1, p3);
    push(p1, p2, p3);
  }
}

}  // namespace mesh_detail

/// Structured mesh of Omega_b with grid lines on x, y = +-a; an obstacle is
/// meshed by four mapped patches joining its boundary to the square Sigma_a.
inline Mesh2D build_mesh(const MeshSpec& spec) {
  if (!(spec.a > 0.0) || !(spec.b > spec.a)) throw ConfigError("mesh: need 0 < a < b");
  if (!(spec.h > 0.0) || spec.h > spec.a) throw ConfigError("mesh: need 0 < h <= a");
  if (spec.obstacle && !(obstacle_extent(*spec.obstacle) < spec.a))
    throw ConfigError("mesh: obstacle must lie strictly inside (-a, a)^2");
  const double a = spec.a;
  const double b = spec.b;
  Mesh2D m;
  m.a = a;
  m.b = b;
  const std::vector<double> x = mesh_detail::axis(a, b, spec.h);
  const int n = static_cast<int>(x.size());
  int ia = 0;
  while (std::abs(x[ia] + a) > 1e-12 * a) ++ia;
  const int ib = n - 1 - ia;  // index of +a
  const double tol = 1e-12 * b;

  std::vector<int> id(static_cast<std::size_t>(n) * n, -1);
  auto inside = [&](int i, int j) { return i > ia && i < ib && j > ia && j < ib; };
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      if (spec.obstacle && inside(i, j)) continue;
      id[j * n + i] = static_cast<int>(m.vertices.size());
      m.vertices.push_back({x[i], x[j]});
    }
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const bool in_square = i >= ia && i < ib && j >= ia && j < ib;
      if (spec.obstacle && in_square) continue;
      mesh_detail::add_quad(m, id[j * n + i], id[j * n + i + 1], id[(j + 1) * n + i + 1], id[(j + 1) * n + i],
                            in_square ? kRegionInner : kRegionOuter);
    }

  if (spec.obstacle) {
    const Obstacle& ob = *spec.obstacle;
    const int n_in = ib - ia;
    // square node m of side j, m = 0..n_in, and its grid vertex
    auto square_vertex = [&](int j, int k) {
      const Point2 g = global_coords(j, {a, x[ia + k]});
      int gi = ia, gj = ia;
      for (int i = 0; i < n; ++i) {
        if (std::abs(x[i] - g.x1) < tol) gi = i;
        if (std::abs(x[i] - g.x2) < tol) gj = i;
      }
      return id[gj * n + gi];
    };
    double longest = 0.0;
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k <= n_in; ++k) {
        const Point2 s = m.vertices[square_vertex(j, k)];
        const Point2 o = obstacle_ray_exit(ob, s);
        longest = std::max(longest, std::hypot(s.x1 - o.x1, s.x2 - o.x2));
      }
    const int layers = spec.radial_layers > 0 ? spec.radial_layers
                                              : std::max(2, static_cast<int>(std::ceil(longest / spec.h - 1e-9)));
    // ray vertices: ray (j, k) for k < n_in; ray (j, n_in) is ray (j+1, 0)
    std::vector<std::vector<int>> ray(4 * n_in);
    for (int r = 0; r < 4 * n_in; ++r) {
      const int j = r / n_in;
      const int k = r % n_in;
      const int sv = square_vertex(j, k);
      const Point2 s = m.vertices[sv];
      const Point2 o = obstacle_ray_exit(ob, s);
      ray[r].resize(layers + 1);
      for (int l = 0; l < layers; ++l) {
        const double eta = static_cast<double>(l) / layers;
        ray[r][l] = static_cast<int>(m.vertices.size());
        m.vertices.push_back({o.x1 + eta * (s.x1 - o.x1), o.x2 + eta * (s.x2 - o.x2)});
      }
      ray[r][layers] = sv;
    }
    const int nr = 4 * n_in;
    for (int r = 0; r < nr; ++r) {
      const auto& r0 = ray[r];
      const auto& r1 = ray[(r + 1) % nr];
      for (int l = 0; l < layers; ++l)
        mesh_detail::add_quad(m, r0[l], r1[l], r1[l + 1], r0[l + 1], kRegionInner);
      m.edges.push_back({r0[0], r1[0], EdgeTag::Obstacle});
    }
  }

  // Sigma_b and Sigma_a tags
  for (int side = 0; side < 4; ++side) {
    for (double level : {b, a}) {
      std::vector<std::pair<double, int>> on;
      for (int v = 0; v < static_cast<int>(m.vertices.size()); ++v) {
        const Point2 lp = local_coords(side, m.vertices[v]);
        if (std::abs(lp.x1 - level) < tol && std::abs(lp.x2) <= level + tol) on.push_back({lp.x2, v});
      }
      std::sort(on.begin(), on.end());
      const EdgeTag tag = level == b ? sigma_b_tag(side) : sigma_a_tag(side);
      for (std::size_t k = 0; k + 1 < on.size(); ++k) m.edges.push_back({on[k].second, on[k + 1].second, tag});
    }
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------- text format

inline void write_mesh(std::ostream& os, const Mesh2D& m) {
  os.precision(17);
  os << "hsm-mesh v1\n";
  os << "a " << m.a << " b " << m.b << "\n";
  os << m.vertices.size() << "\n";
  for (const Point2& p : m.vertices) os << p.x1 << " " << p.x2 << "\n";
  os << m.triangles.size() << "\n";
  for (std::size_t t = 0; t < m.triangles.size(); ++t)
    os << m.triangles[t][0] << " " << m.triangles[t][1] << " " << m.triangles[t][2] << " " << m.regions[t] << "\n";
  os << m.edges.size() << "\n";
  for (const TaggedEdge& e : m.edges) os << e.v0 << " " << e.v1 << " " << to_string(e.tag) << "\n";
}

inline Mesh2D read_mesh(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("hsm-mesh v1", 0) != 0) throw MeshError("mesh file: missing 'hsm-mesh v1' header");
  Mesh2D m;
  std::string ka, kb;
  if (!(is >> ka >> m.a >> kb >> m.b) || ka != "a" || kb != "b") throw MeshError("mesh file: expected 'a <value> b <value>'");
  std::size_t nv = 0, nt = 0, ne = 0;
  if (!(is >> nv)) throw MeshError("mesh file: bad vertex count");
  m.vertices.resize(nv);
  for (auto& p : m.vertices)
    if (!(is >> p.x1 >> p.x2)) throw MeshError("mesh file: truncated vertex list");
  if (!(is >> nt)) throw MeshError("mesh file: bad triangle count");
  m.triangles.resize(nt);
  m.regions.resize(nt);
  for (std::size_t t = 0; t < nt; ++t)
    if (!(is >> m.triangles[t][0] >> m.triangles[t][1] >> m.triangles[t][2] >> m.regions[t]))
      throw MeshError("mesh file: truncated triangle list");
  if (!(is >> ne)) throw MeshError("mesh file: bad edge count");
  m.edges.resize(ne);
  for (auto& e : m.edges) {
    std::string tag;
    if (!(is >> e.v0 >> e.v1 >> tag)) throw MeshError("mesh file: truncated edge list");
    e.tag = parse_edge_tag(tag);
  }
  validate(m);
  return m;
}

// ---------------------------------------------------------------- point location

/// Bucket grid over the triangles for point location.
class TriangleLocator {
 public:
  explicit TriangleLocator(const Mesh2D& m, int per_axis = 64) : mesh_(&m), n_(per_axis) {
    lo_ = {-m.b, -m.b};
    step_ = 2.0 * m.b / n_;
    buckets_.resize(static_cast<std::size_t>(n_) * n_);
    for (int t = 0; t < static_cast<int>(m.triangles.size()); ++t) {
      double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
      for (int v : m.triangles[t]) {
        x0 = std::min(x0, m.vertices[v].x1);
        x1 = std::max(x1, m.vertices[v].x1);
        y0 = std::min(y0, m.vertices[v].x2);
        y1 = std::max(y1, m.vertices[v].x2);
      }
      for (int j = cell(y0, lo_.x2); j <= cell(y1, lo_.x2); ++j)
        for (int i = cell(x0, lo_.x1); i <= cell(x1, lo_.x1); ++i) buckets_[j * n_ + i].push_back(t);
    }
  }

  /// Triangle containing p and its barycentric coordinates, or -1 if none.
  std::pair<int, std::array<double, 3>> locate(const Point2& p, double tol = 1e-10) const {
    const int i = cell(p.x1, lo_.x1);
    const int j = cell(p.x2, lo_.x2);
    for (int t : buckets_[j * n_ + i]) {
      const auto bc = barycentric(t, p);
      if (bc[0] >= -tol && bc[1] >= -tol && bc[2] >= -tol) return {t, bc};
    }
    return {-1, {0.0, 0.0, 0.0}};
  }

  std::array<double, 3> barycentric(int t, const Point2& p) const {
    const auto& tri = mesh_->triangles[t];
    const Point2& a = mesh_->vertices[tri[0]];
    const Point2& b = mesh_->vertices[tri[1]];
    const Point2& c = mesh_->vertices[tri[2]];
    const double area = signed_area(a, b, c);
    const double l1 = signed_area(a, p, c) / area;
    const double l2 = signed_area(a, b, p) / area;
    return {1.0 - l1 - l2, l1, l2};
  }

 private:
  int cell(double v, double lo) const { return std::clamp(static_cast<int>(std::floor((v - lo) / step_)), 0, n_ - 1); }

  const Mesh2D* mesh_;
  int n_;
  Point2 lo_;
  double step_;
  std::vector<std::vector<int>> buckets_;
};

}  // namespace hsm
