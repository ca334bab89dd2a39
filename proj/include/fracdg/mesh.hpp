#pragma once

// Triangular meshes: structured and jittered generators, a text/Gmsh loader,
// edge connectivity, point location, and the axis-aligned ray traversal used
// to evaluate the nonlocal integrals across broken fields.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "fracdg/common.hpp"

namespace fracdg {

enum class Axis { X, Y };

struct Vertex {
  int id = -1;
  double x = 0.0;
  double y = 0.0;
};

struct Element {
  int id = -1;
  std::array<int, 3> v{};  // counter-clockwise
  double area = 0.0;
  double diameter = 0.0;
};

struct Edge {
  int id = -1;
  std::array<int, 2> v{};
  int minus_elem = -1;
  int plus_elem = -1;  // -1: boundary edge
  int minus_face = -1;
  int plus_face = -1;
  Vec2 normal = Vec2::Zero();  // unit, outward from the minus side
  double length = 0.0;

  bool is_boundary() const { return plus_elem < 0; }
};

struct RaySegment {
  int elem = -1;
  double s0 = 0.0;  // entry abscissa along the traversal coordinate
  double s1 = 0.0;  // exit abscissa, s0 < s1
};

struct BoundingBox {
  double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double extent() const { return std::max(width(), height()); }
};

class Mesh {
 public:
  std::vector<Vertex> vertices;
  std::vector<Element> elements;
  std::vector<Edge> edges;
  /// Declared boundary overrides from the mesh file (vertex id pairs).
  std::vector<std::array<int, 2>> boundary_overrides;

  int K() const { return static_cast<int>(elements.size()); }
  int num_vertices() const { return static_cast<int>(vertices.size()); }
  int num_edges() const { return static_cast<int>(edges.size()); }

  const BoundingBox& bbox() const { return bbox_; }
  double geom_tol() const { return 1e-12 * bbox_.extent(); }

  Vec2 vertex_pos(int id) const {
    return Vec2(vertices[id].x, vertices[id].y);
  }

  /// Edge id on local face f of an element (faces join local vertices f and
  /// f+1 mod 3), and the neighboring element across it (-1 on the boundary).
  int edge_of(int elem, int face) const { return elem_edges_[elem][face]; }
  int neighbor_of(int elem, int face) const {
    return elem_neighbors_[elem][face];
  }

  double total_area() const {
    double a = 0.0;
    for (const Element& e : elements) a += e.area;
    return a;
  }

  /// Barycentric coordinates of p in an element (sum to 1).
  std::array<double, 3> barycentric(int elem, const Vec2& p) const {
    const Element& e = elements[elem];
    const Vec2 a = vertex_pos(e.v[0]), b = vertex_pos(e.v[1]),
               c = vertex_pos(e.v[2]);
    const double d = cross(b - a, c - a);
    const double l1 = cross(b - p, c - p) / d;
    const double l2 = cross(c - p, a - p) / d;
    return {l1, l2, 1.0 - l1 - l2};
  }

  /// Locate the element containing p (walk with brute-force fallback).
  /// Throws if p lies outside the mesh.
  int locate_point(const Vec2& p, int hint = -1) const {
    constexpr double kBaryTol = 1e-10;
    int cur = (hint >= 0 && hint < K()) ? hint : 0;
    const int max_steps = 2 * K() + 8;
    for (int step = 0; step < max_steps; ++step) {
      const auto l = barycentric(cur, p);
      int worst = 0;
      for (int i = 1; i < 3; ++i)
        if (l[i] < l[worst]) worst = i;
      if (l[worst] >= -kBaryTol) return cur;
      // Walk across the face opposite the most negative coordinate.
      const int face = (worst + 1) % 3;
      const int next = neighbor_of(cur, face);
      if (next < 0) break;
      cur = next;
    }
    return locate_point_brute(p);
  }

  int locate_point_brute(const Vec2& p) const {
    constexpr double kBaryTol = 1e-10;
    int best = -1;
    double best_min = -1.0;
    for (int k = 0; k < K(); ++k) {
      const auto l = barycentric(k, p);
      const double m = std::min({l[0], l[1], l[2]});
      if (m > best_min) {
        best_min = m;
        best = k;
      }
    }
    if (best < 0 || best_min < -kBaryTol)
      throw ConfigError("locate_point: target outside mesh");
    return best;
  }

  /// Intersection of the line {fixed coordinate = w} with an element,
  /// as an interval of the traversal coordinate. Empty if they miss.
  std::optional<std::pair<double, double>> clip_line(int elem, Axis axis,
                                                     double w) const {
    const Element& e = elements[elem];
    double lo = 0.0, hi = 0.0;
    int count = 0;
    for (int f = 0; f < 3; ++f) {
      Vec2 p0 = vertex_pos(e.v[f]);
      Vec2 p1 = vertex_pos(e.v[(f + 1) % 3]);
      const double w0 = (axis == Axis::X) ? p0.y() : p0.x();
      const double w1 = (axis == Axis::X) ? p1.y() : p1.x();
      const double u0 = (axis == Axis::X) ? p0.x() : p0.y();
      const double u1 = (axis == Axis::X) ? p1.x() : p1.y();
      if ((w0 - w) * (w1 - w) >= 0.0) continue;  // no strict crossing
      const double t = (w - w0) / (w1 - w0);
      const double u = u0 + t * (u1 - u0);
      if (count == 0) {
        lo = hi = u;
      } else {
        lo = std::min(lo, u);
        hi = std::max(hi, u);
      }
      ++count;
    }
    if (count < 2 || hi - lo <= 0.0) return std::nullopt;
    return std::make_pair(lo, hi);
  }

  /// True if the line {fixed coord = w} passes within tol of any vertex of
  /// the element.
  bool line_grazes_vertex(int elem, Axis axis, double w, double tol) const {
    for (int i = 0; i < 3; ++i) {
      const Vec2 p = vertex_pos(elements[elem].v[i]);
      const double pw = (axis == Axis::X) ? p.y() : p.x();
      if (std::abs(pw - w) <= tol) return true;
    }
    return false;
  }

  static double cross(const Vec2& a, const Vec2& b) {
    return a.x() * b.y() - a.y() * b.x();
  }

  void set_connectivity(std::vector<std::array<int, 3>> elem_edges,
                        std::vector<std::array<int, 3>> elem_neighbors,
                        BoundingBox box) {
    elem_edges_ = std::move(elem_edges);
    elem_neighbors_ = std::move(elem_neighbors);
    bbox_ = box;
  }

 private:
  std::vector<std::array<int, 3>> elem_edges_;
  std::vector<std::array<int, 3>> elem_neighbors_;
  BoundingBox bbox_;
};

namespace detail {

inline double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * Mesh::cross(b - a, c - a);
}

}  // namespace detail

/// Populate edges, adjacency and per-element geometry. The element vertex
/// order is normalized to CCW first; an edge shared by more than two
/// elements is rejected as non-conforming. Interior edges take the smaller
/// element id as their minus side.
inline void build_connectivity(Mesh& mesh) {
  if (mesh.vertices.empty() || mesh.elements.empty())
    throw ConfigError("build_connectivity: mesh has no vertices or elements");

  BoundingBox box;
  box.xmin = box.xmax = mesh.vertices[0].x;
  box.ymin = box.ymax = mesh.vertices[0].y;
  for (const Vertex& v : mesh.vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y))
      throw ConfigError("build_connectivity: non-finite vertex coordinate");
    box.xmin = std::min(box.xmin, v.x);
    box.xmax = std::max(box.xmax, v.x);
    box.ymin = std::min(box.ymin, v.y);
    box.ymax = std::max(box.ymax, v.y);
  }

  for (Element& e : mesh.elements) {
    for (int idx : e.v)
      if (idx < 0 || idx >= mesh.num_vertices())
        throw ConfigError("build_connectivity: element " +
                          std::to_string(e.id) +
                          " references missing vertex " + std::to_string(idx));
    Vec2 a = mesh.vertex_pos(e.v[0]), b = mesh.vertex_pos(e.v[1]),
         c = mesh.vertex_pos(e.v[2]);
    double sa = detail::signed_area(a, b, c);
    if (sa < 0.0) {
      std::swap(e.v[1], e.v[2]);
      sa = -sa;
    }
    if (sa <= 0.0)
      throw ConfigError("build_connectivity: degenerate element " +
                        std::to_string(e.id));
    e.area = sa;
    a = mesh.vertex_pos(e.v[0]);
    b = mesh.vertex_pos(e.v[1]);
    c = mesh.vertex_pos(e.v[2]);
    e.diameter =
        std::max({(b - a).norm(), (c - b).norm(), (a - c).norm()});
  }

  struct HalfEdge {
    int elem;
    int face;
  };
  std::map<std::pair<int, int>, std::vector<HalfEdge>> by_key;
  for (const Element& e : mesh.elements) {
    for (int f = 0; f < 3; ++f) {
      const int a = e.v[f], b = e.v[(f + 1) % 3];
      by_key[{std::min(a, b), std::max(a, b)}].push_back({e.id, f});
    }
  }

  mesh.edges.clear();
  std::vector<std::array<int, 3>> elem_edges(mesh.K(), {-1, -1, -1});
  std::vector<std::array<int, 3>> elem_neighbors(mesh.K(), {-1, -1, -1});

  auto make_edge = [&](int va, int vb, int minus_elem, int minus_face) {
    Edge edge;
    edge.id = static_cast<int>(mesh.edges.size());
    edge.v = {va, vb};
    edge.minus_elem = minus_elem;
    edge.minus_face = minus_face;
    const Vec2 p0 = mesh.vertex_pos(va), p1 = mesh.vertex_pos(vb);
    const Vec2 d = p1 - p0;
    edge.length = d.norm();
    edge.normal = Vec2(d.y(), -d.x()) / edge.length;
    return edge;
  };

  for (auto& [key, halves] : by_key) {
    if (halves.size() > 2)
      throw ConfigError("build_connectivity: non-conforming mesh, edge (" +
                        std::to_string(key.first) + "," +
                        std::to_string(key.second) + ") shared by " +
                        std::to_string(halves.size()) + " elements");
    // Minus side: the smaller element id.
    std::sort(halves.begin(), halves.end(),
              [](const HalfEdge& a, const HalfEdge& b) {
                return a.elem < b.elem;
              });
    const HalfEdge m = halves[0];
    const Element& me = mesh.elements[m.elem];
    // Run the edge in the minus element's CCW direction so the computed
    // normal points outward from the minus side.
    Edge edge = make_edge(me.v[m.face], me.v[(m.face + 1) % 3], m.elem, m.face);
    if (halves.size() == 2) {
      edge.plus_elem = halves[1].elem;
      edge.plus_face = halves[1].face;
      elem_neighbors[halves[0].elem][halves[0].face] = halves[1].elem;
      elem_neighbors[halves[1].elem][halves[1].face] = halves[0].elem;
    }
    for (const HalfEdge& h : halves)
      elem_edges[h.elem][h.face] = edge.id;
    mesh.edges.push_back(edge);
  }

  // Boundary overrides: splitting an interior edge turns it into two
  // one-sided boundary edges (an internal crack).
  for (const auto& ov : mesh.boundary_overrides) {
    const auto key = std::make_pair(std::min(ov[0], ov[1]),
                                    std::max(ov[0], ov[1]));
    auto it = by_key.find(key);
    if (it == by_key.end())
      throw ConfigError("build_connectivity: boundary override names a "
                        "missing edge (" +
                        std::to_string(ov[0]) + "," + std::to_string(ov[1]) +
                        ")");
    Edge& edge = mesh.edges[elem_edges[it->second[0].elem][it->second[0].face]];
    if (edge.is_boundary()) continue;
    const int plus_elem = edge.plus_elem, plus_face = edge.plus_face;
    edge.plus_elem = -1;
    edge.plus_face = -1;
    const Element& pe = mesh.elements[plus_elem];
    Edge twin = make_edge(pe.v[plus_face], pe.v[(plus_face + 1) % 3],
                          plus_elem, plus_face);
    elem_edges[plus_elem][plus_face] = twin.id;
    elem_neighbors[edge.minus_elem][edge.minus_face] = -1;
    elem_neighbors[plus_elem][plus_face] = -1;
    mesh.edges.push_back(twin);
  }

  mesh.set_connectivity(std::move(elem_edges), std::move(elem_neighbors), box);
}

/// m x m grid of squares on the box, each split along the lower-left to
/// upper-right diagonal; K = 2 m^2.
inline Mesh generate_structured(int m, double x0, double x1, double y0,
                                double y1) {
  if (m < 1) throw ConfigError("generate_structured: need m >= 1");
  if (!(x1 > x0) || !(y1 > y0))
    throw ConfigError("generate_structured: degenerate box");
  Mesh mesh;
  const double dx = (x1 - x0) / m, dy = (y1 - y0) / m;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i)
      mesh.vertices.push_back(
          {j * (m + 1) + i, x0 + i * dx, y0 + j * dy});
  auto vid = [m](int i, int j) { return j * (m + 1) + i; };
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) {
      const int v00 = vid(i, j), v10 = vid(i + 1, j), v11 = vid(i + 1, j + 1),
                v01 = vid(i, j + 1);
      Element t1, t2;
      t1.id = static_cast<int>(mesh.elements.size());
      t1.v = {v00, v10, v11};
      mesh.elements.push_back(t1);
      t2.id = static_cast<int>(mesh.elements.size());
      t2.v = {v00, v11, v01};
      mesh.elements.push_back(t2);
    }
  }
  build_connectivity(mesh);
  return mesh;
}

/// Conforming unstructured mesh of the box: randomized cell diagonals plus a
/// bounded jitter of the vertices (interior: both directions; boundary:
/// tangential only; corners pinned). Deterministic for a fixed seed.
inline Mesh generate_unstructured(int m, double x0, double x1, double y0,
                                  double y1, std::uint64_t seed) {
  if (m < 2) throw ConfigError("generate_unstructured: need m >= 2");
  if (!(x1 > x0) || !(y1 > y0))
    throw ConfigError("generate_unstructured: degenerate box");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  const double dx = (x1 - x0) / m, dy = (y1 - y0) / m;
  Mesh mesh;
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i)
      mesh.vertices.push_back({j * (m + 1) + i, x0 + i * dx, y0 + j * dy});
  auto vid = [m](int i, int j) { return j * (m + 1) + i; };

  double amp = 0.18;
  std::vector<Vertex> base = mesh.vertices;
  std::vector<std::pair<double, double>> offsets(base.size());
  for (int j = 0; j <= m; ++j) {
    for (int i = 0; i <= m; ++i) {
      const bool on_x = (i == 0 || i == m), on_y = (j == 0 || j == m);
      double ox = unit(rng), oy = unit(rng);
      if (on_x && on_y) ox = oy = 0.0;  // corners pinned
      else if (on_x) ox = 0.0;          // slide along the vertical boundary
      else if (on_y) oy = 0.0;
      offsets[vid(i, j)] = {ox, oy};
    }
  }
  std::vector<bool> diag_main(static_cast<std::size_t>(m) * m);
  for (auto&& d : diag_main) d = coin(rng);

  // Shrink the jitter until every triangle keeps a healthy positive area.
  for (int attempt = 0; attempt < 16; ++attempt) {
    for (std::size_t v = 0; v < base.size(); ++v) {
      mesh.vertices[v].x = base[v].x + amp * dx * offsets[v].first;
      mesh.vertices[v].y = base[v].y + amp * dy * offsets[v].second;
    }
    mesh.elements.clear();
    for (int j = 0; j < m; ++j) {
      for (int i = 0; i < m; ++i) {
        const int v00 = vid(i, j), v10 = vid(i + 1, j),
                  v11 = vid(i + 1, j + 1), v01 = vid(i, j + 1);
        Element t1, t2;
        t1.id = static_cast<int>(mesh.elements.size());
        t2.id = t1.id + 1;
        if (diag_main[static_cast<std::size_t>(j) * m + i]) {
          t1.v = {v00, v10, v11};
          t2.v = {v00, v11, v01};
        } else {
          t1.v = {v00, v10, v01};
          t2.v = {v10, v11, v01};
        }
        mesh.elements.push_back(t1);
        mesh.elements.push_back(t2);
      }
    }
    bool ok = true;
    const double min_area = 0.05 * dx * dy;
    for (const Element& e : mesh.elements) {
      if (detail::signed_area(mesh.vertex_pos(e.v[0]), mesh.vertex_pos(e.v[1]),
                              mesh.vertex_pos(e.v[2])) < min_area) {
        ok = false;
        break;
      }
    }
    if (ok) break;
    amp *= 0.7;
  }
  build_connectivity(mesh);
  return mesh;
}

/// L-shaped domain (-1,1)^2 minus the closed lower-right quadrant, meshed
/// with m x m cells per quadrant; K = 6 m^2.
inline Mesh generate_lshape(int m) {
  if (m < 1) throw ConfigError("generate_lshape: need m >= 1");
  const int n = 2 * m;
  const double h = 1.0 / m;
  std::vector<int> vmap(static_cast<std::size_t>(n + 1) * (n + 1), -1);
  Mesh mesh;
  auto grid_id = [n](int i, int j) { return j * (n + 1) + i; };
  auto keep_cell = [m](int i, int j) { return !(i >= m && j < m); };
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      const bool used = (keep_cell(std::min(i, n - 1), std::min(j, n - 1))) ||
                        (i > 0 && keep_cell(i - 1, std::min(j, n - 1))) ||
                        (j > 0 && keep_cell(std::min(i, n - 1), j - 1)) ||
                        (i > 0 && j > 0 && keep_cell(i - 1, j - 1));
      if (!used) continue;
      vmap[grid_id(i, j)] = static_cast<int>(mesh.vertices.size());
      mesh.vertices.push_back({vmap[grid_id(i, j)], -1.0 + i * h,
                               -1.0 + j * h});
    }
  }
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (!keep_cell(i, j)) continue;
      const int v00 = vmap[grid_id(i, j)], v10 = vmap[grid_id(i + 1, j)],
                v11 = vmap[grid_id(i + 1, j + 1)],
                v01 = vmap[grid_id(i, j + 1)];
      Element t1, t2;
      t1.id = static_cast<int>(mesh.elements.size());
      t1.v = {v00, v10, v11};
      mesh.elements.push_back(t1);
      t2.id = static_cast<int>(mesh.elements.size());
      t2.v = {v00, v11, v01};
      mesh.elements.push_back(t2);
    }
  }
  build_connectivity(mesh);
  return mesh;
}

namespace detail {

inline Mesh load_native_mesh(std::istream& in) {
  Mesh mesh;
  std::string line;
  int line_no = 0;
  auto next_line = [&](bool required) -> bool {
    while (std::getline(in, line)) {
      ++line_no;
      const auto pos = line.find_first_not_of(" \t\r\n");
      if (pos == std::string::npos) continue;
      if (line[pos] == '#') continue;
      return true;
    }
    if (required)
      throw ConfigError("load_mesh: unexpected end of file at line " +
                        std::to_string(line_no));
    return false;
  };

  next_line(true);
  std::istringstream header(line);
  long long nv = 0, nk = 0;
  if (!(header >> nv >> nk) || nv <= 0 || nk <= 0)
    throw ConfigError("load_mesh: bad header at line " +
                      std::to_string(line_no));

  std::vector<bool> seen(static_cast<std::size_t>(nv), false);
  mesh.vertices.resize(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i) {
    next_line(true);
    std::istringstream ls(line);
    int id;
    double x, y;
    if (!(ls >> id >> x >> y))
      throw ConfigError("load_mesh: bad vertex at line " +
                        std::to_string(line_no));
    if (id < 0 || id >= nv)
      throw ConfigError("load_mesh: vertex id " + std::to_string(id) +
                        " out of range at line " + std::to_string(line_no));
    if (seen[id])
      throw ConfigError("load_mesh: duplicate vertex id " +
                        std::to_string(id) + " at line " +
                        std::to_string(line_no));
    seen[id] = true;
    mesh.vertices[id] = {id, x, y};
  }

  mesh.elements.resize(static_cast<std::size_t>(nk));
  std::vector<bool> eseen(static_cast<std::size_t>(nk), false);
  for (long long i = 0; i < nk; ++i) {
    next_line(true);
    std::istringstream ls(line);
    int id, a, b, c;
    if (!(ls >> id >> a >> b >> c))
      throw ConfigError("load_mesh: bad element at line " +
                        std::to_string(line_no));
    if (id < 0 || id >= nk)
      throw ConfigError("load_mesh: element id " + std::to_string(id) +
                        " out of range at line " + std::to_string(line_no));
    if (eseen[id])
      throw ConfigError("load_mesh: duplicate element id " +
                        std::to_string(id) + " at line " +
                        std::to_string(line_no));
    eseen[id] = true;
    mesh.elements[id].id = id;
    mesh.elements[id].v = {a, b, c};
  }

  while (next_line(false)) {
    std::istringstream ls(line);
    std::string kw;
    int a, b;
    if (!(ls >> kw >> a >> b) || kw != "boundary")
      throw ConfigError("load_mesh: unrecognized trailing line " +
                        std::to_string(line_no));
    mesh.boundary_overrides.push_back({a, b});
  }
  return mesh;
}

inline Mesh load_gmsh_mesh(std::istream& in) {
  Mesh mesh;
  std::string line;
  std::map<long long, int> node_ids;
  while (std::getline(in, line)) {
    if (line.rfind("$Nodes", 0) == 0) {
      long long count;
      in >> count;
      for (long long i = 0; i < count; ++i) {
        long long id;
        double x, y, z;
        if (!(in >> id >> x >> y >> z))
          throw ConfigError("load_mesh: bad gmsh node record");
        if (!node_ids.emplace(id, static_cast<int>(mesh.vertices.size()))
                 .second)
          throw ConfigError("load_mesh: duplicate gmsh node id " +
                            std::to_string(id));
        mesh.vertices.push_back(
            {static_cast<int>(mesh.vertices.size()), x, y});
      }
    } else if (line.rfind("$Elements", 0) == 0) {
      long long count;
      in >> count;
      std::getline(in, line);
      for (long long i = 0; i < count; ++i) {
        if (!std::getline(in, line))
          throw ConfigError("load_mesh: truncated gmsh element section");
        std::istringstream ls(line);
        long long id;
        int type, ntags;
        if (!(ls >> id >> type >> ntags))
          throw ConfigError("load_mesh: bad gmsh element record");
        for (int t = 0; t < ntags; ++t) {
          int dummy;
          ls >> dummy;
        }
        if (type != 2) continue;  // keep 3-node triangles only
        long long a, b, c;
        if (!(ls >> a >> b >> c))
          throw ConfigError("load_mesh: bad gmsh triangle record");
        Element e;
        e.id = static_cast<int>(mesh.elements.size());
        for (int j = 0; j < 3; ++j) {
          const long long ref = (j == 0) ? a : (j == 1) ? b : c;
          auto it = node_ids.find(ref);
          if (it == node_ids.end())
            throw ConfigError("load_mesh: gmsh triangle references missing "
                              "node " +
                              std::to_string(ref));
          e.v[j] = it->second;
        }
        mesh.elements.push_back(e);
      }
    }
  }
  if (mesh.elements.empty())
    throw ConfigError("load_mesh: gmsh file contains no triangles");
  return mesh;
}

}  // namespace detail

inline Mesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("load_mesh: cannot open '" + path + "'");
  std::string first;
  std::getline(in, first);
  in.seekg(0);
  Mesh mesh = (first.rfind("$MeshFormat", 0) == 0)
                  ? detail::load_gmsh_mesh(in)
                  : detail::load_native_mesh(in);
  build_connectivity(mesh);
  return mesh;
}

inline void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << mesh.num_vertices() << " " << mesh.K() << "\n";
  for (const Vertex& v : mesh.vertices) {
    std::ostringstream ls;
    ls.precision(17);
    ls << v.id << " " << v.x << " " << v.y;
    out << ls.str() << "\n";
  }
  for (const Element& e : mesh.elements)
    out << e.id << " " << e.v[0] << " " << e.v[1] << " " << e.v[2] << "\n";
  for (const auto& ov : mesh.boundary_overrides)
    out << "boundary " << ov[0] << " " << ov[1] << "\n";
}

inline void write_mesh(const Mesh& mesh, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("write_mesh: cannot open '" + path + "'");
  write_mesh(mesh, out);
}

namespace detail {

inline bool any_graze(const Mesh& mesh, Axis axis, double w, double tol) {
  for (const Vertex& v : mesh.vertices) {
    const double vw = (axis == Axis::X) ? v.y : v.x;
    if (std::abs(vw - w) <= tol) return true;
  }
  return false;
}

/// One walking attempt. Works in the frame t = sgn*u in which the walk
/// always proceeds toward smaller t (upstream for the left-sided integral,
/// downstream for the right-sided one). Returns nullopt when the ray grazes
/// a vertex or the walk becomes inconsistent; the caller then retries with a
/// perturbed line.
inline std::optional<std::vector<RaySegment>> try_trace(
    const Mesh& mesh, Axis axis, double u_target, double w, int target_elem,
    bool reverse) {
  const double tol = mesh.geom_tol();
  const double sgn = reverse ? -1.0 : 1.0;

  std::vector<RaySegment> out;
  int cur = target_elem;
  double stop_t = sgn * u_target;
  bool first = true;
  int guard = 2 * mesh.K() + 16;
  while (guard-- > 0) {
    if (mesh.line_grazes_vertex(cur, axis, w, tol)) return std::nullopt;
    const auto iv = mesh.clip_line(cur, axis, w);
    if (!iv) return std::nullopt;
    const double t_lo = std::min(sgn * iv->first, sgn * iv->second);
    const double t_hi = std::max(sgn * iv->first, sgn * iv->second);
    if (first) {
      if (stop_t > t_hi + 4.0 * tol || stop_t < t_lo - 4.0 * tol)
        return std::nullopt;
      first = false;
    } else if (stop_t > t_hi + 4.0 * tol) {
      return std::nullopt;  // walk lost the line
    }
    stop_t = std::min(stop_t, t_hi);
    if (stop_t - t_lo > tol) {
      RaySegment s;
      s.elem = cur;
      s.s0 = (sgn > 0) ? t_lo : -stop_t;
      s.s1 = (sgn > 0) ? stop_t : -t_lo;
      out.push_back(s);
    }
    // Face through which the ray leaves at t = t_lo.
    const double u_exit = sgn * t_lo;
    int next = -1;
    for (int f = 0; f < 3; ++f) {
      const Edge& edge = mesh.edges[mesh.edge_of(cur, f)];
      const Vec2 p0 = mesh.vertex_pos(edge.v[0]);
      const Vec2 p1 = mesh.vertex_pos(edge.v[1]);
      const double ew0 = (axis == Axis::X) ? p0.y() : p0.x();
      const double ew1 = (axis == Axis::X) ? p1.y() : p1.x();
      if ((ew0 - w) * (ew1 - w) >= 0.0) continue;
      const double t = (w - ew0) / (ew1 - ew0);
      const double eu0 = (axis == Axis::X) ? p0.x() : p0.y();
      const double eu1 = (axis == Axis::X) ? p1.x() : p1.y();
      if (std::abs(eu0 + t * (eu1 - eu0) - u_exit) <= 4.0 * tol) {
        next = mesh.neighbor_of(cur, f);
        if (next >= 0) break;
      }
    }
    if (next >= 0) {
      cur = next;
      stop_t = t_lo;
      continue;
    }
    // No neighbor: domain entry, crack, or a non-convex gap. Probe for the
    // closest element strictly beyond the exit.
    int resume = -1;
    double best_hi = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < mesh.K(); ++k) {
      if (k == cur) continue;
      if (mesh.line_grazes_vertex(k, axis, w, tol)) return std::nullopt;
      const auto kv = mesh.clip_line(k, axis, w);
      if (!kv) continue;
      const double k_hi = std::max(sgn * kv->first, sgn * kv->second);
      if (k_hi <= t_lo + tol && k_hi > best_hi) {
        best_hi = k_hi;
        resume = k;
      }
    }
    if (resume < 0) break;  // reached the mesh entry
    cur = resume;
    stop_t = best_hi;
  }
  if (guard <= 0) return std::nullopt;
  std::sort(out.begin(), out.end(),
            [](const RaySegment& a, const RaySegment& b) {
              return a.s0 < b.s0;
            });
  return out;
}

/// Brute-force fallback: clip the line against every element.
inline std::vector<RaySegment> trace_brute(const Mesh& mesh, Axis axis,
                                           double u_target, double w,
                                           bool reverse) {
  const double tol = mesh.geom_tol();
  std::vector<RaySegment> segs;
  for (int k = 0; k < mesh.K(); ++k) {
    const auto iv = mesh.clip_line(k, axis, w);
    if (!iv) continue;
    double s0 = iv->first, s1 = iv->second;
    if (!reverse) {
      s1 = std::min(s1, u_target);
    } else {
      s0 = std::max(s0, u_target);
    }
    if (s1 - s0 > tol) segs.push_back({k, s0, s1});
  }
  std::sort(segs.begin(), segs.end(),
            [](const RaySegment& a, const RaySegment& b) {
              return a.s0 < b.s0;
            });
  return segs;
}

}  // namespace detail

/// Ordered ray segments from the inflow boundary to the target (axis X: from
/// x = xmin at the target's height; axis Y: from y = ymin). With `reverse`
/// the ray runs from the target to the outflow boundary instead. Rays that
/// graze mesh vertices are perturbed in the fixed coordinate by multiples of
/// the geometric tolerance; the traversal falls back to brute-force clipping
/// when the adjacency walk fails.
inline std::vector<RaySegment> trace_axis_ray(const Mesh& mesh,
                                              const Vec2& target, Axis axis,
                                              bool reverse = false,
                                              int hint = -1) {
  const double u_target = (axis == Axis::X) ? target.x() : target.y();
  const double w_target = (axis == Axis::X) ? target.y() : target.x();
  const int target_elem = mesh.locate_point(target, hint);
  const double tol = mesh.geom_tol();

  for (int attempt = 0; attempt < 9; ++attempt) {
    const int k = (attempt + 1) / 2;
    const double sign = (attempt % 2 == 1) ? 1.0 : -1.0;
    const double w = (attempt == 0) ? w_target
                                    : w_target + sign * 4.0 * k * tol;
    auto segs =
        detail::try_trace(mesh, axis, u_target, w, target_elem, reverse);
    if (segs) return *segs;
  }
  // Last resort: brute-force clipping on a line free of vertex grazes.
  double w = w_target;
  for (int k = 1; detail::any_graze(mesh, axis, w, tol) && k < 64; ++k)
    w = w_target + 4.0 * k * tol;
  return detail::trace_brute(mesh, axis, u_target, w, reverse);
}

}  // namespace fracdg
