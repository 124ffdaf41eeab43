#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fieldforge/errors.hpp"

namespace fieldforge {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct BoundaryEdge {
  std::array<int, 2> nodes{};
  int tag = 0;
  friend bool operator==(const BoundaryEdge&, const BoundaryEdge&) = default;
};

/// Name of a physical group. Dimension 1 for boundaries, 2 for regions.
struct PhysicalName {
  int dim = 0;
  std::string name;
  friend bool operator==(const PhysicalName&, const PhysicalName&) = default;
};

/// Circle carried by a boundary tag so that refined boundary nodes can be
/// moved back onto the exact curve (see snap_boundary in refine.hpp).
struct Circle {
  Point center;
  double radius = 0.0;
};

/// Conforming triangle mesh.
///
/// Elements are counterclockwise. Vertex 0 of each element is its newest
/// vertex: the refinement edge used by bisection is the opposite edge (1, 2).
struct Mesh {
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> elements;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<int> region_tags;
  std::map<int, PhysicalName> physical_names;
  std::map<int, Circle> boundary_curves;

  std::size_t num_nodes() const { return nodes.size(); }
  std::size_t num_elements() const { return elements.size(); }

  /// Looks a tag up by full physical name ("conductor:inner") or by the part
  /// after the colon ("inner").
  std::optional<int> find_tag(std::string_view name) const {
    for (const auto& [tag, pn] : physical_names)
      if (pn.name == name) return tag;
    for (const auto& [tag, pn] : physical_names) {
      const auto colon = pn.name.find(':');
      if (colon != std::string::npos && std::string_view(pn.name).substr(colon + 1) == name)
        return tag;
    }
    return std::nullopt;
  }

  int require_tag(std::string_view name) const {
    if (auto t = find_tag(name)) return *t;
    throw ConfigError("unknown physical name '" + std::string(name) + "'");
  }

  std::string tag_name(int tag) const {
    auto it = physical_names.find(tag);
    return it == physical_names.end() ? std::to_string(tag) : it->second.name;
  }
};

inline double signed_area(const Point& a, const Point& b, const Point& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

inline double element_area(const Mesh& m, std::size_t e) {
  const auto& t = m.elements[e];
  return signed_area(m.nodes[t[0]], m.nodes[t[1]], m.nodes[t[2]]);
}

/// Compensated sum, so that meshes with very different element sizes still
/// report a total area accurate to a few ulps.
inline double total_area(const Mesh& m) {
  long double s = 0.0L;
  for (std::size_t e = 0; e < m.num_elements(); ++e) s += element_area(m, e);
  return static_cast<double>(s);
}

inline Point centroid(const Mesh& m, std::size_t e) {
  const auto& t = m.elements[e];
  return {(m.nodes[t[0]].x + m.nodes[t[1]].x + m.nodes[t[2]].x) / 3.0,
          (m.nodes[t[0]].y + m.nodes[t[1]].y + m.nodes[t[2]].y) / 3.0};
}

inline double distance(const Point& a, const Point& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Unique undirected edges, sorted by (min node, max node).
///
/// Local edge k of an element is the edge opposite local vertex k.
struct EdgeTable {
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> element_edges;
  std::vector<int> element_count;  // number of elements sharing each edge

  std::optional<int> find(int a, int b) const {
    const std::array<int, 2> key{std::min(a, b), std::max(a, b)};
    auto it = std::lower_bound(edges.begin(), edges.end(), key);
    if (it == edges.end() || *it != key) return std::nullopt;
    return static_cast<int>(it - edges.begin());
  }
};

inline std::array<int, 2> local_edge(const std::array<int, 3>& t, int k) {
  return {t[(k + 1) % 3], t[(k + 2) % 3]};
}

inline EdgeTable build_edges(const Mesh& m) {
  struct Entry {
    std::array<int, 2> key;
    int element;
    int local;
  };
  std::vector<Entry> all;
  all.reserve(3 * m.num_elements());
  for (std::size_t e = 0; e < m.num_elements(); ++e)
    for (int k = 0; k < 3; ++k) {
      auto [a, b] = local_edge(m.elements[e], k);
      all.push_back({{std::min(a, b), std::max(a, b)}, static_cast<int>(e), k});
    }
  std::sort(all.begin(), all.end(), [](const Entry& l, const Entry& r) {
    if (l.key != r.key) return l.key < r.key;
    return l.element < r.element;
  });

  EdgeTable table;
  table.element_edges.resize(m.num_elements());
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i == 0 || all[i].key != all[i - 1].key) {
      table.edges.push_back(all[i].key);
      table.element_count.push_back(0);
    }
    const int id = static_cast<int>(table.edges.size()) - 1;
    table.element_edges[all[i].element][all[i].local] = id;
    ++table.element_count[id];
  }
  return table;
}

/// Edge-count audit of the mesh invariants. All counters are zero for a valid mesh.
struct MeshAudit {
  std::size_t non_positive_elements = 0;
  std::size_t overshared_edges = 0;        // edges in more than two elements
  std::size_t untagged_exterior_edges = 0;  // single-element edges without a boundary edge (hanging nodes)
  std::size_t stray_boundary_edges = 0;     // boundary edges not on exactly one element
  std::size_t unresolved_tags = 0;
  std::size_t bad_indices = 0;

  bool ok() const {
    return non_positive_elements == 0 && overshared_edges == 0 && untagged_exterior_edges == 0 &&
           stray_boundary_edges == 0 && unresolved_tags == 0 && bad_indices == 0;
  }
};

inline MeshAudit audit(const Mesh& m) {
  MeshAudit a;
  const int n = static_cast<int>(m.num_nodes());
  for (const auto& t : m.elements)
    for (int v : t)
      if (v < 0 || v >= n) ++a.bad_indices;
  for (const auto& be : m.boundary_edges)
    for (int v : be.nodes)
      if (v < 0 || v >= n) ++a.bad_indices;
  if (m.region_tags.size() != m.elements.size()) ++a.bad_indices;
  if (a.bad_indices) return a;

  for (std::size_t e = 0; e < m.num_elements(); ++e)
    if (!(element_area(m, e) > 0.0)) ++a.non_positive_elements;

  const EdgeTable table = build_edges(m);
  std::vector<int> tagged(table.edges.size(), 0);
  for (const auto& be : m.boundary_edges) {
    auto id = table.find(be.nodes[0], be.nodes[1]);
    if (!id || table.element_count[*id] != 1) {
      ++a.stray_boundary_edges;
      continue;
    }
    ++tagged[*id];
  }
  for (std::size_t i = 0; i < table.edges.size(); ++i) {
    if (table.element_count[i] > 2) ++a.overshared_edges;
    if (table.element_count[i] == 1 && tagged[i] == 0) ++a.untagged_exterior_edges;
    if (tagged[i] > 1) ++a.stray_boundary_edges;
  }
  for (int tag : m.region_tags)
    if (!m.physical_names.count(tag)) ++a.unresolved_tags;
  for (const auto& be : m.boundary_edges)
    if (!m.physical_names.count(be.tag)) ++a.unresolved_tags;
  return a;
}

inline void validate(const Mesh& m) {
  const MeshAudit a = audit(m);
  if (a.ok()) return;
  std::string msg = "mesh invariant violated:";
  auto add = [&](std::size_t count, const char* what) {
    if (count) msg += " " + std::to_string(count) + " " + what + ";";
  };
  add(a.bad_indices, "bad indices");
  add(a.non_positive_elements, "non-positive elements");
  add(a.overshared_edges, "edges shared by >2 elements");
  add(a.untagged_exterior_edges, "untagged exterior edges");
  add(a.stray_boundary_edges, "stray boundary edges");
  add(a.unresolved_tags, "unresolved tags");
  throw GeometryError(msg);
}

inline double max_edge_length(const Mesh& m) {
  double h = 0.0;
  for (const auto& t : m.elements)
    for (int k = 0; k < 3; ++k) {
      auto [a, b] = local_edge(t, k);
      h = std::max(h, distance(m.nodes[a], m.nodes[b]));
    }
  return h;
}

/// Smallest interior angle over all elements, in radians.
inline double min_angle(const Mesh& m) {
  double best = 4.0;
  for (const auto& t : m.elements)
    for (int k = 0; k < 3; ++k) {
      const Point& p = m.nodes[t[k]];
      const Point& q = m.nodes[t[(k + 1) % 3]];
      const Point& r = m.nodes[t[(k + 2) % 3]];
      const double ux = q.x - p.x, uy = q.y - p.y, vx = r.x - p.x, vy = r.y - p.y;
      best = std::min(best, std::atan2(std::abs(ux * vy - uy * vx), ux * vx + uy * vy));
    }
  return best;
}

/// Boundary nodes carrying `tag`, sorted ascending.
inline std::vector<int> nodes_on_tag(const Mesh& m, int tag) {
  std::vector<int> out;
  for (const auto& be : m.boundary_edges)
    if (be.tag == tag) out.insert(out.end(), be.nodes.begin(), be.nodes.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace fieldforge
