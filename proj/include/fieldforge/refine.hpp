#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "fieldforge/errors.hpp"
#include "fieldforge/mesh.hpp"

namespace fieldforge {

namespace detail {

inline Point midpoint(const Point& a, const Point& b) { return {0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}; }

// Appends one node per flagged edge (in edge order) and returns edge -> node index, -1 if unflagged.
inline std::vector<int> add_midpoints(Mesh& out, const EdgeTable& table, const std::vector<char>& flagged) {
  std::vector<int> mid(table.edges.size(), -1);
  for (std::size_t i = 0; i < table.edges.size(); ++i) {
    if (!flagged[i]) continue;
    mid[i] = static_cast<int>(out.nodes.size());
    out.nodes.push_back(midpoint(out.nodes[table.edges[i][0]], out.nodes[table.edges[i][1]]));
  }
  return mid;
}

inline void split_boundary_edges(const Mesh& in, Mesh& out, const EdgeTable& table, const std::vector<int>& mid) {
  out.boundary_edges.clear();
  out.boundary_edges.reserve(in.boundary_edges.size() * 2);
  for (const auto& be : in.boundary_edges) {
    auto id = table.find(be.nodes[0], be.nodes[1]);
    const int m = id ? mid[*id] : -1;
    if (m < 0) {
      out.boundary_edges.push_back(be);
    } else {
      out.boundary_edges.push_back({{be.nodes[0], m}, be.tag});
      out.boundary_edges.push_back({{m, be.nodes[1]}, be.tag});
    }
  }
}

}  // namespace detail

/// Red refinement: every triangle is split into four similar children
/// through its edge midpoints. Children keep the parent's newest-vertex
/// correspondence, so refinement edges stay compatible.
inline Mesh refine_uniform(const Mesh& mesh) {
  const EdgeTable table = build_edges(mesh);
  Mesh out;
  out.nodes = mesh.nodes;
  out.physical_names = mesh.physical_names;
  out.boundary_curves = mesh.boundary_curves;
  const auto mid = detail::add_midpoints(out, table, std::vector<char>(table.edges.size(), 1));

  out.elements.reserve(4 * mesh.num_elements());
  out.region_tags.reserve(4 * mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.elements[e];
    const auto& ed = table.element_edges[e];
    const int m12 = mid[ed[0]], m20 = mid[ed[1]], m01 = mid[ed[2]];
    out.elements.push_back({t[0], m01, m20});
    out.elements.push_back({m01, t[1], m12});
    out.elements.push_back({m20, m12, t[2]});
    out.elements.push_back({m12, m20, m01});
    out.region_tags.insert(out.region_tags.end(), 4, mesh.region_tags[e]);
  }
  detail::split_boundary_edges(mesh, out, table, mid);
  return out;
}

/// Newest-vertex bisection of the marked elements with conforming closure.
///
/// Every marked element has its refinement edge bisected. Closure marks the
/// refinement edge of any element that has a bisected edge, until stable;
/// every element touching a bisected edge is then split along it, so no
/// hanging nodes remain. Elements away from the marked set are copied as-is.
inline Mesh refine_marked(const Mesh& mesh, std::span<const int> marked) {
  const int ne = static_cast<int>(mesh.num_elements());
  for (int e : marked)
    if (e < 0 || e >= ne) throw ArgumentError("refine_marked: element id " + std::to_string(e) + " out of range");
  if (marked.empty()) return mesh;

  const EdgeTable table = build_edges(mesh);
  std::vector<std::vector<int>> edge_elements(table.edges.size());
  for (int e = 0; e < ne; ++e)
    for (int k = 0; k < 3; ++k) edge_elements[table.element_edges[e][k]].push_back(e);

  std::vector<char> flagged(table.edges.size(), 0);
  std::vector<int> work;
  auto flag = [&](int edge) {
    if (flagged[edge]) return;
    flagged[edge] = 1;
    for (int e : edge_elements[edge]) work.push_back(e);
  };
  for (int e : marked) flag(table.element_edges[e][0]);
  while (!work.empty()) {
    const int e = work.back();
    work.pop_back();
    flag(table.element_edges[e][0]);
  }

  Mesh out;
  out.nodes = mesh.nodes;
  out.physical_names = mesh.physical_names;
  out.boundary_curves = mesh.boundary_curves;
  const auto mid = detail::add_midpoints(out, table, flagged);

  auto midpoint_of = [&](int a, int b) -> int {
    auto id = table.find(a, b);
    return id ? mid[*id] : -1;
  };
  // Depth is at most two: grandchildren's refinement edges are new edges.
  std::function<void(std::array<int, 3>, int)> bisect = [&](std::array<int, 3> t, int region) {
    const int m = midpoint_of(t[1], t[2]);
    if (m < 0) {
      out.elements.push_back(t);
      out.region_tags.push_back(region);
      return;
    }
    bisect({m, t[0], t[1]}, region);
    bisect({m, t[2], t[0]}, region);
  };
  for (int e = 0; e < ne; ++e) bisect(mesh.elements[e], mesh.region_tags[e]);

  detail::split_boundary_edges(mesh, out, table, mid);
  return out;
}

/// Moves nodes of curve-carrying boundary tags radially onto their circles.
/// Throws GeometryError if an element would be inverted.
inline Mesh snap_boundary(Mesh mesh) {
  if (mesh.boundary_curves.empty()) return mesh;
  std::vector<char> done(mesh.num_nodes(), 0);
  for (const auto& be : mesh.boundary_edges) {
    auto it = mesh.boundary_curves.find(be.tag);
    if (it == mesh.boundary_curves.end()) continue;
    const Circle& c = it->second;
    for (int v : be.nodes) {
      if (done[v]) continue;
      done[v] = 1;
      Point& p = mesh.nodes[v];
      const double r = std::hypot(p.x - c.center.x, p.y - c.center.y);
      if (r == 0.0) continue;
      p = {c.center.x + (p.x - c.center.x) * c.radius / r, c.center.y + (p.y - c.center.y) * c.radius / r};
    }
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e)
    if (!(element_area(mesh, e) > 0.0)) throw GeometryError("snap_boundary: element inverted by curve projection");
  return mesh;
}

}  // namespace fieldforge
