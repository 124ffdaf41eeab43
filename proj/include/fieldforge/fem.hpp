#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "fieldforge/errors.hpp"
#include "fieldforge/mesh.hpp"
#include "fieldforge/parallel.hpp"
#include "fieldforge/sparse.hpp"

namespace fieldforge {

/// Barycentric quadrature rule on a triangle; weights sum to one.
struct QuadratureRule {
  std::vector<std::array<double, 3>> points;
  std::vector<double> weights;
};

/// Degree-2 rule, used for P1 terms.
inline const QuadratureRule& quadrature3() {
  static const QuadratureRule rule{{{2.0 / 3, 1.0 / 6, 1.0 / 6}, {1.0 / 6, 2.0 / 3, 1.0 / 6}, {1.0 / 6, 1.0 / 6, 2.0 / 3}},
                                   {1.0 / 3, 1.0 / 3, 1.0 / 3}};
  return rule;
}

/// Dunavant degree-5 rule, used for P2 terms.
inline const QuadratureRule& quadrature7() {
  constexpr double a1 = 0.0597158717897698, b1 = 0.4701420641051151, w1 = 0.1323941527885062;
  constexpr double a2 = 0.7974269853530873, b2 = 0.1012865073234563, w2 = 0.1259391805448271;
  static const QuadratureRule rule{{{1.0 / 3, 1.0 / 3, 1.0 / 3},
                                    {a1, b1, b1},
                                    {b1, a1, b1},
                                    {b1, b1, a1},
                                    {a2, b2, b2},
                                    {b2, a2, b2},
                                    {b2, b2, a2}},
                                   {0.225, w1, w1, w1, w2, w2, w2}};
  return rule;
}

inline const QuadratureRule& quadrature_for(int order) { return order == 1 ? quadrature3() : quadrature7(); }

/// Global numbering of Lagrange degrees of freedom.
///
/// P1: one DoF per node. P2: nodes first, then one DoF per edge midpoint in
/// EdgeTable order. Local DoFs 3..5 sit on the edge opposite vertex 0..2.
struct DofMap {
  int order = 1;
  std::size_t n = 0;
  std::vector<std::array<int, 6>> element_dofs;
  std::vector<Point> coords;

  int per_element() const { return order == 1 ? 3 : 6; }
};

inline void check_order(int order) {
  if (order != 1 && order != 2) throw ArgumentError("basis order must be 1 or 2");
}

inline DofMap make_dof_map(const Mesh& mesh, int order) {
  check_order(order);
  DofMap d;
  d.order = order;
  d.coords = mesh.nodes;
  d.element_dofs.resize(mesh.num_elements());
  if (order == 1) {
    for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
      const auto& t = mesh.elements[e];
      d.element_dofs[e] = {t[0], t[1], t[2], -1, -1, -1};
    }
    d.n = mesh.num_nodes();
    return d;
  }
  const EdgeTable table = build_edges(mesh);
  const int nn = static_cast<int>(mesh.num_nodes());
  for (const auto& ed : table.edges)
    d.coords.push_back({0.5 * (mesh.nodes[ed[0]].x + mesh.nodes[ed[1]].x), 0.5 * (mesh.nodes[ed[0]].y + mesh.nodes[ed[1]].y)});
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.elements[e];
    const auto& ed = table.element_edges[e];
    d.element_dofs[e] = {t[0], t[1], t[2], nn + ed[0], nn + ed[1], nn + ed[2]};
  }
  d.n = mesh.num_nodes() + table.edges.size();
  return d;
}

/// Geometry of one straight triangle: area and barycentric gradients.
struct ElementGeometry {
  double area;
  std::array<std::array<double, 2>, 3> grad_lambda;
};

inline ElementGeometry element_geometry(const Mesh& mesh, std::size_t e) {
  const auto& t = mesh.elements[e];
  const Point& p0 = mesh.nodes[t[0]];
  const Point& p1 = mesh.nodes[t[1]];
  const Point& p2 = mesh.nodes[t[2]];
  const double area = signed_area(p0, p1, p2);
  const double s = 1.0 / (2.0 * area);
  return {area,
          {{{(p1.y - p2.y) * s, (p2.x - p1.x) * s}, {(p2.y - p0.y) * s, (p0.x - p2.x) * s},
            {(p0.y - p1.y) * s, (p1.x - p0.x) * s}}}};
}

/// Shape function values at barycentric point `l`.
inline std::array<double, 6> shape_values(int order, const std::array<double, 3>& l) {
  if (order == 1) return {l[0], l[1], l[2], 0, 0, 0};
  return {l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1),
          4 * l[1] * l[2],       4 * l[2] * l[0],       4 * l[0] * l[1]};
}

/// Physical gradients of the shape functions at barycentric point `l`.
inline std::array<std::array<double, 2>, 6> shape_gradients(int order, const ElementGeometry& g,
                                                            const std::array<double, 3>& l) {
  std::array<std::array<double, 2>, 6> out{};
  const auto& gl = g.grad_lambda;
  if (order == 1) {
    for (int i = 0; i < 3; ++i) out[i] = gl[i];
    return out;
  }
  for (int i = 0; i < 3; ++i) out[i] = {(4 * l[i] - 1) * gl[i][0], (4 * l[i] - 1) * gl[i][1]};
  for (int k = 0; k < 3; ++k) {
    const int a = (k + 1) % 3, b = (k + 2) % 3;
    out[3 + k] = {4 * (l[a] * gl[b][0] + l[b] * gl[a][0]), 4 * (l[a] * gl[b][1] + l[b] * gl[a][1])};
  }
  return out;
}

/// Element stiffness, row-major nd x nd, for coefficient `coef`.
inline std::vector<double> element_stiffness(const Mesh& mesh, std::size_t e, int order, double coef) {
  const int nd = order == 1 ? 3 : 6;
  const ElementGeometry g = element_geometry(mesh, e);
  const QuadratureRule& q = quadrature_for(order);
  std::vector<double> k(static_cast<std::size_t>(nd * nd), 0.0);
  for (std::size_t p = 0; p < q.weights.size(); ++p) {
    const auto gr = shape_gradients(order, g, q.points[p]);
    const double w = coef * q.weights[p] * g.area;
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) k[a * nd + b] += w * (gr[a][0] * gr[b][0] + gr[a][1] * gr[b][1]);
  }
  return k;
}

inline std::vector<double> element_mass(const Mesh& mesh, std::size_t e, int order) {
  const int nd = order == 1 ? 3 : 6;
  const double area = element_area(mesh, e);
  const QuadratureRule& q = quadrature_for(order);
  std::vector<double> m(static_cast<std::size_t>(nd * nd), 0.0);
  for (std::size_t p = 0; p < q.weights.size(); ++p) {
    const auto phi = shape_values(order, q.points[p]);
    const double w = q.weights[p] * area;
    for (int a = 0; a < nd; ++a)
      for (int b = 0; b < nd; ++b) m[a * nd + b] += w * phi[a] * phi[b];
  }
  return m;
}

namespace detail {

// Scatters per-element dense blocks into CSR. Each row sums its
// contributions in ascending element order, independent of `workers`.
template <class LocalMatrix>
CsrMatrix assemble_blocks(const DofMap& dofs, int workers, LocalMatrix&& local) {
  const std::size_t ne = dofs.element_dofs.size();
  const int nd = dofs.per_element();
  std::vector<std::vector<double>> blocks(ne);
  parallel_for(ne, workers, [&](std::size_t e) { blocks[e] = local(e); });

  // dof -> (element, local index), element-ascending.
  std::vector<std::size_t> start(dofs.n + 1, 0);
  for (std::size_t e = 0; e < ne; ++e)
    for (int a = 0; a < nd; ++a) ++start[dofs.element_dofs[e][a] + 1];
  for (std::size_t i = 0; i < dofs.n; ++i) start[i + 1] += start[i];
  std::vector<std::pair<int, int>> adj(start.back());
  {
    std::vector<std::size_t> fill(start.begin(), start.end() - 1);
    for (std::size_t e = 0; e < ne; ++e)
      for (int a = 0; a < nd; ++a) adj[fill[dofs.element_dofs[e][a]]++] = {static_cast<int>(e), a};
  }

  std::vector<std::vector<int>> cols(dofs.n);
  parallel_for(dofs.n, workers, [&](std::size_t i) {
    auto& c = cols[i];
    for (std::size_t k = start[i]; k < start[i + 1]; ++k)
      for (int b = 0; b < nd; ++b) c.push_back(dofs.element_dofs[adj[k].first][b]);
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  });

  CsrMatrix m;
  m.rows = m.cols = dofs.n;
  m.row_ptr.assign(dofs.n + 1, 0);
  for (std::size_t i = 0; i < dofs.n; ++i) m.row_ptr[i + 1] = m.row_ptr[i] + cols[i].size();
  m.col.resize(m.row_ptr.back());
  m.val.assign(m.row_ptr.back(), 0.0);
  parallel_for(dofs.n, workers, [&](std::size_t i) {
    std::copy(cols[i].begin(), cols[i].end(), m.col.begin() + static_cast<std::ptrdiff_t>(m.row_ptr[i]));
    const auto first = m.col.begin() + static_cast<std::ptrdiff_t>(m.row_ptr[i]);
    const auto last = m.col.begin() + static_cast<std::ptrdiff_t>(m.row_ptr[i + 1]);
    for (std::size_t k = start[i]; k < start[i + 1]; ++k) {
      const auto [e, a] = adj[k];
      const auto& blk = blocks[e];
      for (int b = 0; b < nd; ++b) {
        const auto pos = std::lower_bound(first, last, dofs.element_dofs[e][b]) - m.col.begin();
        m.val[static_cast<std::size_t>(pos)] += blk[a * nd + b];
      }
    }
  });
  return m;
}

}  // namespace detail

/// Assembled system: stiffness K, optional mass M, and recorded Dirichlet
/// constraints (sorted by DoF). K is never modified by constraints.
struct SparseSystem {
  DofMap dofs;
  CsrMatrix K;
  std::optional<CsrMatrix> M;
  std::vector<std::pair<int, double>> constrained;

  std::size_t n() const { return dofs.n; }
};

inline double coefficient_for(const std::map<int, double>& coefficient, int region) {
  auto it = coefficient.find(region);
  if (it == coefficient.end()) throw ConfigError("no coefficient for region tag " + std::to_string(region));
  return it->second;
}

/// K_ij = sum over elements of the integral of coef * grad(phi_i) . grad(phi_j).
inline SparseSystem assemble_stiffness(const Mesh& mesh, const std::map<int, double>& coefficient, int order,
                                       int workers = 1) {
  check_order(order);
  std::vector<double> coef(mesh.num_elements());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) coef[e] = coefficient_for(coefficient, mesh.region_tags[e]);
  SparseSystem sys;
  sys.dofs = make_dof_map(mesh, order);
  sys.K = detail::assemble_blocks(sys.dofs, workers,
                                  [&](std::size_t e) { return element_stiffness(mesh, e, order, coef[e]); });
  return sys;
}

/// Same coefficient on every region present in the mesh.
inline std::map<int, double> uniform_coefficient(const Mesh& mesh, double value = 1.0) {
  std::map<int, double> c;
  for (int t : mesh.region_tags) c[t] = value;
  return c;
}

inline CsrMatrix assemble_mass(const Mesh& mesh, int order, int workers = 1) {
  check_order(order);
  const DofMap dofs = make_dof_map(mesh, order);
  return detail::assemble_blocks(dofs, workers, [&](std::size_t e) { return element_mass(mesh, e, order); });
}

/// Load vector b_i = integral of f * phi_i.
inline std::vector<double> assemble_load(const Mesh& mesh, const DofMap& dofs,
                                         const std::function<double(double, double)>& f) {
  std::vector<double> b(dofs.n, 0.0);
  const QuadratureRule& q = quadrature_for(dofs.order);
  const int nd = dofs.per_element();
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const auto& t = mesh.elements[e];
    const double area = element_area(mesh, e);
    for (std::size_t p = 0; p < q.weights.size(); ++p) {
      const auto& l = q.points[p];
      const double x = l[0] * mesh.nodes[t[0]].x + l[1] * mesh.nodes[t[1]].x + l[2] * mesh.nodes[t[2]].x;
      const double y = l[0] * mesh.nodes[t[0]].y + l[1] * mesh.nodes[t[1]].y + l[2] * mesh.nodes[t[2]].y;
      const auto phi = shape_values(dofs.order, l);
      const double w = q.weights[p] * area * f(x, y);
      for (int a = 0; a < nd; ++a) b[dofs.element_dofs[e][a]] += w * phi[a];
    }
  }
  return b;
}

/// DoFs lying on boundary edges with `tag` (vertex DoFs and, for P2, edge DoFs).
inline std::vector<int> boundary_dofs(const Mesh& mesh, const DofMap& dofs, int tag) {
  std::vector<int> out;
  std::optional<EdgeTable> table;
  if (dofs.order == 2) table = build_edges(mesh);
  for (const auto& be : mesh.boundary_edges) {
    if (be.tag != tag) continue;
    out.push_back(be.nodes[0]);
    out.push_back(be.nodes[1]);
    if (table) {
      auto id = table->find(be.nodes[0], be.nodes[1]);
      if (id) out.push_back(static_cast<int>(mesh.num_nodes()) + *id);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Records Dirichlet values for every DoF on the given boundary tags.
/// Tags are applied in ascending order, so a DoF shared by two tags takes the
/// value of the larger tag.
inline SparseSystem apply_dirichlet(SparseSystem system, const Mesh& mesh, const std::map<int, double>& bc) {
  std::map<int, double> fixed(system.constrained.begin(), system.constrained.end());
  for (const auto& [tag, value] : bc) {
    bool exists = false;
    for (const auto& be : mesh.boundary_edges)
      if (be.tag == tag) {
        exists = true;
        break;
      }
    if (!exists) throw ConfigError("boundary tag " + std::to_string(tag) + " not present in mesh");
    for (int d : boundary_dofs(mesh, system.dofs, tag)) fixed[d] = value;
  }
  system.constrained.assign(fixed.begin(), fixed.end());
  return system;
}

/// Dirichlet data given by a function of position, evaluated at DoF coordinates.
inline SparseSystem apply_dirichlet(SparseSystem system, const Mesh& mesh, const std::vector<int>& tags,
                                    const std::function<double(double, double)>& g) {
  std::map<int, double> bc;
  for (int t : tags) bc[t] = 0.0;
  system = apply_dirichlet(std::move(system), mesh, bc);
  std::vector<char> on_tags(system.n(), 0);
  for (int t : tags)
    for (int d : boundary_dofs(mesh, system.dofs, t)) on_tags[d] = 1;
  for (auto& [d, v] : system.constrained)
    if (on_tags[d]) v = g(system.dofs.coords[d].x, system.dofs.coords[d].y);
  return system;
}

/// Free-DoF system after symmetric elimination of the constraints:
/// K_ff x_f = load_f - K_fc u_c.
struct ReducedSystem {
  CsrMatrix K;
  std::vector<double> rhs;
  std::vector<int> free;
};

inline ReducedSystem reduce(const SparseSystem& sys, std::span<const double> load = {}) {
  std::vector<double> uc(sys.n(), 0.0);
  std::vector<char> is_fixed(sys.n(), 0);
  for (const auto& [d, v] : sys.constrained) {
    uc[d] = v;
    is_fixed[d] = 1;
  }
  ReducedSystem r;
  for (std::size_t i = 0; i < sys.n(); ++i)
    if (!is_fixed[i]) r.free.push_back(static_cast<int>(i));
  r.K = sys.K.principal(r.free);
  r.rhs.resize(r.free.size());
  for (std::size_t i = 0; i < r.free.size(); ++i) {
    const std::size_t row = static_cast<std::size_t>(r.free[i]);
    double s = load.empty() ? 0.0 : load[row];
    for (std::size_t k = sys.K.row_ptr[row]; k < sys.K.row_ptr[row + 1]; ++k)
      if (is_fixed[sys.K.col[k]]) s -= sys.K.val[k] * uc[sys.K.col[k]];
    r.rhs[i] = s;
  }
  return r;
}

/// Full DoF vector: constrained entries hold exactly their prescribed values.
inline std::vector<double> expand(const SparseSystem& sys, const ReducedSystem& r, std::span<const double> x_free) {
  std::vector<double> u(sys.n(), 0.0);
  for (const auto& [d, v] : sys.constrained) u[d] = v;
  for (std::size_t i = 0; i < r.free.size(); ++i) u[r.free[i]] = x_free[i];
  return u;
}

/// Discrete field on a mesh.
struct FieldSolution {
  DofMap dofs;
  std::vector<double> values;

  int order() const { return dofs.order; }
};

/// Nodal interpolant of a function (vertex and edge-midpoint values).
inline FieldSolution interpolate(const Mesh& mesh, int order, const std::function<double(double, double)>& f) {
  FieldSolution s{make_dof_map(mesh, order), {}};
  s.values.resize(s.dofs.n);
  for (std::size_t i = 0; i < s.dofs.n; ++i) s.values[i] = f(s.dofs.coords[i].x, s.dofs.coords[i].y);
  return s;
}

/// Gradient of the discrete field inside element e at barycentric point l.
inline std::array<double, 2> field_gradient(const Mesh& mesh, const FieldSolution& u, std::size_t e,
                                            const std::array<double, 3>& l) {
  const ElementGeometry g = element_geometry(mesh, e);
  const auto gr = shape_gradients(u.order(), g, l);
  std::array<double, 2> out{0.0, 0.0};
  for (int a = 0; a < u.dofs.per_element(); ++a) {
    const double v = u.values[u.dofs.element_dofs[e][a]];
    out[0] += v * gr[a][0];
    out[1] += v * gr[a][1];
  }
  return out;
}

}  // namespace fieldforge
