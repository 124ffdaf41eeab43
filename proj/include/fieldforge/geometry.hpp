#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "fieldforge/constants.hpp"
#include "fieldforge/errors.hpp"
#include "fieldforge/mesh.hpp"

namespace fieldforge {

/// Axis-aligned box [0, width] x [0, height]. Sides are tagged
/// boundary:left/right/bottom/top; the single region is dielectric:domain.
struct RectangleGeometry {
  double width = 1.0;
  double height = 1.0;
  int nx = 0;  // 0: derive from target_edge_length
  int ny = 0;
};

/// Coaxial cross-section a <= |x| <= b centred at the origin.
/// Tags: conductor:inner, conductor:outer, dielectric:fill.
struct AnnulusGeometry {
  double inner_radius = 1.0;
  double outer_radius = 2.0;
  int n_theta = 0;  // 0: derive from target_edge_length
  int n_radial = 0;
};

/// CPW cross-section inside a grounded box. The centre strip and the two
/// ground planes sit on the substrate surface y = 0 with thickness
/// `conductor_thickness`. The ground planes run out to the box walls and
/// share their potential, so walls and planes carry one tag.
/// Tags: conductor:center, conductor:ground, dielectric:substrate, dielectric:vacuum.
struct CpwGeometry {
  double center_width = 10e-6;
  double gap = 6e-6;
  double ground_width = 500e-6;
  double substrate_thickness = 500e-6;
  double air_height = 500e-6;
  double conductor_thickness = 0.0;  // 0: min(center_width, gap) / 100
};

/// `count` equal strips on a substrate, centred in a grounded box.
/// Tags: conductor:strip1..N, boundary:box, dielectric:substrate, dielectric:vacuum.
struct StripsGeometry {
  int count = 2;
  double strip_width = 10e-6;
  double spacing = 10e-6;
  double thickness = 0.0;  // 0: min(strip_width, spacing) / 100
  double box_width = 200e-6;
  double substrate_thickness = 100e-6;  // 0: vacuum below the strips as well
  double air_height = 100e-6;
};

struct GeometrySpec {
  std::variant<RectangleGeometry, AnnulusGeometry, CpwGeometry, StripsGeometry> shape;
  /// Region name (without the "dielectric:" prefix) -> relative permittivity.
  std::map<std::string, double> permittivity;
  /// Largest element edge length wanted, in metres. 0 lets the rectangle and
  /// annulus use their explicit cell counts.
  double target_edge_length = 0.0;
  /// Grading ratio between neighbouring cells near strip edges.
  double grading = 1.3;
};

inline std::string geometry_kind(const GeometrySpec& spec) {
  return std::visit(
      [](const auto& g) -> std::string {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, RectangleGeometry>) return "rectangle";
        if constexpr (std::is_same_v<T, AnnulusGeometry>) return "annulus";
        if constexpr (std::is_same_v<T, CpwGeometry>) return "cpw_cross_section";
        return "parallel_strips";
      },
      spec.shape);
}

/// Relative permittivity per region tag, from GeometrySpec::permittivity.
/// Regions missing from the map default to vacuum (1) except "substrate" (silicon).
inline std::map<int, double> region_permittivity(const Mesh& mesh, const GeometrySpec& spec) {
  std::map<int, double> out;
  for (const auto& [tag, pn] : mesh.physical_names) {
    if (pn.dim != 2) continue;
    const auto colon = pn.name.find(':');
    const std::string region = colon == std::string::npos ? pn.name : pn.name.substr(colon + 1);
    auto it = spec.permittivity.find(region);
    out[tag] = it != spec.permittivity.end() ? it->second
               : region == "substrate"       ? constants::eps_silicon
                                             : constants::eps_vacuum;
  }
  return out;
}

namespace detail {

inline void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw GeometryError(std::string(what) + " must be positive");
}

/// Points from a to b whose spacing grows linearly away from ends that ask
/// for a fine size (h_a / h_b > 0) and never exceeds h_max.
inline std::vector<double> graded_points(double a, double b, double h_a, double h_b, double h_max, double ratio) {
  const double len = b - a;
  const double growth = std::max(ratio - 1.0, 1e-3);
  auto size_at = [&](double x) {
    double h = h_max;
    if (h_a > 0.0) h = std::min(h, h_a + growth * (x - a));
    if (h_b > 0.0) h = std::min(h, h_b + growth * (b - x));
    return h;
  };
  constexpr int samples = 4000;
  std::vector<double> cumulative(samples + 1, 0.0);
  for (int i = 0; i < samples; ++i) {
    const double x0 = a + len * i / samples, x1 = a + len * (i + 1) / samples;
    cumulative[i + 1] = cumulative[i] + (x1 - x0) * 0.5 * (1.0 / size_at(x0) + 1.0 / size_at(x1));
  }
  const int cells = std::max(1, static_cast<int>(std::ceil(cumulative.back() - 1e-9)));
  std::vector<double> pts{a};
  int j = 0;
  for (int k = 1; k < cells; ++k) {
    const double target = cumulative.back() * k / cells;
    while (cumulative[j + 1] < target) ++j;
    const double t = (target - cumulative[j]) / (cumulative[j + 1] - cumulative[j]);
    pts.push_back(a + len * (j + t) / samples);
  }
  pts.push_back(b);
  return pts;
}

struct Breakpoint {
  double x;
  bool fine;  // a strip edge sits here
};

/// Grid lines along one axis through sorted breakpoints.
inline std::vector<double> axis_lines(const std::vector<Breakpoint>& bps, double h_fine, double h_max, double ratio) {
  std::vector<double> out{bps.front().x};
  for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
    const double a = bps[i].x, b = bps[i + 1].x;
    const double len = b - a;
    auto seg = graded_points(a, b, bps[i].fine ? std::min(h_fine, len) : 0.0,
                             bps[i + 1].fine ? std::min(h_fine, len) : 0.0, std::min(h_max, len), ratio);
    out.insert(out.end(), seg.begin() + 1, seg.end());
  }
  return out;
}

struct GridHole {
  double x0, x1, y0, y1;
  int tag;
};

enum class Side { left, right, bottom, top };

/// Tensor-product grid split into triangles along the (i,j)-(i+1,j+1)
/// diagonal, with rectangular holes (conductors) cut out. Hole boundaries are
/// tagged with the hole tag, the box with side_tag(side).
template <class RegionOf, class SideTag>
Mesh structured_grid(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<GridHole>& holes,
                     RegionOf region_of, SideTag side_tag) {
  const int nx = static_cast<int>(xs.size()) - 1, ny = static_cast<int>(ys.size()) - 1;
  auto hole_of = [&](int i, int j) -> int {
    const double cx = 0.5 * (xs[i] + xs[i + 1]), cy = 0.5 * (ys[j] + ys[j + 1]);
    for (std::size_t h = 0; h < holes.size(); ++h)
      if (cx > holes[h].x0 && cx < holes[h].x1 && cy > holes[h].y0 && cy < holes[h].y1) return static_cast<int>(h);
    return -1;
  };
  std::vector<int> cell_hole(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) cell_hole[static_cast<std::size_t>(j) * nx + i] = hole_of(i, j);
  auto solid = [&](int i, int j) { return i >= 0 && j >= 0 && i < nx && j < ny && cell_hole[static_cast<std::size_t>(j) * nx + i] < 0; };

  // Nodes that touch at least one solid cell, numbered row by row.
  std::vector<int> id(static_cast<std::size_t>(nx + 1) * (ny + 1), -1);
  Mesh mesh;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      if (solid(i, j) || solid(i - 1, j) || solid(i, j - 1) || solid(i - 1, j - 1)) {
        id[static_cast<std::size_t>(j) * (nx + 1) + i] = static_cast<int>(mesh.nodes.size());
        mesh.nodes.push_back({xs[i], ys[j]});
      }
  auto node = [&](int i, int j) { return id[static_cast<std::size_t>(j) * (nx + 1) + i]; };

  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (!solid(i, j)) continue;
      const int p00 = node(i, j), p10 = node(i + 1, j), p11 = node(i + 1, j + 1), p01 = node(i, j + 1);
      const int region = region_of(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]));
      mesh.elements.push_back({p10, p11, p00});
      mesh.elements.push_back({p01, p00, p11});
      mesh.region_tags.insert(mesh.region_tags.end(), 2, region);
    }

  auto neighbour_tag = [&](int i, int j, Side side) {
    if (i < 0 || j < 0 || i >= nx || j >= ny) return side_tag(side);
    return holes[cell_hole[static_cast<std::size_t>(j) * nx + i]].tag;
  };
  // Horizontal then vertical edges, each walked in a fixed order.
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const bool below = solid(i, j - 1), above = solid(i, j);
      if (below == above) continue;
      if (above)
        mesh.boundary_edges.push_back({{node(i, j), node(i + 1, j)}, neighbour_tag(i, j - 1, Side::bottom)});
      else
        mesh.boundary_edges.push_back({{node(i + 1, j), node(i, j)}, neighbour_tag(i, j, Side::top)});
    }
  for (int i = 0; i <= nx; ++i)
    for (int j = 0; j < ny; ++j) {
      const bool left = solid(i - 1, j), right = solid(i, j);
      if (left == right) continue;
      if (right)
        mesh.boundary_edges.push_back({{node(i, j + 1), node(i, j)}, neighbour_tag(i - 1, j, Side::left)});
      else
        mesh.boundary_edges.push_back({{node(i, j), node(i, j + 1)}, neighbour_tag(i, j, Side::right)});
    }
  return mesh;
}

inline Mesh generate_rectangle(const RectangleGeometry& g, const GeometrySpec& spec) {
  require_positive(g.width, "rectangle width");
  require_positive(g.height, "rectangle height");
  int nx = g.nx, ny = g.ny;
  if (nx <= 0 || ny <= 0) {
    require_positive(spec.target_edge_length, "target_edge_length");
    if (spec.target_edge_length > std::min(g.width, g.height))
      throw FeatureResolutionError("target_edge_length exceeds the smallest rectangle side");
    nx = static_cast<int>(std::ceil(g.width / spec.target_edge_length - 1e-9));
    ny = static_cast<int>(std::ceil(g.height / spec.target_edge_length - 1e-9));
  }
  std::vector<double> xs(nx + 1), ys(ny + 1);
  for (int i = 0; i <= nx; ++i) xs[i] = g.width * i / nx;
  for (int j = 0; j <= ny; ++j) ys[j] = g.height * j / ny;
  Mesh mesh = structured_grid(
      xs, ys, {}, [](double, double) { return 100; },
      [](Side s) { return 1 + static_cast<int>(s); });
  mesh.physical_names = {{1, {1, "boundary:left"}},
                         {2, {1, "boundary:right"}},
                         {3, {1, "boundary:bottom"}},
                         {4, {1, "boundary:top"}},
                         {100, {2, "dielectric:domain"}}};
  return mesh;
}

inline Mesh generate_annulus(const AnnulusGeometry& g, const GeometrySpec& spec) {
  require_positive(g.inner_radius, "inner radius");
  require_positive(g.outer_radius, "outer radius");
  if (!(g.inner_radius < g.outer_radius)) throw GeometryError("annulus inner radius must be below the outer radius");
  int nt = g.n_theta, nr = g.n_radial;
  if (nt <= 0 || nr <= 0) {
    require_positive(spec.target_edge_length, "target_edge_length");
    if (spec.target_edge_length > g.outer_radius - g.inner_radius)
      throw FeatureResolutionError("target_edge_length exceeds the annulus width");
    nt = std::max(6, static_cast<int>(std::ceil(2.0 * constants::pi * g.outer_radius / spec.target_edge_length - 1e-9)));
    nr = static_cast<int>(std::ceil((g.outer_radius - g.inner_radius) / spec.target_edge_length - 1e-9));
  }
  if (nt < 3) throw GeometryError("annulus needs at least 3 angular cells");

  Mesh mesh;
  for (int i = 0; i <= nr; ++i) {
    const double r = g.inner_radius + (g.outer_radius - g.inner_radius) * i / nr;
    for (int j = 0; j < nt; ++j) {
      const double th = 2.0 * constants::pi * j / nt;
      mesh.nodes.push_back({r * std::cos(th), r * std::sin(th)});
    }
  }
  auto node = [&](int i, int j) { return i * nt + (j % nt); };
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nt; ++j) {
      const int p00 = node(i, j), p10 = node(i + 1, j), p11 = node(i + 1, j + 1), p01 = node(i, j + 1);
      mesh.elements.push_back({p10, p11, p00});
      mesh.elements.push_back({p01, p00, p11});
      mesh.region_tags.insert(mesh.region_tags.end(), 2, 100);
    }
  for (int j = 0; j < nt; ++j) {
    mesh.boundary_edges.push_back({{node(0, j + 1), node(0, j)}, 1});
    mesh.boundary_edges.push_back({{node(nr, j), node(nr, j + 1)}, 2});
  }
  mesh.physical_names = {{1, {1, "conductor:inner"}}, {2, {1, "conductor:outer"}}, {100, {2, "dielectric:fill"}}};
  mesh.boundary_curves = {{1, {{0.0, 0.0}, g.inner_radius}}, {2, {{0.0, 0.0}, g.outer_radius}}};
  return mesh;
}

// Shared builder for the layered strip geometries (CPW and parallel strips).
struct LayeredLayout {
  double x_min, x_max, y_min, y_max;
  double thickness;
  double feature;
  std::vector<double> x_edges;  // strip edges on the surface
  std::vector<GridHole> holes;
  bool substrate;  // false: the layer below the strips is vacuum
  int box_tag;
};

inline Mesh build_layered(const LayeredLayout& L, const GeometrySpec& spec, std::map<int, PhysicalName> names) {
  // Without a target the far field grades out to a tenth of the domain.
  double h_max = spec.target_edge_length;
  if (h_max <= 0.0) h_max = std::max(L.x_max - L.x_min, L.y_max - L.y_min) / 10.0;
  else if (h_max > L.feature) throw FeatureResolutionError("target_edge_length exceeds the smallest strip or gap width");
  const double h_fine = std::min(h_max, L.feature / 4.0);
  const double ratio = std::max(1.01, spec.grading);

  std::vector<Breakpoint> bx{{L.x_min, false}};
  for (double x : L.x_edges)
    if (x > L.x_min && x < L.x_max) bx.push_back({x, true});
  bx.push_back({L.x_max, false});
  std::sort(bx.begin(), bx.end(), [](const Breakpoint& a, const Breakpoint& b) { return a.x < b.x; });

  const std::vector<Breakpoint> by{{L.y_min, false}, {0.0, true}, {L.thickness, true}, {L.y_max, false}};
  const auto xs = axis_lines(bx, h_fine, h_max, ratio);
  // The conductor layer itself is one cell thick.
  std::vector<double> ys;
  for (std::size_t i = 0; i + 1 < by.size(); ++i) {
    std::vector<double> seg;
    if (by[i].x == 0.0 && by[i + 1].x == L.thickness)
      seg = {0.0, L.thickness};
    else
      seg = axis_lines({by[i], by[i + 1]}, std::max(h_fine, L.thickness), h_max, ratio);
    ys.insert(ys.end(), ys.empty() ? seg.begin() : seg.begin() + 1, seg.end());
  }
  const int substrate_tag = 101, vacuum_tag = 102;
  Mesh mesh = structured_grid(
      xs, ys, L.holes, [&](double, double y) { return L.substrate && y < 0.0 ? substrate_tag : vacuum_tag; },
      [&](Side) { return L.box_tag; });
  if (L.substrate) names[substrate_tag] = {2, "dielectric:substrate"};
  names[vacuum_tag] = {2, "dielectric:vacuum"};
  mesh.physical_names = std::move(names);
  return mesh;
}

inline Mesh generate_cpw(const CpwGeometry& g, const GeometrySpec& spec) {
  require_positive(g.center_width, "center_width");
  require_positive(g.gap, "gap");
  require_positive(g.ground_width, "ground_width");
  require_positive(g.substrate_thickness, "substrate_thickness");
  require_positive(g.air_height, "air_height");
  const double t = g.conductor_thickness > 0.0 ? g.conductor_thickness : std::min(g.center_width, g.gap) / 100.0;
  if (!(t < g.air_height)) throw GeometryError("conductor thickness must be below the air height");
  const double half = 0.5 * g.center_width, outer = half + g.gap + g.ground_width;
  LayeredLayout L{-outer, outer, -g.substrate_thickness, g.air_height, t, std::min(g.center_width, g.gap), {}, {}, true, 2};
  L.x_edges = {-half - g.gap, -half, half, half + g.gap};
  L.holes = {{-half, half, 0.0, t, 1}, {-outer, -half - g.gap, 0.0, t, 2}, {half + g.gap, outer, 0.0, t, 2}};
  return build_layered(L, spec, {{1, {1, "conductor:center"}}, {2, {1, "conductor:ground"}}});
}

inline Mesh generate_strips(const StripsGeometry& g, const GeometrySpec& spec) {
  if (g.count < 1) throw GeometryError("parallel_strips needs at least one strip");
  require_positive(g.strip_width, "strip_width");
  require_positive(g.spacing, "spacing");
  require_positive(g.box_width, "box_width");
  require_positive(g.air_height, "air_height");
  if (g.substrate_thickness < 0.0) throw GeometryError("substrate_thickness must be non-negative");
  const double t = g.thickness > 0.0 ? g.thickness : std::min(g.strip_width, g.spacing) / 100.0;
  const double span = g.count * g.strip_width + (g.count - 1) * g.spacing;
  if (!(span < g.box_width)) throw GeometryError("strips do not fit inside the box");
  if (!(t < g.air_height)) throw GeometryError("strip thickness must be below the air height");
  const bool substrate = g.substrate_thickness > 0.0;
  // Without a substrate the strips float in vacuum, with an equal gap below.
  LayeredLayout L{-0.5 * g.box_width, 0.5 * g.box_width, substrate ? -g.substrate_thickness : -g.air_height,
                  g.air_height, t, std::min(g.strip_width, g.spacing), {}, {}, substrate, 3};
  std::map<int, PhysicalName> names{{3, {1, "boundary:box"}}};
  for (int k = 0; k < g.count; ++k) {
    const double x0 = -0.5 * span + k * (g.strip_width + g.spacing);
    L.x_edges.push_back(x0);
    L.x_edges.push_back(x0 + g.strip_width);
    const int tag = 10 + k;
    L.holes.push_back({x0, x0 + g.strip_width, 0.0, t, tag});
    names[tag] = {1, "conductor:strip" + std::to_string(k + 1)};
  }
  return build_layered(L, spec, std::move(names));
}

}  // namespace detail

/// Builds a conforming mesh for one of the parametric geometry families.
inline Mesh generate(const GeometrySpec& spec) {
  for (const auto& [name, eps] : spec.permittivity)
    if (!(eps >= 1.0)) throw GeometryError("relative permittivity of region '" + name + "' must be >= 1");
  if (spec.target_edge_length < 0.0) throw GeometryError("target_edge_length must be positive");
  Mesh mesh = std::visit(
      [&](const auto& g) -> Mesh {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, RectangleGeometry>) return detail::generate_rectangle(g, spec);
        if constexpr (std::is_same_v<T, AnnulusGeometry>) return detail::generate_annulus(g, spec);
        if constexpr (std::is_same_v<T, CpwGeometry>) return detail::generate_cpw(g, spec);
        if constexpr (std::is_same_v<T, StripsGeometry>) return detail::generate_strips(g, spec);
      },
      spec.shape);
  validate(mesh);
  return mesh;
}

}  // namespace fieldforge
