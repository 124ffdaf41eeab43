#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fieldforge/constants.hpp"
#include "fieldforge/errors.hpp"
#include "fieldforge/fem.hpp"
#include "fieldforge/geometry.hpp"
#include "fieldforge/msh_io.hpp"
#include "fieldforge/solve.hpp"

namespace fieldforge {

struct CapacitanceOptions {
  int order = 2;
  double tol = 1e-10;
  /// true: non-conductor boundaries are left free (zero normal field)
  /// instead of grounded.
  bool open_boundary = false;
  bool keep_fields = false;
  Preconditioner preconditioner = Preconditioner::jacobi;
  int workers = 1;
};

/// Maxwell capacitance matrix per unit length (F/m), row-major.
struct CapacitanceMatrix {
  std::vector<std::string> conductors;
  std::vector<int> tags;
  std::vector<double> maxwell;
  /// Same matrix from conductor charges (K u_i summed over conductor j DoFs);
  /// not symmetrized, used to check reciprocity.
  std::vector<double> charge;
  std::vector<FieldSolution> fields;  // filled when keep_fields is set
  std::vector<SolveReport> reports;
  std::size_t dof = 0;

  std::size_t size() const { return conductors.size(); }
  double operator()(std::size_t i, std::size_t j) const { return maxwell[i * size() + j]; }
  double max_abs() const {
    double m = 0.0;
    for (double v : maxwell) m = std::max(m, std::abs(v));
    return m;
  }
};

/// Conductor name without its "conductor:" prefix.
inline std::string conductor_name(const Mesh& mesh, int tag) {
  const std::string full = mesh.tag_name(tag);
  const auto colon = full.find(':');
  return colon == std::string::npos ? full : full.substr(colon + 1);
}

/// Boundary tags whose physical name starts with "conductor:", ascending.
inline std::vector<int> conductor_tags(const Mesh& mesh) {
  std::vector<int> out;
  for (const auto& [tag, pn] : mesh.physical_names)
    if (pn.dim == 1 && pn.name.rfind("conductor:", 0) == 0) out.push_back(tag);
  return out;
}

/// One solve per conductor: 1 V on conductor i, 0 V on the others.
/// C_ij = eps0 * u_i^T K u_j, the cross term of the field energy.
inline CapacitanceMatrix capacitance_matrix(const Mesh& mesh, const std::vector<int>& conductors,
                                            const std::map<int, double>& permittivity,
                                            const CapacitanceOptions& opt = {}) {
  if (conductors.size() < 2) throw ArgumentError("capacitance_matrix needs at least two conductors");
  std::map<int, bool> boundary_tags;
  for (const auto& be : mesh.boundary_edges) boundary_tags[be.tag] = true;
  for (int t : conductors)
    if (!boundary_tags.count(t)) throw ConfigError("conductor tag " + std::to_string(t) + " not present in mesh");

  const SparseSystem base = assemble_stiffness(mesh, permittivity, opt.order, opt.workers);
  const std::size_t nc = conductors.size();
  CapacitanceMatrix c;
  c.tags = conductors;
  c.dof = base.n();
  for (int t : conductors) c.conductors.push_back(conductor_name(mesh, t));

  std::vector<std::vector<int>> conductor_dofs(nc);
  for (std::size_t j = 0; j < nc; ++j) conductor_dofs[j] = boundary_dofs(mesh, base.dofs, conductors[j]);

  std::vector<std::vector<double>> u(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    std::map<int, double> bc;
    if (!opt.open_boundary)
      for (const auto& [tag, _] : boundary_tags) bc[tag] = 0.0;
    for (std::size_t j = 0; j < nc; ++j) bc[conductors[j]] = i == j ? 1.0 : 0.0;
    const SparseSystem sys = apply_dirichlet(base, mesh, bc);
    const ReducedSystem red = reduce(sys);
    SolveOptions so;
    so.tol = opt.tol;
    so.preconditioner = opt.preconditioner;
    so.workers = opt.workers;
    auto res = solve_spd(red.K, red.rhs, so);
    u[i] = expand(sys, red, res.x);
    c.reports.push_back(std::move(res.report));
  }

  c.maxwell.assign(nc * nc, 0.0);
  c.charge.assign(nc * nc, 0.0);
  for (std::size_t i = 0; i < nc; ++i) {
    const std::vector<double> ku = base.K * std::span<const double>(u[i]);
    for (std::size_t j = 0; j < nc; ++j) {
      c.maxwell[i * nc + j] = constants::epsilon0 * dot(u[j], ku, opt.workers);
      double q = 0.0;
      for (int d : conductor_dofs[j]) q += ku[d];
      c.charge[i * nc + j] = constants::epsilon0 * q;
    }
  }
  // Stored symmetric by construction of the bilinear form; average the
  // rounding-level difference away.
  for (std::size_t i = 0; i < nc; ++i)
    for (std::size_t j = i + 1; j < nc; ++j) {
      const double avg = 0.5 * (c.maxwell[i * nc + j] + c.maxwell[j * nc + i]);
      c.maxwell[i * nc + j] = c.maxwell[j * nc + i] = avg;
    }
  if (opt.keep_fields)
    for (auto& ui : u) c.fields.push_back({base.dofs, std::move(ui)});
  return c;
}

/// All conductor tags of the mesh.
inline CapacitanceMatrix capacitance_matrix(const Mesh& mesh, const std::map<int, double>& permittivity,
                                            const CapacitanceOptions& opt = {}) {
  return capacitance_matrix(mesh, conductor_tags(mesh), permittivity, opt);
}

/// Positive mutual capacitances and capacitances to ground.
struct MutualView {
  std::vector<std::string> conductors;
  std::map<std::pair<std::size_t, std::size_t>, double> pairs;  // i < j only
  std::vector<double> ground;

  double mutual(std::size_t i, std::size_t j) const { return pairs.at({std::min(i, j), std::max(i, j)}); }
};

inline MutualView mutual_view(const CapacitanceMatrix& c) {
  MutualView v;
  v.conductors = c.conductors;
  const std::size_t n = c.size();
  v.ground.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      v.ground[i] += c(i, j);
      if (i < j) v.pairs[{i, j}] = -c(i, j);
    }
  return v;
}

/// Upper triangle of the Maxwell matrix, one row per pair, in fF/m.
inline void write_capacitance_csv(const CapacitanceMatrix& c, std::ostream& out) {
  out << "name_i,name_j,value_fF_per_m\n";
  for (std::size_t i = 0; i < c.size(); ++i)
    for (std::size_t j = i; j < c.size(); ++j)
      out << c.conductors[i] << ',' << c.conductors[j] << ',' << detail::format_double(c(i, j) * 1e15) << '\n';
}

struct EffectivePermittivity {
  double eps_eff;
  double c_dielectric;  // F/m, centre conductor self-capacitance
  double c_vacuum;
  std::size_t dof;
};

/// Ratio of the centre-conductor capacitance with the dielectric to its value
/// with every region set to vacuum.
inline EffectivePermittivity effective_permittivity(const Mesh& mesh, const std::map<int, double>& permittivity,
                                                    const CapacitanceOptions& opt = {}) {
  const std::vector<int> cond{mesh.require_tag("conductor:center"), mesh.require_tag("conductor:ground")};
  std::map<int, double> vacuum = permittivity;
  for (auto& [_, eps] : vacuum) eps = 1.0;
  const CapacitanceMatrix with = capacitance_matrix(mesh, cond, permittivity, opt);
  const CapacitanceMatrix without = capacitance_matrix(mesh, cond, vacuum, opt);
  return {with(0, 0) / without(0, 0), with(0, 0), without(0, 0), with.dof};
}

inline EffectivePermittivity effective_permittivity(const GeometrySpec& spec, const CapacitanceOptions& opt = {}) {
  if (geometry_kind(spec) != "cpw_cross_section")
    throw ArgumentError("effective_permittivity needs a cpw_cross_section geometry");
  const Mesh mesh = generate(spec);
  return effective_permittivity(mesh, region_permittivity(mesh, spec), opt);
}

}  // namespace fieldforge
