#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fieldforge/constants.hpp"
#include "fieldforge/electrostatics.hpp"
#include "fieldforge/errors.hpp"
#include "fieldforge/fem.hpp"
#include "fieldforge/solve.hpp"

namespace fieldforge {

struct Mode {
  double k2;         // 1/m^2
  double frequency;  // Hz, c k / (2 pi)
  std::vector<double> field;  // full DoF vector, zero on Dirichlet DoFs
  double electric_energy;     // (1/2) u^T M u with the field M-normalized
  double residual;
  std::string label;
};

struct ModeSet {
  std::vector<Mode> modes;  // ascending frequency
  std::size_t dof = 0;
  int order = 1;
  DofMap dofs;
};

struct CavityOptions {
  int order = 2;
  double sigma = -1.0;  // keeps the shift below the lowest Dirichlet eigenvalue
  std::uint64_t seed = 42;
  int workers = 1;
};

/// Lowest Dirichlet eigenpairs of -Laplace u = k^2 u on the mesh.
inline ModeSet cavity_modes(const Mesh& mesh, const std::vector<int>& dirichlet_tags, std::size_t count,
                            const CavityOptions& opt = {}) {
  if (count < 1) throw ArgumentError("cavity_modes: need at least one mode");
  std::map<int, double> bc;
  for (int t : dirichlet_tags) bc[t] = 0.0;
  SparseSystem sys = assemble_stiffness(mesh, uniform_coefficient(mesh), opt.order, opt.workers);
  sys = apply_dirichlet(std::move(sys), mesh, bc);
  const ReducedSystem red = reduce(sys);
  const CsrMatrix mass = assemble_mass(mesh, opt.order, opt.workers).principal(red.free);
  EigOptions eo;
  eo.sigma = opt.sigma;
  eo.seed = opt.seed;
  eo.workers = opt.workers;
  const EigResult eig = eig_lowest(red.K, mass, count, eo);

  ModeSet out;
  out.dof = sys.n();
  out.order = opt.order;
  out.dofs = sys.dofs;
  for (std::size_t i = 0; i < count; ++i) {
    Mode m;
    m.k2 = eig.values[i];
    m.frequency = constants::c_light * std::sqrt(std::max(0.0, m.k2)) / (2.0 * constants::pi);
    m.residual = eigen_residual(red.K, mass, eig.vectors[i], m.k2);
    m.electric_energy = 0.5 * bilinear(mass, eig.vectors[i], eig.vectors[i]);
    m.field = expand(sys, red, eig.vectors[i]);
    m.label = "mode" + std::to_string(i + 1);
    out.modes.push_back(std::move(m));
  }
  return out;
}

/// x,y,value point cloud of one mode for external plotting.
inline void write_mode_csv(const ModeSet& s, std::size_t mode, std::ostream& out) {
  out << "x,y,value\n";
  const auto& f = s.modes.at(mode).field;
  for (std::size_t i = 0; i < f.size(); ++i)
    out << detail::format_double(s.dofs.coords[i].x) << ',' << detail::format_double(s.dofs.coords[i].y) << ','
        << detail::format_double(f[i]) << '\n';
}

enum class Topology { half_wave, quarter_wave };

struct ResonatorSpec {
  double length;  // m
  double eps_eff;
  Topology topology = Topology::half_wave;
  int harmonic = 1;
};

/// Transmission-line resonance: n c / (2 l sqrt(eps)) for lambda/2,
/// (2n - 1) c / (4 l sqrt(eps)) for lambda/4.
inline double cpw_frequency(const ResonatorSpec& r) {
  if (!(r.length > 0.0)) throw ArgumentError("resonator length must be positive");
  if (!(r.eps_eff >= 1.0)) throw ArgumentError("effective permittivity must be >= 1");
  if (r.harmonic < 1) throw ArgumentError("harmonic index must be >= 1");
  const double v = constants::c_light / std::sqrt(r.eps_eff);
  if (r.topology == Topology::half_wave) return r.harmonic * v / (2.0 * r.length);
  return (2.0 * r.harmonic - 1.0) * v / (4.0 * r.length);
}

struct ResonatorResult {
  double frequency;
  EffectivePermittivity eps;
};

/// Effective permittivity from the FEM cross-section fed into the line model.
inline ResonatorResult resonator_pipeline(const GeometrySpec& cross_section, double length, Topology topology,
                                          const CapacitanceOptions& opt = {}) {
  const EffectivePermittivity e = effective_permittivity(cross_section, opt);
  return {cpw_frequency({length, e.eps_eff, topology, 1}), e};
}

}  // namespace fieldforge
