// Effective permittivity of a CPW on silicon and the resulting half-wave resonance.

#include <iostream>

#include "fieldforge/eigenmode.hpp"

int main(int argc, char** argv) {
  using namespace fieldforge;
  const double length = argc > 1 ? std::stod(argv[1]) * 1e-3 : 6.012e-3;

  GeometrySpec g;
  g.shape = CpwGeometry{};
  const ResonatorResult r = resonator_pipeline(g, length, Topology::half_wave);
  std::cout << "eps_eff       " << r.eps.eps_eff << "\n"
            << "dof           " << r.eps.dof << "\n"
            << "f (half-wave) " << r.frequency / 1e9 << " GHz\n"
            << "f (quarter)   " << cpw_frequency({length, r.eps.eps_eff, Topology::quarter_wave}) / 1e9 << " GHz\n";
}
