// Maxwell and mutual capacitances of three coplanar strips on silicon.

#include <iostream>

#include "fieldforge/electrostatics.hpp"

int main() {
  using namespace fieldforge;
  GeometrySpec g;
  StripsGeometry s;
  s.count = 3;
  g.shape = s;
  const Mesh mesh = generate(g);

  const CapacitanceMatrix c = capacitance_matrix(mesh, region_permittivity(mesh, g));
  write_capacitance_csv(c, std::cout);

  const MutualView v = mutual_view(c);
  for (const auto& [ij, value] : v.pairs)
    std::cout << "# mutual " << c.conductors[ij.first] << "-" << c.conductors[ij.second] << ": " << value * 1e15
              << " fF/m\n";
  for (std::size_t i = 0; i < c.size(); ++i)
    std::cout << "# to ground " << c.conductors[i] << ": " << v.ground[i] * 1e15 << " fF/m\n";
}
