// Adaptive refinement of a coaxial cross-section, compared against 2 pi eps0 / ln(b/a).

#include <cmath>
#include <iostream>

#include "fieldforge/amr.hpp"

int main() {
  using namespace fieldforge;
  GeometrySpec g;
  g.shape = AnnulusGeometry{1.0, std::exp(1.0), 12, 2};

  CapacitanceProblem p;
  p.mesh = generate(g);
  p.conductors = conductor_tags(p.mesh);
  p.permittivity = uniform_coefficient(p.mesh);

  AmrOptions opt;
  opt.max_dof = 50000;
  const ConvergenceTrace trace = amr_loop(p, opt);
  write_trace_csv(trace, std::cout);

  const double exact = 2 * constants::pi * constants::epsilon0;
  std::cout << "# stop: " << trace.reason << ", relative error " << (trace.rows.back().value - exact) / exact << "\n";
  if (trace.rows.size() >= 3) {
    const Extrapolation e = extrapolate(trace, 5);
    std::cout << "# extrapolated " << e.value_inf << " F/m, rate " << e.rate << "\n";
  }
}
