// Transmon-resonator parameters from participation ratios, first order and by diagonalization.

#include <iostream>

#include "fieldforge/epr.hpp"

int main() {
  using namespace fieldforge;
  const JunctionSpec j = JunctionSpec::from_inductance(11e-9);
  const EprMode qubit{6.217e9, 0.99195, ModeRole::qubit};
  const EprMode resonator{9.503e9, 0.00278, ModeRole::resonator};

  const HamiltonianParams h = perturbative_params(qubit, resonator, j);
  std::cout << "E_J        " << j.ej_hz() / 1e9 << " GHz\n"
            << "alpha_q    " << h.alpha_q / 1e6 << " MHz\n"
            << "chi_qr     " << h.chi_qr / 1e6 << " MHz\n"
            << "f_q        " << h.f_q_dressed / 1e9 << " GHz\n"
            << "g          " << h.g / 1e6 << " MHz\n"
            << "phi_zpf_q  " << h.phi_zpf_q << "\n";

  for (int order : {4, 6}) {
    const SpectrumParams s = diagonalize({qubit, resonator}, j, 12, order);
    std::cout << "order " << order << ": alpha_q " << s.alpha_q / 1e6 << " MHz, chi_qr " << s.chi_qr / 1e6
              << " MHz, f_q " << s.f_q_dressed / 1e9 << " GHz\n";
  }
}
