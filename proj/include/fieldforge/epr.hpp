#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fieldforge/constants.hpp"
#include "fieldforge/errors.hpp"

namespace fieldforge {

// All energies below are in joules unless a name ends in _hz (energy / h).

inline double lj_to_ej(double inductance) {
  if (!(inductance > 0.0)) throw ArgumentError("junction inductance must be positive");
  return constants::phi0 * constants::phi0 / inductance;
}

inline double ej_to_lj(double ej) {
  if (!(ej > 0.0)) throw ArgumentError("Josephson energy must be positive");
  return constants::phi0 * constants::phi0 / ej;
}

inline double to_hz(double joules) { return joules / constants::planck; }
inline double to_joules(double hz) { return hz * constants::planck; }

struct JunctionSpec {
  double ej;  // J
  int sign = 1;

  static JunctionSpec from_inductance(double inductance, int sign = 1) { return {lj_to_ej(inductance), sign}; }
  static JunctionSpec from_ej_hz(double ej_hz, int sign = 1) {
    if (!(ej_hz > 0.0)) throw ArgumentError("Josephson energy must be positive");
    return {to_joules(ej_hz), sign};
  }
  double inductance() const { return ej_to_lj(ej); }
  double ej_hz() const { return to_hz(ej); }
};

struct Spectroscopy {
  double ej;  // J
  double ec;  // J
  std::string warning;  // non-empty outside the transmon regime
};

/// Inverts f_ge = (sqrt(8 E_J E_C) - E_C) / h with E_C = h alpha.
inline Spectroscopy ej_from_spectroscopy(double f_ge, double alpha) {
  if (!(f_ge > 0.0)) throw ArgumentError("qubit frequency must be positive");
  if (!(alpha > 0.0)) throw ArgumentError("anharmonicity must be positive");
  Spectroscopy s;
  s.ec = constants::planck * alpha;
  const double a = constants::planck * f_ge + s.ec;
  s.ej = a * a / (8.0 * s.ec);
  if (s.ej / s.ec < 20.0)
    s.warning = "E_J/E_C = " + std::to_string(s.ej / s.ec) + " is outside the transmon regime (E_J >> E_C)";
  return s;
}

/// Forward transmon relation, Hz.
inline double transmon_frequency(double ej, double ec) { return (std::sqrt(8.0 * ej * ec) - ec) / constants::planck; }

enum class ModeRole { qubit, resonator };

struct EprMode {
  double f_lin;  // Hz
  double p;      // junction participation ratio
  ModeRole role = ModeRole::qubit;
};

inline double hbar_omega(double f) { return constants::hbar * 2.0 * constants::pi * f; }

inline void check_mode(const EprMode& m) {
  if (!(m.f_lin > 0.0)) throw ArgumentError("mode frequency must be positive");
  if (!(m.p >= 0.0 && m.p <= 1.0)) throw ArgumentError("participation ratio must lie in [0, 1]");
}

/// S sqrt(p hbar omega / (2 E_J))
inline double zpf_phase(const EprMode& m, const JunctionSpec& j) {
  check_mode(m);
  return j.sign * std::sqrt(m.p * hbar_omega(m.f_lin) / (2.0 * j.ej));
}

/// p = 2 E_J phi^2 / (hbar omega)
inline double participation_from_zpf(double phi, double f_lin, const JunctionSpec& j) {
  return 2.0 * j.ej * phi * phi / hbar_omega(f_lin);
}

/// Inductive junction energy (1/2) L_J I^2 over the mode's electric energy.
inline double participation_from_current(double electric_energy, double inductance, double peak_current) {
  if (!(electric_energy > 0.0)) throw ArgumentError("mode electric energy must be positive");
  if (!(inductance > 0.0)) throw ArgumentError("junction inductance must be positive");
  return 0.5 * inductance * peak_current * peak_current / electric_energy;
}

/// Coupling beyond the rotating-wave approximation, from the dispersive shift.
/// All arguments and the result in Hz.
inline double coupling_g(double chi, double alpha, double f_q, double f_r) {
  if (!(chi >= 0.0 && alpha > 0.0 && f_q > 0.0 && f_r > 0.0))
    throw ArgumentError("coupling_g needs chi >= 0 and positive alpha and frequencies");
  const double delta = f_r - f_q, sigma = f_r + f_q;
  if (!(delta * (delta - alpha) > 0.0))
    throw ArgumentError("coupling_g: qubit and resonator straddle (Delta (Delta - alpha) <= 0); dispersive formula invalid");
  const double bracket = alpha / (delta * (delta - alpha)) + alpha / (sigma * (sigma + alpha));
  return std::sqrt(chi / (2.0 * bracket));
}

struct HamiltonianParams {
  double alpha_q, alpha_r, chi_qr;  // Hz
  double f_q_dressed, f_r;          // Hz
  double g;                         // Hz
  double ej;                        // J
  double phi_zpf_q, phi_zpf_r;
};

/// First-order EPR parameters for one qubit and one resonator mode.
inline HamiltonianParams perturbative_params(const EprMode& qubit, const EprMode& resonator, const JunctionSpec& j) {
  check_mode(qubit);
  check_mode(resonator);
  if (qubit.role == resonator.role) throw ArgumentError("need one qubit mode and one resonator mode");
  const double wq = hbar_omega(qubit.f_lin), wr = hbar_omega(resonator.f_lin);
  HamiltonianParams h;
  h.ej = j.ej;
  h.alpha_q = to_hz(qubit.p * qubit.p * wq * wq / (8.0 * j.ej));
  h.alpha_r = to_hz(resonator.p * resonator.p * wr * wr / (8.0 * j.ej));
  h.chi_qr = to_hz(qubit.p * resonator.p * wq * wr / (4.0 * j.ej));
  h.f_q_dressed = qubit.f_lin - h.alpha_q - 0.5 * h.chi_qr;
  h.f_r = resonator.f_lin;
  h.g = h.chi_qr == 0.0 ? 0.0 : coupling_g(h.chi_qr, h.alpha_q, h.f_q_dressed, h.f_r);
  h.phi_zpf_q = zpf_phase(qubit, j);
  h.phi_zpf_r = zpf_phase(resonator, j);
  return h;
}

struct SpectrumParams {
  double alpha_q = 0, alpha_r = 0, chi_qr = 0;  // Hz
  double f_q_dressed = 0, f_r_dressed = 0;      // Hz
  std::vector<double> levels;                   // lowest eigenvalues relative to the ground state, Hz
};

/// Truncated Fock-space diagonalization of
///   H/h = sum_m f_m a_m^+ a_m - E_J/h [cos(phi) - 1 + phi^2/2],
///   phi = sum_m phi_m (a_m + a_m^+),
/// with the cosine expanded to `order`. Powers of phi are formed with
/// n_max + order + 1 levels per mode and then cut to n_max.
inline SpectrumParams diagonalize_zpf(const std::vector<double>& f_hz, const std::vector<double>& phi, double ej_hz,
                                      int n_max, int order) {
  const std::size_t nm = f_hz.size();
  if (nm < 1 || nm > 2 || phi.size() != nm) throw ArgumentError("diagonalize supports one or two modes");
  if (n_max < 6) throw ArgumentError("diagonalize needs n_max >= 6");
  if (order != 4 && order != 6 && order != 8) throw ArgumentError("expansion order must be 4, 6 or 8");

  const int padded = n_max + order + 1;
  const int dim_p = nm == 1 ? padded : padded * padded;
  auto pidx = [&](int n0, int n1) { return nm == 1 ? n0 : n0 * padded + n1; };

  Eigen::MatrixXd ph = Eigen::MatrixXd::Zero(dim_p, dim_p);
  for (int n0 = 0; n0 < padded; ++n0)
    for (int n1 = 0; n1 < (nm == 1 ? 1 : padded); ++n1) {
      const int i = pidx(n0, n1);
      if (n0 + 1 < padded) {
        const double v = phi[0] * std::sqrt(n0 + 1.0);
        ph(pidx(n0 + 1, n1), i) += v;
        ph(i, pidx(n0 + 1, n1)) += v;
      }
      if (nm == 2 && n1 + 1 < padded) {
        const double v = phi[1] * std::sqrt(n1 + 1.0);
        ph(pidx(n0, n1 + 1), i) += v;
        ph(i, pidx(n0, n1 + 1)) += v;
      }
    }

  Eigen::MatrixXd nonlinear = Eigen::MatrixXd::Zero(dim_p, dim_p);
  const Eigen::MatrixXd ph2 = ph * ph;
  Eigen::MatrixXd power = ph2;
  double factorial = 2.0;
  for (int k = 2; 2 * k <= order; ++k) {
    power = power * ph2;
    factorial *= (2.0 * k - 1.0) * (2.0 * k);
    nonlinear += ((k % 2 == 0) ? -1.0 : 1.0) * ej_hz / factorial * power;
  }

  const int keep = n_max + 1;
  const int dim = nm == 1 ? keep : keep * keep;
  auto tidx = [&](int n0, int n1) { return nm == 1 ? n0 : n0 * keep + n1; };
  Eigen::MatrixXd h(dim, dim);
  for (int a0 = 0; a0 < keep; ++a0)
    for (int a1 = 0; a1 < (nm == 1 ? 1 : keep); ++a1)
      for (int b0 = 0; b0 < keep; ++b0)
        for (int b1 = 0; b1 < (nm == 1 ? 1 : keep); ++b1)
          h(tidx(a0, a1), tidx(b0, b1)) = nonlinear(pidx(a0, a1), pidx(b0, b1));
  for (int a0 = 0; a0 < keep; ++a0)
    for (int a1 = 0; a1 < (nm == 1 ? 1 : keep); ++a1)
      h(tidx(a0, a1), tidx(a0, a1)) += a0 * f_hz[0] + (nm == 2 ? a1 * f_hz[1] : 0.0);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  if (es.info() != Eigen::Success) throw Error("diagonalize: eigensolver failed");

  auto level = [&](int n0, int n1) {
    const int b = tidx(n0, n1);
    Eigen::Index best = 0;
    double overlap = -1.0;
    for (Eigen::Index c = 0; c < es.eigenvalues().size(); ++c) {
      const double o = es.eigenvectors()(b, c) * es.eigenvectors()(b, c);
      if (o > overlap) {
        overlap = o;
        best = c;
      }
    }
    if (overlap < 0.5)
      throw StrongMixingError("diagonalize: state |" + std::to_string(n0) + "," + std::to_string(n1) +
                              "> has maximum overlap " + std::to_string(overlap) +
                              "; increase the detuning or reduce phi_ZPF");
    return es.eigenvalues()(best);
  };

  SpectrumParams out;
  const double e00 = level(0, 0), e10 = level(1, 0), e20 = level(2, 0);
  out.f_q_dressed = e10 - e00;
  out.alpha_q = 2.0 * e10 - e20 - e00;
  if (nm == 2) {
    const double e01 = level(0, 1), e11 = level(1, 1), e02 = level(0, 2);
    out.f_r_dressed = e01 - e00;
    out.alpha_r = 2.0 * e01 - e02 - e00;
    out.chi_qr = e10 + e01 - e11 - e00;
  }
  const double ground = es.eigenvalues()(0);
  for (Eigen::Index c = 0; c < std::min<Eigen::Index>(10, es.eigenvalues().size()); ++c)
    out.levels.push_back(es.eigenvalues()(c) - ground);
  return out;
}

/// Modes are ordered qubit first; a second mode, if given, is the resonator.
inline SpectrumParams diagonalize(const std::vector<EprMode>& modes, const JunctionSpec& j, int n_max = 12,
                                  int order = 4) {
  if (modes.empty() || modes.size() > 2) throw ArgumentError("diagonalize supports one or two modes");
  if (modes.size() == 2 && modes[0].role == modes[1].role) throw ArgumentError("need one qubit and one resonator");
  std::vector<EprMode> ordered = modes;
  if (ordered.size() == 2 && ordered[0].role == ModeRole::resonator) std::swap(ordered[0], ordered[1]);
  std::vector<double> f, phi;
  for (const auto& m : ordered) {
    f.push_back(m.f_lin);
    phi.push_back(zpf_phase(m, j));
  }
  return diagonalize_zpf(f, phi, j.ej_hz(), n_max, order);
}

}  // namespace fieldforge
