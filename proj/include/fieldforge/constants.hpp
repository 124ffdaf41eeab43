#pragma once

#include <numbers>

namespace fieldforge::constants {

inline constexpr double hbar = 1.054571817e-34;        // J s
inline constexpr double e_charge = 1.602176634e-19;    // C
inline constexpr double planck = 6.62607015e-34;       // J s
inline constexpr double c_light = 2.99792458e8;        // m/s
inline constexpr double epsilon0 = 8.8541878128e-12;   // F/m
inline constexpr double phi0 = hbar / (2.0 * e_charge);  // reduced flux quantum, Wb
inline constexpr double pi = std::numbers::pi;

inline constexpr double eps_silicon = 11.45;
inline constexpr double eps_vacuum = 1.0;

}  // namespace fieldforge::constants
