#pragma once

// Simulated vs measured transmon parameters for eight qubits (AQ1..AQ3,
// BQ1..BQ5). Frequencies f_ge and f_r in GHz, alpha and g in MHz.

#include <array>
#include <string>
#include <vector>

#include "fieldforge/analysis.hpp"

namespace device_table {

struct Qubit {
  const char* name;
  double fge_sim, fge_meas;
  double alpha_sim, alpha_meas;
  double fr_sim, fr_meas;
  double g_sim, g_meas;
};

inline const std::array<Qubit, 8>& qubits() {
  static const std::array<Qubit, 8> q{{
      {"AQ1", 4.60, 4.20, 193, 212, 7.12, 6.94, 56, 60},
      {"AQ2", 5.13, 4.65, 171, 180, 7.27, 7.09, 55, 61},
      {"AQ3", 5.61, 5.37, 178, 140, 7.43, 7.21, 48, 54},
      {"BQ1", 4.18, 4.22, 144, 153, 6.34, 6.12, 75, 60},
      {"BQ2", 3.96, 3.90, 142, 154, 6.60, 6.35, 90, 66},
      {"BQ3", 4.33, 4.45, 173, 189, 6.72, 6.47, 88, 70},
      {"BQ4", 3.42, 3.59, 143, 164, 6.82, 6.57, 89, 66},
      {"BQ5", 3.85, 4.10, 178, 210, 6.96, 6.66, 66, 52},
  }};
  return q;
}

/// Rows for one parameter ("fge", "alpha", "fr", "g"), all in MHz.
inline std::vector<fieldforge::ComparisonRow> rows(const std::string& param) {
  std::vector<fieldforge::ComparisonRow> out;
  for (const auto& q : qubits()) {
    if (param == "fge") out.push_back({q.name, q.fge_sim * 1e3, q.fge_meas * 1e3, "MHz"});
    if (param == "alpha") out.push_back({q.name, q.alpha_sim, q.alpha_meas, "MHz"});
    if (param == "fr") out.push_back({q.name, q.fr_sim * 1e3, q.fr_meas * 1e3, "MHz"});
    if (param == "g") out.push_back({q.name, q.g_sim, q.g_meas, "MHz"});
  }
  return out;
}

}  // namespace device_table
