#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "fieldforge/errors.hpp"

namespace fieldforge {

struct ComparisonRow {
  std::string label;
  double simulated;
  double measured;
  std::string unit;
};

enum class RmseMode { absolute, percentage };

/// Percentage mode is relative to the measured value.
inline double rmse(const std::vector<ComparisonRow>& rows, RmseMode mode) {
  if (rows.empty()) throw ArgumentError("rmse needs at least one row");
  double sum = 0.0;
  for (const auto& r : rows) {
    if (r.unit != rows.front().unit) throw ArgumentError("rmse: mixed units (" + r.unit + ", " + rows.front().unit + ")");
    double d = r.simulated - r.measured;
    if (mode == RmseMode::percentage) {
      if (r.measured == 0.0) throw ArgumentError("rmse: percentage mode with a zero measured value (" + r.label + ")");
      d /= r.measured;
    }
    sum += d * d;
  }
  const double v = std::sqrt(sum / rows.size());
  return mode == RmseMode::percentage ? 100.0 * v : v;
}

struct ScalingSample {
  int workers;
  double seconds;
};

struct AmdahlFit {
  double t1;                 // single-worker time, s
  double parallel_fraction;  // f in T(N) = T1 ((1 - f) + f / N)
  double residual;           // ||T_fit - T|| / ||T||
};

/// Least squares in the linear form T = a + b / N with a, b >= 0, so that
/// T1 = a + b and f = b / (a + b) stays inside [0, 1].
inline AmdahlFit amdahl_fit(const std::vector<ScalingSample>& samples) {
  if (samples.size() < 3) throw FitError("amdahl_fit needs at least three samples");
  std::set<int> distinct;
  for (const auto& s : samples) {
    if (s.workers < 1) throw ArgumentError("amdahl_fit: worker count must be >= 1");
    if (!(s.seconds > 0.0)) throw ArgumentError("amdahl_fit: wall time must be positive");
    distinct.insert(s.workers);
  }
  if (distinct.size() < 2) throw FitError("amdahl_fit needs samples at two or more worker counts");

  const Eigen::Index n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(n, 2);
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = 1.0 / samples[i].workers;
    t(i) = samples[i].seconds;
  }
  Eigen::Vector2d x = a.colPivHouseholderQr().solve(t);
  if (x(0) < 0.0 || x(1) < 0.0) {
    // Active set: the better of the two one-parameter fits.
    const double b_only = std::max(0.0, a.col(1).dot(t) / a.col(1).squaredNorm());
    const double a_only = std::max(0.0, t.mean());
    const double rb = (a.col(1) * b_only - t).squaredNorm();
    const double ra = (a.col(0) * a_only - t).squaredNorm();
    x = rb < ra ? Eigen::Vector2d(0.0, b_only) : Eigen::Vector2d(a_only, 0.0);
  }
  const double t1 = x(0) + x(1);
  if (!(t1 > 0.0)) throw FitError("amdahl_fit: degenerate fit");
  return {t1, x(1) / t1, (a * x - t).norm() / t.norm()};
}

}  // namespace fieldforge
