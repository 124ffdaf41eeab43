#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "fieldforge/eigenmode.hpp"
#include "fieldforge/electrostatics.hpp"
#include "fieldforge/errors.hpp"
#include "fieldforge/fem.hpp"
#include "fieldforge/msh_io.hpp"
#include "fieldforge/refine.hpp"

namespace fieldforge {

// ---------------------------------------------------------------------------
// Recovery-based error indicators

namespace detail {

// Barycentric coordinates of the local DoF positions (vertices, then edge midpoints).
inline const std::array<std::array<double, 3>, 6>& dof_points() {
  static const std::array<std::array<double, 3>, 6> pts{
      {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0.5, 0.5}, {0.5, 0, 0.5}, {0.5, 0.5, 0}}};
  return pts;
}

}  // namespace detail

/// Zienkiewicz-Zhu indicators. The recovered gradient G is the area-weighted
/// average of element gradients at each DoF position, interpolated with the
/// solution's own basis; eta_K = || sqrt(eps_r) (G - grad u_h) ||_K.
inline std::vector<double> zz_estimate(const Mesh& mesh, const FieldSolution& u,
                                       const std::map<int, double>& coefficient) {
  const DofMap& dofs = u.dofs;
  const int nd = dofs.per_element();
  std::vector<double> gx(dofs.n, 0.0), gy(dofs.n, 0.0), weight(dofs.n, 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double area = element_area(mesh, e);
    for (int a = 0; a < nd; ++a) {
      const auto g = field_gradient(mesh, u, e, detail::dof_points()[a]);
      const int d = dofs.element_dofs[e][a];
      gx[d] += area * g[0];
      gy[d] += area * g[1];
      weight[d] += area;
    }
  }
  for (std::size_t d = 0; d < dofs.n; ++d) {
    gx[d] /= weight[d];
    gy[d] /= weight[d];
  }

  std::vector<double> eta(mesh.num_elements());
  const QuadratureRule& q = quadrature_for(u.order());
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double eps = coefficient_for(coefficient, mesh.region_tags[e]);
    const double area = element_area(mesh, e);
    double s = 0.0;
    for (std::size_t p = 0; p < q.weights.size(); ++p) {
      const auto phi = shape_values(u.order(), q.points[p]);
      double rx = 0.0, ry = 0.0;
      for (int a = 0; a < nd; ++a) {
        rx += phi[a] * gx[dofs.element_dofs[e][a]];
        ry += phi[a] * gy[dofs.element_dofs[e][a]];
      }
      const auto g = field_gradient(mesh, u, e, q.points[p]);
      s += q.weights[p] * area * eps * ((rx - g[0]) * (rx - g[0]) + (ry - g[1]) * (ry - g[1]));
    }
    eta[e] = std::sqrt(std::max(0.0, s));
  }
  return eta;
}

/// sqrt(sum eta_K^2)
inline double estimator_total(const std::vector<double>& eta) {
  long double s = 0.0L;
  for (double v : eta) s += static_cast<long double>(v) * v;
  return std::sqrt(static_cast<double>(s));
}

// ---------------------------------------------------------------------------
// Marking

/// Elements with eta_K >= tau * max eta (none if every indicator is zero).
/// With tau = 1 exactly the maximisers are marked.
inline std::vector<int> mark_threshold(const std::vector<double>& eta, double tau) {
  if (!(tau > 0.0)) throw ArgumentError("threshold marking needs tau > 0");
  const double mx = eta.empty() ? 0.0 : *std::max_element(eta.begin(), eta.end());
  std::vector<int> out;
  if (!(mx > 0.0)) return out;
  for (std::size_t i = 0; i < eta.size(); ++i)
    if (eta[i] >= tau * mx) out.push_back(static_cast<int>(i));
  return out;
}

/// Smallest set, taken in order of decreasing eta (ties: ascending id), whose
/// sum of eta^2 reaches theta times the total. Returned ascending.
inline std::vector<int> mark_dorfler(const std::vector<double>& eta, double theta) {
  if (!(theta > 0.0 && theta <= 1.0)) throw ArgumentError("Dorfler marking needs theta in (0, 1]");
  std::vector<int> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return eta[a] > eta[b]; });
  // The total is accumulated in the same order as the running sum, so the
  // final partial sum equals it exactly.
  double total = 0.0;
  for (int i : order) total += eta[i] * eta[i];
  std::vector<int> out;
  if (!(total > 0.0)) return out;
  double acc = 0.0;
  for (int i : order) {
    if (acc >= theta * total) break;
    acc += eta[i] * eta[i];
    out.push_back(i);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct MarkThreshold {
  double tau = 0.5;
};
struct MarkDorfler {
  double theta = 0.5;
};
struct RefineUniformly {};
using Strategy = std::variant<MarkThreshold, MarkDorfler, RefineUniformly>;

inline std::vector<int> mark(const std::vector<double>& eta, const Strategy& s) {
  if (auto t = std::get_if<MarkThreshold>(&s)) return mark_threshold(eta, t->tau);
  if (auto d = std::get_if<MarkDorfler>(&s)) return mark_dorfler(eta, d->theta);
  std::vector<int> all(eta.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

// ---------------------------------------------------------------------------
// Convergence traces

/// m = dof^(-1/dim)
inline double notional_mesh_size(std::size_t dof, int dim) {
  if (dof == 0) throw ArgumentError("notional_mesh_size: dof must be at least 1");
  const double d = static_cast<double>(dof);
  if (dim == 2) return 1.0 / std::sqrt(d);
  if (dim == 3) return 1.0 / std::cbrt(d);
  throw ArgumentError("notional_mesh_size: dim must be 2 or 3");
}

struct TraceRow {
  int iter;
  std::size_t dof;
  double m;
  double value;
  double estimator;
  double seconds;
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;
  int dim = 2;
  std::string reason;  // "dof budget", "converged" or "iteration limit"
  Mesh mesh;           // final mesh
};

inline void write_trace_csv(const ConvergenceTrace& t, std::ostream& out) {
  out << "iter,dof,m,value,estimator,seconds\n";
  for (const auto& r : t.rows)
    out << r.iter << ',' << r.dof << ',' << detail::format_double(r.m) << ',' << detail::format_double(r.value) << ','
        << detail::format_double(r.estimator) << ',' << detail::format_double(r.seconds) << '\n';
}

struct Extrapolation {
  double value_inf;
  double rate;
  double coefficient;
  double residual;  // rms misfit relative to |value_inf|
};

/// Least-squares fit value = value_inf + C m^p. The rate is found by a scan
/// of the variable-projection residual, then all three parameters are
/// polished with Gauss-Newton.
inline Extrapolation extrapolate(const std::vector<double>& m, const std::vector<double>& v) {
  const std::size_t n = m.size();
  if (n != v.size() || n < 3) throw FitError("extrapolate needs at least three (m, value) pairs");
  const double mmin = *std::min_element(m.begin(), m.end()), mmax = *std::max_element(m.begin(), m.end());
  if (!(mmin > 0.0)) throw FitError("extrapolate needs positive mesh sizes");
  if (mmax - mmin <= 1e-14 * mmax) throw FitError("extrapolate: all rows share one mesh size");

  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double spread = 0.0;
  for (double x : v) spread = std::max(spread, std::abs(x - mean));
  if (spread == 0.0 || spread <= 1e-14 * std::abs(mean)) return {mean, 0.0, 0.0, 0.0};

  // Work in scaled abscissae so m^p stays O(1).
  std::vector<double> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = m[i] / mmax;

  auto linear_fit = [&](double p, double& a, double& c) {
    double s00 = 0, s01 = 0, s11 = 0, b0 = 0, b1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = std::pow(s[i], p);
      s00 += 1;
      s01 += x;
      s11 += x * x;
      b0 += v[i];
      b1 += x * v[i];
    }
    const double det = s00 * s11 - s01 * s01;
    if (std::abs(det) < 1e-300) return std::numeric_limits<double>::infinity();
    a = (s11 * b0 - s01 * b1) / det;
    c = (s00 * b1 - s01 * b0) / det;
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = a + c * std::pow(s[i], p) - v[i];
      r += e * e;
    }
    return r;
  };

  double best_p = 1.0, best_r = std::numeric_limits<double>::infinity(), a = mean, c = 0.0;
  const int steps = 400;
  const double p_lo = 0.05, p_hi = 8.0;
  for (int k = 0; k <= steps; ++k) {
    const double p = p_lo + (p_hi - p_lo) * k / steps;
    double ta, tc;
    const double r = linear_fit(p, ta, tc);
    if (r < best_r) {
      best_r = r;
      best_p = p;
    }
  }
  // Golden-section refinement inside the best grid cell.
  {
    const double h = (p_hi - p_lo) / steps;
    double lo = std::max(p_lo * 0.5, best_p - h), hi = best_p + h;
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo), ta, tc;
    double f1 = linear_fit(x1, ta, tc), f2 = linear_fit(x2, ta, tc);
    for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
      if (f1 < f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = linear_fit(x1, ta, tc);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = linear_fit(x2, ta, tc);
      }
    }
    best_p = 0.5 * (lo + hi);
    linear_fit(best_p, a, c);
  }

  // Gauss-Newton on (a, c, p).
  double p = best_p;
  auto sse = [&](double aa, double cc, double pp) {
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = aa + cc * std::pow(s[i], pp) - v[i];
      r += e * e;
    }
    return r;
  };
  double cur = sse(a, c, p);
  for (int it = 0; it < 50; ++it) {
    Eigen::MatrixXd j(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd r(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double x = std::pow(s[i], p);
      const auto row = static_cast<Eigen::Index>(i);
      j(row, 0) = 1.0;
      j(row, 1) = x;
      j(row, 2) = c * x * std::log(s[i]);
      r(row) = a + c * x - v[i];
    }
    const Eigen::VectorXd step = j.colPivHouseholderQr().solve(-r);
    if (!step.allFinite()) break;
    double lambda = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 30; ++ls, lambda *= 0.5) {
      const double na = a + lambda * step(0), nc = c + lambda * step(1), np = p + lambda * step(2);
      const double ns = sse(na, nc, np);
      if (ns < cur) {
        a = na;
        c = nc;
        p = np;
        improved = cur - ns > 1e-30;
        cur = ns;
        break;
      }
    }
    if (!improved) break;
  }
  const double scale = std::max(std::abs(a), 1e-300);
  return {a, p, c / std::pow(mmax, p), std::sqrt(cur / static_cast<double>(n)) / scale};
}

/// Fit over the last `window` rows of a trace (0: all rows).
inline Extrapolation extrapolate(const ConvergenceTrace& t, std::size_t window = 0) {
  const std::size_t n = t.rows.size();
  const std::size_t first = window == 0 || window >= n ? 0 : n - window;
  std::vector<double> m, v;
  for (std::size_t i = first; i < n; ++i) {
    m.push_back(t.rows[i].m);
    v.push_back(t.rows[i].value);
  }
  return extrapolate(m, v);
}

// ---------------------------------------------------------------------------
// Refine-solve loop

/// Tracks one Maxwell entry of a capacitance problem.
struct CapacitanceProblem {
  Mesh mesh;
  std::vector<int> conductors;
  std::map<int, double> permittivity;
  std::size_t row = 0, col = 0;
  CapacitanceOptions options;
};

/// Tracks one Dirichlet eigenvalue (k^2) or its frequency.
struct EigenProblem {
  Mesh mesh;
  std::vector<int> dirichlet;
  std::size_t mode = 0;
  bool frequency = false;
  CavityOptions options;
};

using AmrProblem = std::variant<CapacitanceProblem, EigenProblem>;

struct AmrOptions {
  Strategy strategy = MarkThreshold{};
  std::size_t max_dof = 200000;
  double target_rel_change = 1e-4;
  int max_iterations = 60;
  int dim = 2;
  bool timing = true;  // false writes 0 in the seconds column
};

/// Raised when a solve fails inside the loop; carries the rows done so far.
class AmrFailure : public Error {
 public:
  AmrFailure(const std::string& what, ConvergenceTrace partial) : Error(what), partial_(std::move(partial)) {}
  const ConvergenceTrace& partial() const noexcept { return partial_; }

 private:
  ConvergenceTrace partial_;
};

namespace detail {

struct LoopStep {
  double value;
  std::vector<double> eta;
  std::size_t dof;
};

inline LoopStep solve_and_estimate(const Mesh& mesh, const CapacitanceProblem& p) {
  CapacitanceOptions o = p.options;
  o.keep_fields = true;
  const CapacitanceMatrix c = capacitance_matrix(mesh, p.conductors, p.permittivity, o);
  std::vector<double> eta(mesh.num_elements(), 0.0);
  for (const auto& f : c.fields) {
    const auto e = zz_estimate(mesh, f, p.permittivity);
    for (std::size_t k = 0; k < eta.size(); ++k) eta[k] = std::hypot(eta[k], e[k]);
  }
  return {c(p.row, p.col), std::move(eta), c.dof};
}

inline LoopStep solve_and_estimate(const Mesh& mesh, const EigenProblem& p) {
  const ModeSet s = cavity_modes(mesh, p.dirichlet, p.mode + 1, p.options);
  const Mode& md = s.modes[p.mode];
  auto eta = zz_estimate(mesh, FieldSolution{s.dofs, md.field}, uniform_coefficient(mesh));
  return {p.frequency ? md.frequency : md.k2, std::move(eta), s.dof};
}

inline std::size_t dof_count(const Mesh& mesh, int order) {
  return order == 1 ? mesh.num_nodes() : mesh.num_nodes() + build_edges(mesh).edges.size();
}

}  // namespace detail

/// Solve, estimate, mark, refine until the next mesh would exceed max_dof or
/// the tracked value changes by less than target_rel_change twice in a row.
inline ConvergenceTrace amr_loop(const AmrProblem& problem, const AmrOptions& opt = {}) {
  ConvergenceTrace trace;
  trace.dim = opt.dim;
  trace.mesh = std::visit([](const auto& p) { return p.mesh; }, problem);
  const int order = std::visit([](const auto& p) { return p.options.order; }, problem);
  int small_changes = 0;
  for (int iter = 0;; ++iter) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::LoopStep step;
    try {
      step = std::visit([&](const auto& p) { return detail::solve_and_estimate(trace.mesh, p); }, problem);
    } catch (const NonConvergenceError& e) {
      trace.reason = "solver failure";
      throw AmrFailure(e.what(), trace);
    }
    const double secs =
        opt.timing ? std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() : 0.0;
    trace.rows.push_back(
        {iter, step.dof, notional_mesh_size(step.dof, opt.dim), step.value, estimator_total(step.eta), secs});

    if (trace.rows.size() >= 2) {
      const double prev = trace.rows[trace.rows.size() - 2].value;
      const double rel = std::abs(step.value - prev) / std::max(std::abs(step.value), 1e-300);
      small_changes = rel < opt.target_rel_change ? small_changes + 1 : 0;
      if (small_changes >= 2) {
        trace.reason = "converged";
        return trace;
      }
    }
    if (step.dof > opt.max_dof) {
      trace.reason = "dof budget";
      return trace;
    }
    if (iter + 1 >= opt.max_iterations) {
      trace.reason = "iteration limit";
      return trace;
    }
    Mesh next = std::holds_alternative<RefineUniformly>(opt.strategy)
                    ? refine_uniform(trace.mesh)
                    : refine_marked(trace.mesh, mark(step.eta, opt.strategy));
    next = snap_boundary(std::move(next));
    if (detail::dof_count(next, order) > opt.max_dof) {
      trace.reason = "dof budget";
      return trace;
    }
    trace.mesh = std::move(next);
  }
}

}  // namespace fieldforge
