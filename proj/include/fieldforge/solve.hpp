#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fieldforge/errors.hpp"
#include "fieldforge/parallel.hpp"
#include "fieldforge/sparse.hpp"

namespace fieldforge {

enum class Preconditioner { jacobi, symmetric_gauss_seidel };

struct SolveOptions {
  double tol = 1e-10;
  std::size_t max_iter = 0;  // 0: 10 n + 100
  Preconditioner preconditioner = Preconditioner::jacobi;
  int workers = 1;
};

struct SolveReport {
  std::size_t iterations = 0;
  double residual = 0.0;  // true ||b - K x|| / ||b|| of the returned x
  double seconds = 0.0;
  int workers = 1;
  std::vector<double> trace;  // relative residual after each iteration, starting at iteration 0
};

struct SolveResult {
  std::vector<double> x;
  SolveReport report;
};

namespace detail {

class PreconditionerOp {
 public:
  PreconditionerOp(const CsrMatrix& a, Preconditioner kind) : a_(a), kind_(kind), diag_(a.diagonal()) {
    for (double d : diag_)
      if (!(d > 0.0)) throw ArgumentError("matrix has a non-positive diagonal entry; not SPD");
  }

  void apply(std::span<const double> r, std::span<double> z, int workers) const {
    const std::size_t n = diag_.size();
    if (kind_ == Preconditioner::jacobi) {
      parallel_for(n, workers, [&](std::size_t i) { z[i] = r[i] / diag_[i]; });
      return;
    }
    // (D + L) D^-1 (D + U) z = r
    for (std::size_t i = 0; i < n; ++i) {
      double s = r[i];
      for (std::size_t k = a_.row_ptr[i]; k < a_.row_ptr[i + 1] && static_cast<std::size_t>(a_.col[k]) < i; ++k)
        s -= a_.val[k] * z[a_.col[k]];
      z[i] = s / diag_[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] *= diag_[i];
    for (std::size_t ii = n; ii-- > 0;) {
      double s = z[ii];
      for (std::size_t k = a_.row_ptr[ii + 1]; k-- > a_.row_ptr[ii] && static_cast<std::size_t>(a_.col[k]) > ii;)
        s -= a_.val[k] * z[a_.col[k]];
      z[ii] = s / diag_[ii];
    }
  }

 private:
  const CsrMatrix& a_;
  Preconditioner kind_;
  std::vector<double> diag_;
};

inline double true_residual(const CsrMatrix& k, std::span<const double> x, std::span<const double> b, int workers) {
  std::vector<double> r(b.size());
  k.multiply(x, r, workers);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = b[i] - r[i];
  return norm2(r, workers);
}

}  // namespace detail

/// Preconditioned conjugate gradients for SPD systems.
///
/// The iterate returned is the minimal-residual smoothed CG sequence, so the
/// residual trace is non-increasing. Convergence is confirmed on the true
/// residual of the returned vector.
inline SolveResult solve_spd(const CsrMatrix& k, std::span<const double> b, const SolveOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  if (k.rows != k.cols || k.rows != b.size()) throw ArgumentError("solve_spd: dimension mismatch");
  if (!(opt.tol > 0.0 && opt.tol < 1.0)) throw ArgumentError("solve_spd: tol must lie in (0, 1)");
  const std::size_t n = b.size();
  const int w = opt.workers;
  SolveResult out;
  out.x.assign(n, 0.0);
  out.report.workers = w;
  auto finish = [&] {
    out.report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
  };
  const double bnorm = norm2(b, w);
  out.report.trace.push_back(bnorm > 0.0 ? 1.0 : 0.0);
  if (bnorm == 0.0) return finish();

  const detail::PreconditionerOp prec(k, opt.preconditioner);
  const std::size_t max_iter = opt.max_iter ? opt.max_iter : 10 * n + 100;

  std::vector<double> x(n, 0.0), r(b.begin(), b.end()), z(n), p(n), q(n);
  std::vector<double> y(n, 0.0), s(b.begin(), b.end()), d(n);  // smoothed iterate and residual
  prec.apply(r, z, w);
  p = z;
  double rz = dot(r, z, w);
  double snorm = bnorm, best = 1.0;
  double target = opt.tol;

  for (std::size_t it = 1; it <= max_iter; ++it) {
    k.multiply(p, q, w);
    const double pq = dot(p, q, w);
    if (pq < 0.0) throw NonConvergenceError("solve_spd: matrix is not positive definite", best, it);
    if (!(pq > 0.0)) throw NonConvergenceError("solve_spd: search direction vanished before reaching tol", best, it);
    const double alpha = rz / pq;
    parallel_for(n, w, [&](std::size_t i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      d[i] = r[i] - s[i];
    });
    const double dd = dot(d, d, w);
    if (dd > 0.0) {
      const double eta = -dot(s, d, w) / dd;
      parallel_for(n, w, [&](std::size_t i) {
        s[i] += eta * d[i];
        y[i] += eta * (x[i] - y[i]);
      });
      snorm = norm2(s, w);
    }
    best = std::min(best, snorm / bnorm);
    out.report.trace.push_back(snorm / bnorm);
    out.report.iterations = it;

    if (snorm <= target * bnorm) {
      const double rel = detail::true_residual(k, y, b, w) / bnorm;
      if (rel <= opt.tol) {
        out.x = y;
        out.report.residual = rel;
        return finish();
      }
      // Recurrence drifted from the true residual; ask for more.
      target *= std::max(0.1, 0.5 * opt.tol / rel);
    }

    prec.apply(r, z, w);
    const double rz_new = dot(r, z, w);
    const double beta = rz_new / rz;
    rz = rz_new;
    parallel_for(n, w, [&](std::size_t i) { p[i] = z[i] + beta * p[i]; });
  }
  throw NonConvergenceError("solve_spd: no convergence after " + std::to_string(max_iter) + " iterations", best,
                            max_iter);
}

// ---------------------------------------------------------------------------
// Generalized symmetric eigenproblem K x = lambda M x

struct EigOptions {
  double sigma = 0.0;
  std::uint64_t seed = 42;
  double residual_tol = 1e-8;
  bool force_dense = false;
  int workers = 1;
};

struct EigResult {
  std::vector<double> values;               // ascending
  std::vector<std::vector<double>> vectors;  // M-orthonormal
  bool dense = false;                       // dense solver was used
};

inline constexpr std::size_t kDenseFallbackLimit = 2000;

inline Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& a) {
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(a.nnz());
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t k = a.row_ptr[i]; k < a.row_ptr[i + 1]; ++k)
      t.emplace_back(static_cast<int>(i), a.col[k], a.val[k]);
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(a.rows), static_cast<Eigen::Index>(a.cols));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

/// Relative eigen-residual ||K x - lambda M x|| / ||K x||.
inline double eigen_residual(const CsrMatrix& k, const CsrMatrix& m, std::span<const double> x, double lambda) {
  std::vector<double> kx = k * x, mx = m * x;
  const double kn = norm2(kx);
  for (std::size_t i = 0; i < kx.size(); ++i) kx[i] -= lambda * mx[i];
  return kn > 0.0 ? norm2(kx) / kn : norm2(kx);
}

namespace detail {

inline void check_pencil(const CsrMatrix& k, const CsrMatrix& m, std::size_t count) {
  if (k.rows != k.cols || m.rows != m.cols || k.rows != m.rows) throw ArgumentError("eigensolver: dimension mismatch");
  if (count < 1) throw ArgumentError("eigensolver: mode count must be at least 1");
  if (count > k.rows) throw ArgumentError("eigensolver: mode count exceeds the system dimension");
}

}  // namespace detail

/// Dense generalized solve; returns the `count` lowest eigenpairs above sigma.
inline EigResult eig_dense(const CsrMatrix& k, const CsrMatrix& m, std::size_t count, double sigma = -1e300) {
  detail::check_pencil(k, m, count);
  const Eigen::MatrixXd kd(to_eigen(k)), md(to_eigen(m));
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(kd, md);
  if (es.info() != Eigen::Success) throw Error("dense generalized eigensolver failed");
  EigResult out;
  out.dense = true;
  for (Eigen::Index j = 0; j < es.eigenvalues().size() && out.values.size() < count; ++j) {
    if (!(es.eigenvalues()(j) > sigma)) continue;
    out.values.push_back(es.eigenvalues()(j));
    const Eigen::VectorXd v = es.eigenvectors().col(j);
    out.vectors.emplace_back(v.data(), v.data() + v.size());
  }
  if (out.values.size() < count) throw ArgumentError("eigensolver: fewer eigenvalues above the shift than requested");
  return out;
}

namespace detail {

struct EigPair {
  double lambda;
  std::vector<double> x;
};

// One shift-invert Lanczos run with full M-reorthogonalization, kept
// M-orthogonal to `locked`. Returns the converged pairs among the `want`
// largest Ritz values of (K - sigma M)^-1 M.
template <class Factor>
std::vector<EigPair> lanczos_run(const CsrMatrix& k, const CsrMatrix& m, const Factor& factor,
                                 const std::vector<EigPair>& locked, const std::vector<std::vector<double>>& locked_mx,
                                 std::size_t want, std::uint64_t seed, const EigOptions& opt) {
  const std::size_t n = k.rows;
  const int w = opt.workers;
  const std::size_t avail = n - locked.size();
  const std::size_t max_dim = std::min(avail, std::max<std::size_t>(2 * want + 40, 80));

  auto m_orthogonalize = [&](std::vector<double>& v, const std::vector<std::vector<double>>& basis,
                             const std::vector<std::vector<double>>& basis_m) {
    for (std::size_t i = 0; i < basis.size(); ++i) {
      const double c = dot(basis_m[i], v, w);
      for (std::size_t t = 0; t < n; ++t) v[t] -= c * basis[i][t];
    }
  };
  std::vector<std::vector<double>> lx;
  for (const auto& p : locked) lx.push_back(p.x);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& t : v) t = uni(rng);

  std::vector<std::vector<double>> q, mq;
  std::vector<double> alpha, beta;
  auto m_norm = [&](const std::vector<double>& x, std::vector<double>& mx) {
    m.multiply(x, mx, w);
    return std::sqrt(std::max(0.0, dot(x, mx, w)));
  };

  for (int pass = 0; pass < 2; ++pass) m_orthogonalize(v, lx, locked_mx);
  std::vector<double> mv(n);
  double nrm = m_norm(v, mv);
  if (!(nrm > 0.0)) return {};
  for (std::size_t t = 0; t < n; ++t) {
    v[t] /= nrm;
    mv[t] /= nrm;
  }

  double tol = 1e-11;
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t j = 0;; ++j) {
    q.push_back(v);
    mq.push_back(mv);
    for (std::size_t t = 0; t < n; ++t) rhs(static_cast<Eigen::Index>(t)) = mv[t];
    const Eigen::VectorXd sol = factor.solve(rhs);
    std::vector<double> u(sol.data(), sol.data() + n);
    const double a = dot(mv, u, w);
    alpha.push_back(a);
    for (std::size_t t = 0; t < n; ++t) u[t] -= a * q[j][t] + (j > 0 ? beta[j - 1] * q[j - 1][t] : 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      m_orthogonalize(u, q, mq);
      m_orthogonalize(u, lx, locked_mx);
    }
    std::vector<double> mu(n);
    const double b = m_norm(u, mu);
    const std::size_t dim = j + 1;
    const bool exhausted = dim >= max_dim || !(b > 1e-13 * std::abs(a));

    if (dim >= want || exhausted) {
      Eigen::MatrixXd t = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
      for (std::size_t i = 0; i < dim; ++i) {
        t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = alpha[i];
        if (i + 1 < dim) {
          t(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i + 1)) = beta[i];
          t(static_cast<Eigen::Index>(i + 1), static_cast<Eigen::Index>(i)) = beta[i];
        }
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
      const Eigen::Index last = static_cast<Eigen::Index>(dim) - 1;
      const std::size_t take = std::min(want, dim);
      bool estimates_ok = true;
      for (std::size_t r = 0; r < take; ++r) {
        const Eigen::Index c = last - static_cast<Eigen::Index>(r);
        const double theta = es.eigenvalues()(c);
        if (std::abs(b * es.eigenvectors()(last, c)) > tol * std::abs(theta)) estimates_ok = false;
      }
      if (estimates_ok || exhausted) {
        std::vector<EigPair> found;
        for (std::size_t r = 0; r < take; ++r) {
          const Eigen::Index c = last - static_cast<Eigen::Index>(r);
          if (!(es.eigenvalues()(c) > 0.0)) continue;
          std::vector<double> x(n, 0.0);
          for (std::size_t i = 0; i < dim; ++i) {
            const double s = es.eigenvectors()(static_cast<Eigen::Index>(i), c);
            for (std::size_t t2 = 0; t2 < n; ++t2) x[t2] += s * q[i][t2];
          }
          std::vector<double> mx(n), kx(n);
          const double mn = m_norm(x, mx);
          for (std::size_t t2 = 0; t2 < n; ++t2) x[t2] /= mn;
          k.multiply(x, kx, w);
          m.multiply(x, mx, w);
          const double rq = dot(x, kx, w) / dot(x, mx, w);
          if (eigen_residual(k, m, x, rq) <= 0.1 * opt.residual_tol) found.push_back({rq, std::move(x)});
        }
        if (found.size() == take || exhausted) return found;
        tol *= 0.01;  // estimates were optimistic; iterate further
      }
    }
    if (exhausted) return {};
    beta.push_back(b);
    for (std::size_t t = 0; t < n; ++t) {
      v[t] = u[t] / b;
      mv[t] = mu[t] / b;
    }
  }
}

}  // namespace detail

/// Lowest `count` eigenpairs of K x = lambda M x above the shift sigma.
///
/// Shift-invert Lanczos with full reorthogonalization. Converged pairs are
/// locked and a fresh run (orthogonal to them) looks for anything missed,
/// which picks up both members of degenerate pairs. Falls back to the dense
/// solver for n <= 2000 when a run stalls.
inline EigResult eig_lowest(const CsrMatrix& k, const CsrMatrix& m, std::size_t count, const EigOptions& opt = {}) {
  detail::check_pencil(k, m, count);
  const std::size_t n = k.rows;
  auto dense = [&] {
    if (n > kDenseFallbackLimit) throw Error("Lanczos stalled and the system is too large for the dense fallback");
    return eig_dense(k, m, count, opt.sigma);
  };
  if (opt.force_dense) return dense();

  Eigen::SparseMatrix<double> shifted = to_eigen(k.plus(m, -opt.sigma));
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factor(shifted);
  if (factor.info() != Eigen::Success) return dense();

  std::vector<detail::EigPair> locked;
  std::vector<std::vector<double>> locked_mx;
  for (std::uint64_t run = 0; locked.size() < n; ++run) {
    const std::size_t want = std::min(n - locked.size(), locked.size() < count ? count - locked.size() : 1);
    auto found = detail::lanczos_run(k, m, factor, locked, locked_mx, want, opt.seed + run, opt);
    if (found.empty()) return dense();
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
    if (locked.size() >= count) {
      std::vector<double> lam;
      for (const auto& p : locked) lam.push_back(p.lambda);
      std::sort(lam.begin(), lam.end());
      const double kth = lam[count - 1];
      if (found.front().lambda >= kth - 1e-12 * std::abs(kth)) break;
    }
    for (auto& p : found) {
      locked_mx.push_back(m * std::span<const double>(p.x));
      locked.push_back(std::move(p));
    }
    if (run > count + 20) return dense();
  }
  std::sort(locked.begin(), locked.end(), [](const auto& a, const auto& b) { return a.lambda < b.lambda; });
  EigResult out;
  for (std::size_t i = 0; i < count; ++i) {
    out.values.push_back(locked[i].lambda);
    out.vectors.push_back(std::move(locked[i].x));
  }
  return out;
}

}  // namespace fieldforge
