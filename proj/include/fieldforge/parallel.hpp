#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace fieldforge {

/// Worker count used when the caller passes 0: FIELDFORGE_WORKERS, else 1.
inline int resolve_workers(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("FIELDFORGE_WORKERS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return 1;
}

/// Static-schedule loop over [0, n). `body(i)` must only write data owned by i.
template <class Body>
void parallel_for(std::size_t n, int workers, Body&& body) {
  workers = std::max(1, workers);
#ifdef _OPENMP
  if (workers > 1 && n > 1) {
    const long long count = static_cast<long long>(n);
#pragma omp parallel for num_threads(workers) schedule(static)
    for (long long i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) body(i);
}

namespace detail {

// Block length for reductions. Fixed so that the summation tree does not
// depend on the worker count.
inline constexpr std::size_t kReduceBlock = 1024;

inline double pairwise_sum(std::span<const double> v) {
  if (v.empty()) return 0.0;
  std::vector<double> level(v.begin(), v.end());
  while (level.size() > 1) {
    std::vector<double> next((level.size() + 1) / 2);
    for (std::size_t i = 0; i < next.size(); ++i) {
      const std::size_t a = 2 * i;
      next[i] = a + 1 < level.size() ? level[a] + level[a + 1] : level[a];
    }
    level.swap(next);
  }
  return level.front();
}

}  // namespace detail

/// Deterministic reduction of f(i) over [0, n): bitwise identical for any worker count.
template <class Term>
double deterministic_sum(std::size_t n, int workers, Term&& term) {
  const std::size_t blocks = (n + detail::kReduceBlock - 1) / detail::kReduceBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, workers, [&](std::size_t b) {
    const std::size_t lo = b * detail::kReduceBlock;
    const std::size_t hi = std::min(n, lo + detail::kReduceBlock);
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += term(i);
    partial[b] = s;
  });
  return detail::pairwise_sum(partial);
}

inline double dot(std::span<const double> a, std::span<const double> b, int workers = 1) {
  return deterministic_sum(a.size(), workers, [&](std::size_t i) { return a[i] * b[i]; });
}

inline double norm2(std::span<const double> a, int workers = 1) {
  return std::sqrt(dot(a, a, workers));
}

}  // namespace fieldforge
