#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "fieldforge/errors.hpp"
#include "fieldforge/parallel.hpp"

namespace fieldforge {

struct Triplet {
  int row;
  int col;
  double value;
};

/// Compressed sparse row matrix with sorted column indices in each row.
struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> row_ptr{0};
  std::vector<int> col;
  std::vector<double> val;

  std::size_t nnz() const { return val.size(); }

  /// y = A x. Rows are independent, so the result does not depend on `workers`.
  void multiply(std::span<const double> x, std::span<double> y, int workers = 1) const {
    parallel_for(rows, workers, [&](std::size_t i) {
      double s = 0.0;
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
      y[i] = s;
    });
  }

  std::vector<double> operator*(std::span<const double> x) const {
    std::vector<double> y(rows);
    multiply(x, y);
    return y;
  }

  double at(std::size_t i, std::size_t j) const {
    auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(first, last, static_cast<int>(j));
    return it != last && *it == static_cast<int>(j) ? val[static_cast<std::size_t>(it - col.begin())] : 0.0;
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(rows, 0.0);
    for (std::size_t i = 0; i < rows; ++i) d[i] = at(i, i);
    return d;
  }

  /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
  double asymmetry() const {
    double amax = 0.0, worst = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) {
        amax = std::max(amax, std::abs(val[k]));
        worst = std::max(worst, std::abs(val[k] - at(static_cast<std::size_t>(col[k]), i)));
      }
    return amax > 0.0 ? worst / amax : 0.0;
  }

  /// Builds from triplets; duplicates are summed in input order.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols, std::vector<Triplet> t) {
    std::stable_sort(t.begin(), t.end(), [](const Triplet& a, const Triplet& b) {
      return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k].row < 0 || t[k].col < 0 || static_cast<std::size_t>(t[k].row) >= rows ||
          static_cast<std::size_t>(t[k].col) >= cols)
        throw ArgumentError("triplet index out of range");
      if (k > 0 && t[k].row == t[k - 1].row && t[k].col == t[k - 1].col) {
        m.val.back() += t[k].value;
        continue;
      }
      m.col.push_back(t[k].col);
      m.val.push_back(t[k].value);
      ++m.row_ptr[t[k].row + 1];
    }
    for (std::size_t i = 0; i < rows; ++i) m.row_ptr[i + 1] += m.row_ptr[i];
    return m;
  }

  static CsrMatrix identity(std::size_t n) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i) t.push_back({static_cast<int>(i), static_cast<int>(i), 1.0});
    return from_triplets(n, n, std::move(t));
  }

  /// Row-major dense input; exact zeros are dropped.
  static CsrMatrix from_dense(std::size_t n, std::span<const double> a) {
    std::vector<Triplet> t;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (a[i * n + j] != 0.0) t.push_back({static_cast<int>(i), static_cast<int>(j), a[i * n + j]});
    return from_triplets(n, n, std::move(t));
  }

  CsrMatrix scaled(double s) const {
    CsrMatrix m = *this;
    for (double& v : m.val) v *= s;
    return m;
  }

  /// A + s B for matrices of equal shape.
  CsrMatrix plus(const CsrMatrix& b, double s = 1.0) const {
    std::vector<Triplet> t;
    t.reserve(nnz() + b.nnz());
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) t.push_back({static_cast<int>(i), col[k], val[k]});
      for (std::size_t k = b.row_ptr[i]; k < b.row_ptr[i + 1]; ++k)
        t.push_back({static_cast<int>(i), b.col[k], s * b.val[k]});
    }
    return from_triplets(rows, cols, std::move(t));
  }

  /// Principal submatrix on `keep` (new index -> old index, ascending).
  CsrMatrix principal(std::span<const int> keep) const {
    std::vector<int> map(cols, -1);
    for (std::size_t i = 0; i < keep.size(); ++i) map[keep[i]] = static_cast<int>(i);
    CsrMatrix m;
    m.rows = m.cols = keep.size();
    m.row_ptr.assign(keep.size() + 1, 0);
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const std::size_t r = static_cast<std::size_t>(keep[i]);
      for (std::size_t k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
        if (map[col[k]] >= 0) {
          m.col.push_back(map[col[k]]);
          m.val.push_back(val[k]);
        }
      m.row_ptr[i + 1] = m.col.size();
    }
    return m;
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

/// x^T A y with a deterministic reduction.
inline double bilinear(const CsrMatrix& a, std::span<const double> x, std::span<const double> y, int workers = 1) {
  std::vector<double> ay(a.rows);
  a.multiply(y, ay, workers);
  return dot(x, ay, workers);
}

}  // namespace fieldforge
