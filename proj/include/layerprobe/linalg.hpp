#pragma once

// Dense kernels shared by every other module. Row-major 64-bit storage,
// fixed summation order everywhere so results are bit-reproducible.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "layerprobe/error.hpp"

namespace layerprobe {

class Matrix {
 public:
  Matrix() = default;

  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      throw InputError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                       std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    for (double v : data_) {
      if (!std::isfinite(v)) throw InputError("matrix contains a non-finite entry");
    }
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
      if (row.size() != c) throw InputError("ragged initializer for matrix");
      data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  // Copy of rows [begin, begin + count).
  Matrix row_block(std::size_t begin, std::size_t count) const {
    Matrix out(count, cols_);
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * cols_), count * cols_,
                out.data_.begin());
    return out;
  }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Eigenvalues sorted descending.
struct Spectrum {
  std::vector<double> eigenvalues;
};

// Eigenvalues (descending) with matching eigenvectors stored as columns.
struct EigenDecomposition {
  std::vector<double> eigenvalues;
  Matrix vectors;
};

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw InputError("matmul dimension mismatch: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " times " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aik * brow[j];
    }
  }
  return c;
}

// aᵀ·b without materialising the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InputError("matmul_tn dimension mismatch");
  Matrix c(a.cols(), b.cols());
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const auto arow = a.row(k);
    const auto brow = b.row(k);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = arow[i];
      auto out = c.row(i);
      for (std::size_t j = 0; j < b.cols(); ++j) out[j] += aki * brow[j];
    }
  }
  return c;
}

// K = h·hᵀ. Upper triangle computed, then mirrored, so K is exactly symmetric.
inline Matrix gram(const Matrix& h) {
  if (h.rows() == 0) throw InputError("gram of an empty matrix");
  const std::size_t n = h.rows();
  Matrix k(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto hi = h.row(i);
    for (std::size_t j = i; j < n; ++j) {
      const auto hj = h.row(j);
      double s = 0.0;
      for (std::size_t c = 0; c < h.cols(); ++c) s += hi[c] * hj[c];
      k(i, j) = s;
      k(j, i) = s;
    }
  }
  return k;
}

inline double frobenius(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

inline Matrix center_columns(const Matrix& m) {
  Matrix out = m;
  if (m.rows() == 0) return out;
  const double n = static_cast<double>(m.rows());
  for (std::size_t j = 0; j < m.cols(); ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < m.rows(); ++i) mean += m(i, j);
    mean /= n;
    for (std::size_t i = 0; i < m.rows(); ++i) out(i, j) = m(i, j) - mean;
  }
  return out;
}

namespace detail {

constexpr double kSymmetryTolerance = 1e-9;
constexpr double kJacobiTolerance = 1e-12;
constexpr int kJacobiMaxSweeps = 100;

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Checks squareness and symmetry, returning a copy that is exactly symmetric.
inline Matrix symmetrized(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw NumericalError("eigendecomposition needs a square matrix, got " + std::to_string(m.rows()) +
                         "x" + std::to_string(m.cols()));
  }
  double scale = 0.0;
  double asym = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      scale = std::max(scale, std::abs(m(i, j)));
      asym = std::max(asym, std::abs(m(i, j) - m(j, i)));
    }
  }
  if (asym > kSymmetryTolerance * scale) {
    throw NumericalError("matrix is not symmetric (max |m - m^T| = " + std::to_string(asym) + ")");
  }
  Matrix a = m;
  if (asym > 0.0) {
    // Rounding-level asymmetry from forming products is expected; only mention anything larger.
    if (asym > 64.0 * std::numeric_limits<double>::epsilon() * scale) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", asym);
      warn(std::string("symmetrizing slightly asymmetric matrix (max |m - m^T| = ") + buf + ")");
    }
    for (std::size_t i = 0; i < a.rows(); ++i)
      for (std::size_t j = i + 1; j < a.cols(); ++j) {
        const double v = 0.5 * (m(i, j) + m(j, i));
        a(i, j) = v;
        a(j, i) = v;
      }
  }
  return a;
}

// Cyclic Jacobi. Diagonal of `a` holds eigenvalues on return; `v` accumulates rotations.
inline void jacobi_sweeps(Matrix& a, Matrix* v) {
  const std::size_t n = a.rows();
  const double target = kJacobiTolerance * frobenius(a);
  for (int sweep = 0;; ++sweep) {
    const double off = off_diagonal_norm(a);
    if (off <= target) return;
    if (sweep == kJacobiMaxSweeps) {
      throw NumericalError("Jacobi eigensolver did not converge after " +
                           std::to_string(kJacobiMaxSweeps) + " sweeps (off-diagonal norm " +
                           std::to_string(off) + ")");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        double t;
        if (std::abs(theta) > 1e150) {
          t = 0.5 / theta;
        } else {
          t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        }
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        if (v != nullptr) {
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = (*v)(k, p);
            const double vkq = (*v)(k, q);
            (*v)(k, p) = c * vkp - s * vkq;
            (*v)(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
}

}  // namespace detail

inline EigenDecomposition sym_eig_vectors(const Matrix& m) {
  Matrix a = detail::symmetrized(m);
  const std::size_t n = a.rows();
  Matrix v = Matrix::identity(n);
  detail::jacobi_sweeps(a, &v);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  EigenDecomposition out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t j = 0; j < n; ++j) {
    out.eigenvalues[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

inline Spectrum sym_eig(const Matrix& m) {
  Matrix a = detail::symmetrized(m);
  detail::jacobi_sweeps(a, nullptr);
  Spectrum s;
  s.eigenvalues.reserve(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) s.eigenvalues.push_back(a(i, i));
  std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), std::greater<>());
  return s;
}

// Solves a·x = b for symmetric positive definite a (lower triangle is read).
inline Matrix cholesky_solve(const Matrix& a, const Matrix& b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw InputError("cholesky_solve needs a square matrix");
  if (b.rows() != n) throw InputError("cholesky_solve right-hand side has wrong row count");

  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
  const double pivot_floor = static_cast<double>(n) * 2.220446049250313e-16 * max_diag;

  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > pivot_floor)) {
      throw NumericalError("matrix is not positive definite (non-positive pivot at index " +
                           std::to_string(j) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }

  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
      double s = x(i, c);
      for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

}  // namespace layerprobe
