#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/matrix.hpp"

namespace hetgnn {

/// Compressed sparse row matrix with real weights. Column indices are strictly
/// increasing within each row.
class CsrMatrix {
 public:
  CsrMatrix() : row_ptr_(1, 0) {}
  CsrMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), row_ptr_(rows + 1, 0) {}

  CsrMatrix(std::size_t rows, std::size_t cols, std::vector<std::size_t> row_ptr,
            std::vector<std::uint32_t> col_idx, std::vector<double> values)
      : rows_(rows), cols_(cols), row_ptr_(std::move(row_ptr)), col_idx_(std::move(col_idx)),
        values_(std::move(values)) {
    validate();
  }

  /// Builds from (row, col, value) triplets; duplicates are summed.
  static CsrMatrix from_triplets(std::size_t rows, std::size_t cols,
                                 std::vector<std::tuple<std::size_t, std::size_t, double>> triplets) {
    std::sort(triplets.begin(), triplets.end(), [](const auto& a, const auto& b) {
      return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    std::vector<std::size_t> row_ptr(rows + 1, 0);
    std::vector<std::uint32_t> cols_out;
    std::vector<double> vals;
    cols_out.reserve(triplets.size());
    vals.reserve(triplets.size());
    std::size_t last_r = SIZE_MAX, last_c = SIZE_MAX;
    for (const auto& [r, c, v] : triplets) {
      if (r >= rows || c >= cols) throw RangeError("triplet index outside matrix shape");
      if (r == last_r && c == last_c) {
        vals.back() += v;
        continue;
      }
      cols_out.push_back(static_cast<std::uint32_t>(c));
      vals.push_back(v);
      ++row_ptr[r + 1];
      last_r = r;
      last_c = c;
    }
    for (std::size_t i = 0; i < rows; ++i) row_ptr[i + 1] += row_ptr[i];
    return CsrMatrix(rows, cols, std::move(row_ptr), std::move(cols_out), std::move(vals));
  }

  static CsrMatrix identity(std::size_t n) {
    std::vector<std::size_t> rp(n + 1);
    std::vector<std::uint32_t> ci(n);
    for (std::size_t i = 0; i < n; ++i) {
      rp[i + 1] = i + 1;
      ci[i] = static_cast<std::uint32_t>(i);
    }
    return CsrMatrix(n, n, std::move(rp), std::move(ci), std::vector<double>(n, 1.0));
  }

  static CsrMatrix from_dense(const Matrix& d) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j)
        if (d(i, j) != 0.0) t.emplace_back(i, j, d(i, j));
    return from_triplets(d.rows(), d.cols(), std::move(t));
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return col_idx_.size(); }

  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::uint32_t>& col_idx() const noexcept { return col_idx_; }
  const std::vector<double>& values() const noexcept { return values_; }
  std::vector<double>& values() noexcept { return values_; }

  std::size_t row_begin(std::size_t r) const noexcept { return row_ptr_[r]; }
  std::size_t row_end(std::size_t r) const noexcept { return row_ptr_[r + 1]; }
  std::size_t row_nnz(std::size_t r) const noexcept { return row_ptr_[r + 1] - row_ptr_[r]; }

  double at(std::size_t r, std::size_t c) const {
    const auto b = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r]);
    const auto e = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[r + 1]);
    const auto it = std::lower_bound(b, e, static_cast<std::uint32_t>(c));
    return (it != e && *it == c) ? values_[static_cast<std::size_t>(it - col_idx_.begin())] : 0.0;
  }

  Matrix to_dense() const {
    Matrix d(rows_, cols_);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) d(r, col_idx_[k]) += values_[k];
    return d;
  }

  CsrMatrix transpose() const {
    std::vector<std::size_t> rp(cols_ + 1, 0);
    for (auto c : col_idx_) ++rp[c + 1];
    for (std::size_t i = 0; i < cols_; ++i) rp[i + 1] += rp[i];
    std::vector<std::uint32_t> ci(nnz());
    std::vector<double> v(nnz());
    std::vector<std::size_t> cursor(rp.begin(), rp.end() - 1);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        const std::size_t dst = cursor[col_idx_[k]]++;
        ci[dst] = static_cast<std::uint32_t>(r);
        v[dst] = values_[k];
      }
    return CsrMatrix(cols_, rows_, std::move(rp), std::move(ci), std::move(v));
  }

  bool is_symmetric(double tol = 0.0) const {
    if (rows_ != cols_) return false;
    const CsrMatrix t = transpose();
    if (t.row_ptr_ != row_ptr_ || t.col_idx_ != col_idx_) return false;
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (std::abs(t.values_[k] - values_[k]) > tol) return false;
    return true;
  }

  /// Same structure, every weight set to 1.
  CsrMatrix binarized() const {
    CsrMatrix b = *this;
    std::fill(b.values_.begin(), b.values_.end(), 1.0);
    return b;
  }

  std::vector<double> row_sums() const {
    std::vector<double> s(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r)
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) s[r] += values_[k];
    return s;
  }

  void validate() const {
    if (row_ptr_.size() != rows_ + 1 || row_ptr_.front() != 0 || row_ptr_.back() != col_idx_.size() ||
        values_.size() != col_idx_.size())
      throw ShapeError("inconsistent CSR arrays");
    for (std::size_t r = 0; r < rows_; ++r) {
      if (row_ptr_[r] > row_ptr_[r + 1]) throw ShapeError("CSR row pointers not monotone");
      for (std::size_t k = row_ptr_[r]; k < row_ptr_[r + 1]; ++k) {
        if (col_idx_[k] >= cols_) throw RangeError("CSR column index out of range in row " + std::to_string(r));
        if (k > row_ptr_[r] && col_idx_[k] <= col_idx_[k - 1])
          throw ShapeError("CSR columns not strictly increasing in row " + std::to_string(r));
      }
    }
    for (double v : values_)
      if (!std::isfinite(v)) throw NumericalError("non-finite sparse weight");
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::uint32_t> col_idx_;
  std::vector<double> values_;
};

/// out += A * X
inline void spmm_accumulate(const CsrMatrix& a, const Matrix& x, Matrix& out) {
  if (a.cols() != x.rows() || out.rows() != a.rows() || out.cols() != x.cols())
    throw ShapeError("spmm (" + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ") * " +
                     x.shape_str());
  const std::size_t d = x.cols();
  const auto& rp = a.row_ptr();
  const auto& ci = a.col_idx();
  const auto& v = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* orow = out.data().data() + r * d;
    for (std::size_t k = rp[r]; k < rp[r + 1]; ++k) {
      const double w = v[k];
      const double* xrow = x.data().data() + static_cast<std::size_t>(ci[k]) * d;
      for (std::size_t j = 0; j < d; ++j) orow[j] += w * xrow[j];
    }
  }
}

inline Matrix spmm(const CsrMatrix& a, const Matrix& x) {
  Matrix out(a.rows(), x.cols());
  spmm_accumulate(a, x, out);
  return out;
}

/// out += A^T * G without materializing the transpose.
inline void spmm_t_accumulate(const CsrMatrix& a, const Matrix& g, Matrix& out) {
  if (a.rows() != g.rows() || out.rows() != a.cols() || out.cols() != g.cols())
    throw ShapeError("spmm_t shape mismatch");
  const std::size_t d = g.cols();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* grow = g.data().data() + r * d;
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      const double w = a.values()[k];
      double* orow = out.data().data() + static_cast<std::size_t>(a.col_idx()[k]) * d;
      for (std::size_t j = 0; j < d; ++j) orow[j] += w * grow[j];
    }
  }
}

/// A + I; existing diagonal entries are overwritten to 1 when binary, summed otherwise.
inline CsrMatrix add_self_loops(const CsrMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("add_self_loops needs a square matrix");
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  t.reserve(a.nnz() + a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    bool has_diag = false;
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) {
      if (a.col_idx()[k] == r) has_diag = true;
      t.emplace_back(r, a.col_idx()[k], a.values()[k]);
    }
    if (!has_diag) t.emplace_back(r, r, 1.0);
  }
  return CsrMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

/// D^{-1} A; rows with zero sum stay zero.
inline CsrMatrix row_normalize(const CsrMatrix& a) {
  CsrMatrix out = a;
  const auto sums = a.row_sums();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    if (sums[r] == 0.0) continue;
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k) out.values()[k] /= sums[r];
  }
  return out;
}

/// D^{-1/2} A D^{-1/2} using row sums as degrees; zero-degree rows/cols stay zero.
inline CsrMatrix sym_normalize(const CsrMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("sym_normalize needs a square matrix");
  for (double v : a.values())
    if (v < 0.0) throw RangeError("sym_normalize requires non-negative entries");
  const auto deg = a.row_sums();
  std::vector<double> inv_sqrt(deg.size());
  for (std::size_t i = 0; i < deg.size(); ++i) inv_sqrt[i] = deg[i] > 0.0 ? 1.0 / std::sqrt(deg[i]) : 0.0;
  CsrMatrix out = a;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t k = a.row_begin(r); k < a.row_end(r); ++k)
      out.values()[k] *= inv_sqrt[r] * inv_sqrt[a.col_idx()[k]];
  return out;
}

/// Elementwise product on the union of supports; used to fuse indicator and guidance.
inline CsrMatrix hadamard(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("hadamard shape mismatch");
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::size_t i = a.row_begin(r), j = b.row_begin(r);
    while (i < a.row_end(r) && j < b.row_end(r)) {
      const auto ca = a.col_idx()[i], cb = b.col_idx()[j];
      if (ca == cb) {
        t.emplace_back(r, ca, a.values()[i] * b.values()[j]);
        ++i;
        ++j;
      } else if (ca < cb) {
        ++i;
      } else {
        ++j;
      }
    }
  }
  return CsrMatrix::from_triplets(a.rows(), a.cols(), std::move(t));
}

}  // namespace hetgnn
