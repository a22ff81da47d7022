#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "hetgnn/error.hpp"

namespace hetgnn {

/// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) throw ShapeError("matrix data size does not match shape");
  }
  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
      if (r.size() != cols_) throw ShapeError("ragged matrix literal");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  std::string shape_str() const { return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")"; }

  Matrix transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix& operator+=(const Matrix& o) {
    require_same(o, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }
  Matrix& operator-=(const Matrix& o) {
    require_same(o, "-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }
  Matrix& operator*=(double s) {
    for (auto& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(Matrix a, double s) { return a *= s; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  void require_same(const Matrix& o, const char* op) const {
    if (!same_shape(o)) throw ShapeError(std::string(op) + ": " + shape_str() + " vs " + o.shape_str());
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out += a * b (accumulating). Loop order i-k-j keeps the inner loop contiguous.
inline void gemm_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.rows() || out.rows() != a.rows() || out.cols() != b.cols())
    throw ShapeError("matmul " + a.shape_str() + " * " + b.shape_str());
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  const double* bd = b.data().data();
  double* od = out.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = od + i * p;
    for (std::size_t k = 0; k < m; ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* brow = bd + k * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += aik * brow[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  gemm_accumulate(a, b, out);
  return out;
}

/// out += a^T * b
inline void gemm_tn_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.rows() != b.rows() || out.rows() != a.cols() || out.cols() != b.cols())
    throw ShapeError("matmul_tn " + a.shape_str() + "^T * " + b.shape_str());
  const std::size_t n = a.rows(), m = a.cols(), p = b.cols();
  for (std::size_t r = 0; r < n; ++r) {
    const double* brow = b.data().data() + r * p;
    for (std::size_t i = 0; i < m; ++i) {
      const double ari = a(r, i);
      if (ari == 0.0) continue;
      double* orow = out.data().data() + i * p;
      for (std::size_t j = 0; j < p; ++j) orow[j] += ari * brow[j];
    }
  }
}

/// out += a * b^T
inline void gemm_nt_accumulate(const Matrix& a, const Matrix& b, Matrix& out) {
  if (a.cols() != b.cols() || out.rows() != a.rows() || out.cols() != b.rows())
    throw ShapeError("matmul_nt " + a.shape_str() + " * " + b.shape_str() + "^T");
  const std::size_t n = a.rows(), m = a.cols(), p = b.rows();
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data().data() + i * m;
    for (std::size_t j = 0; j < p; ++j) {
      const double* brow = b.data().data() + j * m;
      double s = 0.0;
      for (std::size_t k = 0; k < m; ++k) s += arow[k] * brow[k];
      out(i, j) += s;
    }
  }
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("max_abs_diff " + a.shape_str() + " vs " + b.shape_str());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

/// L1-normalizes each row in place; rows whose mass is zero are left as zeros.
/// Returns the indices of zero-mass rows.
inline std::vector<std::size_t> l1_normalize_rows(Matrix& m) {
  std::vector<std::size_t> zero_rows;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    double s = 0.0;
    for (double v : r) s += std::abs(v);
    if (s == 0.0) {
      zero_rows.push_back(i);
      continue;
    }
    for (double& v : r) v /= s;
  }
  return zero_rows;
}

inline Matrix one_hot(std::span<const int> labels, std::size_t n_classes) {
  Matrix m(labels.size(), n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= n_classes)
      throw RangeError("label " + std::to_string(labels[i]) + " at node " + std::to_string(i) +
                       " outside [0, " + std::to_string(n_classes) + ")");
    m(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return m;
}

inline std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (std::size_t j = 0; j < r.size(); ++j) s += (out(i, j) = std::exp(r[j] - mx));
    for (std::size_t j = 0; j < r.size(); ++j) out(i, j) /= s;
  }
  return out;
}

}  // namespace hetgnn
