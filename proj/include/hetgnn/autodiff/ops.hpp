#pragma once

// Differentiable primitives. Each op computes its forward value eagerly and
// registers a closure that pushes the upstream gradient to its parents.

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hetgnn/autodiff/tape.hpp"
#include "hetgnn/sparse.hpp"

namespace hetgnn::ad {

namespace detail {

inline void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("operands recorded on different tapes");
}

inline void require_same_shape(Var a, Var b, const char* op) {
  if (!a.value().same_shape(b.value()))
    throw ShapeError(std::string(op) + ": " + a.value().shape_str() + " vs " + b.value().shape_str());
}

inline bool wants(Tape& t, std::size_t id) { return t.requires_grad(id); }

}  // namespace detail

inline Var matmul(Var a, Var b) {
  detail::require_same_tape(a, b);
  Tape& t = a.tape();
  Matrix out = hetgnn::matmul(a.value(), b.value());
  const auto ia = a.id(), ib = b.id();
  return t.push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (detail::wants(t, ia)) gemm_nt_accumulate(g, t.value(ib), t.grad_accumulator(ia));
    if (detail::wants(t, ib)) gemm_tn_accumulate(t.value(ia), g, t.grad_accumulator(ib));
  }, "matmul");
}

/// Sparse x dense product. The sparse operand is a constant: gradients flow
/// to the dense side only.
inline Var spmm(std::shared_ptr<const CsrMatrix> a, Var x) {
  Tape& t = x.tape();
  Matrix out = hetgnn::spmm(*a, x.value());
  const auto ix = x.id();
  return t.push(std::move(out), {ix}, [a, ix](Tape& t, std::size_t self) {
    spmm_t_accumulate(*a, t.grad(self), t.grad_accumulator(ix));
  }, "spmm");
}

inline Var add(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  Matrix out = a.value() + b.value();
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    if (detail::wants(t, ia)) t.grad_accumulator(ia) += t.grad(self);
    if (detail::wants(t, ib)) t.grad_accumulator(ib) += t.grad(self);
  }, "add");
}

inline Var sub(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "sub");
  Matrix out = a.value() - b.value();
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    if (detail::wants(t, ia)) t.grad_accumulator(ia) += t.grad(self);
    if (detail::wants(t, ib)) t.grad_accumulator(ib) -= t.grad(self);
  }, "sub");
}

inline Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, s](Tape& t, std::size_t self) {
    Matrix& ga = t.grad_accumulator(ia);
    const Matrix& g = t.grad(self);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += s * g.data()[i];
  }, "scale");
}

/// s * z with s a 1 x 1 tensor.
inline Var scale_by(Var s, Var z) {
  detail::require_same_tape(s, z);
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("scale_by expects a 1x1 scalar");
  const double sv = s.value()(0, 0);
  Matrix out = z.value() * sv;
  const auto is = s.id(), iz = z.id();
  return z.tape().push(std::move(out), {is, iz}, [is, iz](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (detail::wants(t, is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < g.size(); ++i) acc += g.data()[i] * t.value(iz).data()[i];
      t.grad_accumulator(is)(0, 0) += acc;
    }
    if (detail::wants(t, iz)) {
      const double sv = t.value(is)(0, 0);
      Matrix& gz = t.grad_accumulator(iz);
      for (std::size_t i = 0; i < g.size(); ++i) gz.data()[i] += sv * g.data()[i];
    }
  }, "scale_by");
}

inline Var hadamard(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "hadamard");
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= b.value().data()[i];
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (detail::wants(t, ia)) {
      Matrix& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * t.value(ib).data()[i];
    }
    if (detail::wants(t, ib)) {
      Matrix& gb = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.size(); ++i) gb.data()[i] += g.data()[i] * t.value(ia).data()[i];
    }
  }, "hadamard");
}

/// diag(alpha) * z with alpha an N x 1 column.
inline Var row_scale(Var alpha, Var z) {
  detail::require_same_tape(alpha, z);
  if (alpha.cols() != 1 || alpha.rows() != z.rows())
    throw ShapeError("row_scale: alpha " + alpha.value().shape_str() + " for z " + z.value().shape_str());
  Matrix out = z.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (double& v : out.row(i)) v *= alpha.value()(i, 0);
  const auto ia = alpha.id(), iz = z.id();
  return z.tape().push(std::move(out), {ia, iz}, [ia, iz](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(ia);
    const Matrix& zv = t.value(iz);
    if (detail::wants(t, ia)) {
      Matrix& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) s += g(i, j) * zv(i, j);
        ga(i, 0) += s;
      }
    }
    if (detail::wants(t, iz)) {
      Matrix& gz = t.grad_accumulator(iz);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gz(i, j) += g(i, j) * av(i, 0);
    }
  }, "row_scale");
}

/// z + 1 * bias with bias a 1 x d row.
inline Var add_bias(Var z, Var bias) {
  detail::require_same_tape(z, bias);
  if (bias.rows() != 1 || bias.cols() != z.cols())
    throw ShapeError("add_bias: bias " + bias.value().shape_str() + " for " + z.value().shape_str());
  Matrix out = z.value();
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += bias.value()(0, j);
  const auto iz = z.id(), ib = bias.id();
  return z.tape().push(std::move(out), {iz, ib}, [iz, ib](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (detail::wants(t, iz)) t.grad_accumulator(iz) += g;
    if (detail::wants(t, ib)) {
      Matrix& gb = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gb(0, j) += g(i, j);
    }
  }, "add_bias");
}

inline Var relu(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x.data()[i] > 0.0) ga.data()[i] += g.data()[i];
  }, "relu");
}

inline Var sigmoid(Var a) {
  Matrix out = a.value();
  for (double& v : out.data()) v = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * y.data()[i] * (1.0 - y.data()[i]);
  }, "sigmoid");
}

inline Var row_softmax(Var a) {
  if (a.cols() == 0) throw ShapeError("row_softmax over empty rows");
  Matrix out = softmax_rows(a.value());
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& y = t.value(self);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  }, "row_softmax");
}

inline Var log(Var a) {
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(out.data()[i] > 0.0)) throw RangeError("log of non-positive value " + std::to_string(out.data()[i]));
    out.data()[i] = std::log(out.data()[i]);
  }
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] / x.data()[i];
  }, "log");
}

inline Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const std::size_t n = parts.front().rows();
  std::size_t width = 0;
  for (const Var& p : parts) {
    detail::require_same_tape(parts.front(), p);
    if (p.rows() != n) throw ShapeError("concat_cols row mismatch " + p.value().shape_str());
    width += p.cols();
  }
  Matrix out(n, width);
  std::vector<std::size_t> ids, offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    for (std::size_t i = 0; i < n; ++i)
      std::copy(p.value().row(i).begin(), p.value().row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(off));
    ids.push_back(p.id());
    offsets.push_back(off);
    off += p.cols();
  }
  auto parents = ids;
  return parts.front().tape().push(std::move(out), std::move(parents), [ids, offsets](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!detail::wants(t, ids[k])) continue;
      Matrix& gp = t.grad_accumulator(ids[k]);
      for (std::size_t i = 0; i < gp.rows(); ++i)
        for (std::size_t j = 0; j < gp.cols(); ++j) gp(i, j) += g(i, offsets[k] + j);
    }
  }, "concat_cols");
}

inline Var concat_cols(std::initializer_list<Var> parts) {
  return concat_cols(std::span<const Var>(parts.begin(), parts.size()));
}

inline Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  if (begin > end || end > a.cols()) throw ShapeError("slice_cols out of range");
  Matrix out(a.rows(), end - begin);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = begin; j < end; ++j) out(i, j - begin) = a.value()(i, j);
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, begin](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(i, begin + j) += g(i, j);
  }, "slice_cols");
}

/// Row gather (index select); repeated indices accumulate in backward.
inline Var gather_rows(Var a, std::vector<std::size_t> index) {
  Matrix out(index.size(), a.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (index[r] >= a.rows()) throw RangeError("gather_rows index " + std::to_string(index[r]));
    std::copy(a.value().row(index[r]).begin(), a.value().row(index[r]).end(), out.row(r).begin());
  }
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, index = std::move(index)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t r = 0; r < index.size(); ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) ga(index[r], j) += g(r, j);
  }, "gather_rows");
}

/// Each row divided by its L1 norm; zero rows stay zero.
inline Var l1_row_normalize(Var a) {
  const Matrix& x = a.value();
  Matrix out = x;
  std::vector<double> norms(x.rows(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (double v : x.row(i)) norms[i] += std::abs(v);
    if (norms[i] > 0.0)
      for (double& v : out.row(i)) v /= norms[i];
  }
  const auto ia = a.id();
  return a.tape().push(std::move(out), {ia}, [ia, norms](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& x = t.value(ia);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.rows(); ++i) {
      const double s = norms[i];
      if (s == 0.0) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < g.cols(); ++j) dot += g(i, j) * x(i, j);
      for (std::size_t j = 0; j < g.cols(); ++j) {
        const double sgn = x(i, j) > 0.0 ? 1.0 : (x(i, j) < 0.0 ? -1.0 : 0.0);
        ga(i, j) += g(i, j) / s - sgn * dot / (s * s);
      }
    }
  }, "l1_row_normalize");
}

/// Cosine similarity of two 1 x d rows; 0 (with zero gradient) when either is zero.
inline Var cosine(Var a, Var b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "cosine");
  if (a.rows() != 1) throw ShapeError("cosine expects 1 x d rows");
  const auto& x = a.value().data();
  const auto& y = b.value().data();
  double dot = 0.0, nx = 0.0, ny = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += x[i] * y[i];
    nx += x[i] * x[i];
    ny += y[i] * y[i];
  }
  nx = std::sqrt(nx);
  ny = std::sqrt(ny);
  const bool degenerate = nx == 0.0 || ny == 0.0;
  const double c = degenerate ? 0.0 : dot / (nx * ny);
  const auto ia = a.id(), ib = b.id();
  return a.tape().push(Matrix(1, 1, c), {ia, ib}, [ia, ib, nx, ny, c, degenerate](Tape& t, std::size_t self) {
    if (degenerate) return;
    const double g = t.grad(self)(0, 0);
    const auto& x = t.value(ia).data();
    const auto& y = t.value(ib).data();
    if (detail::wants(t, ia)) {
      Matrix& ga = t.grad_accumulator(ia);
      for (std::size_t i = 0; i < x.size(); ++i) ga.data()[i] += g * (y[i] / (nx * ny) - c * x[i] / (nx * nx));
    }
    if (detail::wants(t, ib)) {
      Matrix& gb = t.grad_accumulator(ib);
      for (std::size_t i = 0; i < y.size(); ++i) gb.data()[i] += g * (x[i] / (nx * ny) - c * y[i] / (ny * ny));
    }
  }, "cosine");
}

/// Inverted dropout with drop probability p. Identity when the tape is in eval
/// mode or p == 0.
inline Var dropout(Var a, double p) {
  if (p < 0.0 || p >= 1.0) throw RangeError("dropout rate must lie in [0, 1)");
  Tape& t = a.tape();
  if (!t.training() || p == 0.0) return a;
  t.mark_stochastic();
  const double keep = 1.0 - p;
  Matrix mask(a.rows(), a.cols());
  for (double& m : mask.data()) m = t.rng().uniform() < keep ? 1.0 / keep : 0.0;
  Matrix out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  const auto ia = a.id();
  return t.push(std::move(out), {ia}, [ia, mask = std::move(mask)](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_accumulator(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] * mask.data()[i];
  }, "dropout");
}

/// Mean cross-entropy of softmax(logits) over the rows in `index`.
inline Var masked_cross_entropy(Var logits, std::span<const int> labels, std::span<const std::size_t> index) {
  if (index.empty()) throw RangeError("cross-entropy over an empty node set");
  if (labels.size() != logits.rows()) throw ShapeError("labels do not match logits rows");
  const Matrix& z = logits.value();
  const std::size_t k = z.cols();
  Matrix probs(index.size(), k);
  double loss = 0.0;
  for (std::size_t r = 0; r < index.size(); ++r) {
    const std::size_t i = index[r];
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw RangeError("cross-entropy label out of range at node " + std::to_string(i));
    const auto row = z.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) s += (probs(r, j) = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < k; ++j) probs(r, j) /= s;
    loss -= (row[static_cast<std::size_t>(y)] - mx) - std::log(s);
  }
  const double n = static_cast<double>(index.size());
  loss /= n;
  std::vector<std::size_t> idx(index.begin(), index.end());
  std::vector<int> ys(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) ys[r] = labels[idx[r]];
  const auto il = logits.id();
  return logits.tape().push(Matrix(1, 1, loss), {il},
                            [il, idx = std::move(idx), ys = std::move(ys), probs = std::move(probs), n](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    Matrix& gl = t.grad_accumulator(il);
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < probs.cols(); ++j) {
        const double target = static_cast<int>(j) == ys[r] ? 1.0 : 0.0;
        gl(idx[r], j) += g * (probs(r, j) - target) / n;
      }
  }, "cross_entropy");
}

inline Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const auto ia = a.id();
  return a.tape().push(Matrix(1, 1, s), {ia}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad_accumulator(ia).data()) v += g;
  }, "sum");
}

inline Var mean(Var a) {
  if (a.value().empty()) throw ShapeError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

}  // namespace hetgnn::ad
