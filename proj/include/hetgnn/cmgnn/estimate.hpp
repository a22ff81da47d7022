#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/matrix.hpp"
#include "hetgnn/metrics.hpp"

namespace hetgnn::cmgnn {

/// Class prototypes: row k is the L1-normalized mean of class-k training features.
struct PrototypeSet {
  Matrix features;  // K x d_f
  Matrix labels;    // K x K identity

  std::size_t size() const noexcept { return features.rows(); }
};

inline PrototypeSet build_prototypes(const Graph& g, std::span<const std::size_t> train) {
  const std::size_t k = g.n_classes();
  const std::size_t d = g.n_features();
  Matrix sum(k, d);
  std::vector<std::size_t> count(k, 0);
  for (auto i : train) {
    if (i >= g.n_nodes()) throw RangeError("training index " + std::to_string(i) + " out of range");
    const int y = g.labels()[i];
    if (y < 0) throw RangeError("training node " + std::to_string(i) + " is unlabeled");
    ++count[static_cast<std::size_t>(y)];
    auto dst = sum.row(static_cast<std::size_t>(y));
    const auto src = g.features().row(i);
    for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
  }
  std::string empty;
  for (std::size_t c = 0; c < k; ++c)
    if (count[c] == 0) empty += (empty.empty() ? "" : ", ") + std::to_string(c);
  if (!empty.empty()) throw RangeError("no training nodes for class(es) " + empty);
  for (std::size_t c = 0; c < k; ++c)
    for (double& v : sum.row(c)) v /= static_cast<double>(count[c]);
  l1_normalize_rows(sum);
  return PrototypeSet{std::move(sum), Matrix::identity(k)};
}

/// g_i = log K - H(C_i), clamped to [0, log K].
inline std::vector<double> confidence(const Matrix& soft) {
  const std::size_t k = soft.cols();
  if (k < 2) throw RangeError("confidence requires K >= 2");
  const double log_k = std::log(static_cast<double>(k));
  std::vector<double> g(soft.rows());
  for (std::size_t i = 0; i < soft.rows(); ++i) {
    double total = 0.0, h = 0.0;
    for (double p : soft.row(i)) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw RangeError("soft label row " + std::to_string(i) + " is not a distribution");
      total += p;
      if (p > 0.0) h -= p * std::log(p);
    }
    if (std::abs(total - 1.0) > 1e-6)
      throw RangeError("soft label row " + std::to_string(i) + " sums to " + std::to_string(total));
    const double c = log_k - h;
    g[i] = c < 1e-12 ? 0.0 : std::min(c, log_k);
  }
  return g;
}

/// Piecewise degree weight in [0, 1] with thresholds K and 3K.
inline double degree_weight(double d, std::size_t k) {
  const double kk = static_cast<double>(k);
  if (d <= kk) return d / (2.0 * kk);
  if (d <= 3.0 * kk) return 0.25 + d / (4.0 * kk);
  return 1.0;
}

inline std::vector<double> degree_weights(const Graph& g) {
  std::vector<double> w(g.n_nodes());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = degree_weight(static_cast<double>(g.degree(i)), g.n_classes());
  return w;
}

struct CMEstimate {
  CompatibilityMatrix cm;
  std::vector<double> confidence;      // g
  std::vector<double> degree_weights;  // w^d
  Matrix neighborhood;                 // C^nb
  std::size_t epoch = 0;
};

/// Estimation core with explicit node weights g and w^d.
inline CMEstimate estimate_cm_weighted(const Graph& g, const Matrix& soft, std::vector<double> conf,
                                       std::vector<double> wd) {
  const std::size_t n = g.n_nodes(), k = g.n_classes();
  if (soft.rows() != n || soft.cols() != k)
    throw ShapeError("soft labels " + soft.shape_str() + " for " + std::to_string(n) + " nodes, " +
                     std::to_string(k) + " classes");
  if (conf.size() != n || wd.size() != n) throw ShapeError("node weight vectors must have one entry per node");

  Matrix weighted = soft;  // g . C
  for (std::size_t i = 0; i < n; ++i)
    for (double& v : weighted.row(i)) v *= conf[i];
  Matrix nb = spmm(g.adjacency(), weighted);
  l1_normalize_rows(nb);

  bool any = false;
  Matrix agg(n, k);  // w^d . g . C
  for (std::size_t i = 0; i < n; ++i) {
    const double s = wd[i] * conf[i];
    any = any || s > 0.0;
    auto src = soft.row(i);
    auto dst = agg.row(i);
    for (std::size_t c = 0; c < k; ++c) dst[c] = s * src[c];
  }
  if (!any)
    throw NumericalError(
        "compatibility estimate has zero total weight (every node has zero confidence or degree weight); "
        "train longer or warm up before estimating");
  Matrix agg_t = agg.transpose();
  l1_normalize_rows(agg_t);
  Matrix mass = matmul(agg_t, nb);
  return CMEstimate{normalize_compatibility(std::move(mass)), std::move(conf), std::move(wd), std::move(nb), 0};
}

/// M = Norm((w^d g C)^T) Norm(A (g C)), renormalized row-wise.
inline CMEstimate estimate_cm(const Graph& g, const Matrix& soft, bool unit_degree_weights = false) {
  std::vector<double> wd = unit_degree_weights ? std::vector<double>(g.n_nodes(), 1.0) : degree_weights(g);
  return estimate_cm_weighted(g, soft, confidence(soft), std::move(wd));
}

/// B^sup = C M.
inline Matrix supplementary_guidance(const Matrix& soft, const Matrix& cm) {
  if (soft.cols() != cm.rows() || cm.rows() != cm.cols())
    throw ShapeError("supplementary guidance: " + soft.shape_str() + " x " + cm.shape_str());
  return matmul(soft, cm);
}

/// Soft labels with training rows pinned to one-hot truth; other rows come from
/// `probs`, or are uniform when `probs` is empty.
inline Matrix pinned_soft_labels(const Graph& g, std::span<const std::size_t> train, const Matrix* probs) {
  const std::size_t n = g.n_nodes(), k = g.n_classes();
  Matrix c = probs ? *probs : Matrix(n, k, 1.0 / static_cast<double>(k));
  if (c.rows() != n || c.cols() != k) throw ShapeError("soft labels " + c.shape_str());
  for (auto i : train) {
    const int y = g.labels().at(i);
    if (y < 0) throw RangeError("training node " + std::to_string(i) + " is unlabeled");
    for (double& v : c.row(i)) v = 0.0;
    c(i, static_cast<std::size_t>(y)) = 1.0;
  }
  return c;
}

}  // namespace hetgnn::cmgnn
