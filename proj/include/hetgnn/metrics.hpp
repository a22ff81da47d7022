#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/matrix.hpp"

namespace hetgnn {

/// K x K row-stochastic class-connection preferences. Rows whose mass was zero
/// before normalization hold the uniform distribution and are flagged.
struct CompatibilityMatrix {
  Matrix m;
  std::vector<bool> fallback_rows;

  std::size_t n_classes() const noexcept { return m.rows(); }
  bool has_fallback() const noexcept {
    for (bool f : fallback_rows)
      if (f) return true;
    return false;
  }
  double diagonal_mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < m.rows(); ++k) s += m(k, k);
    return m.rows() ? s / static_cast<double>(m.rows()) : 0.0;
  }
};

/// L1-normalizes the rows of a non-negative K x K mass matrix, substituting
/// the uniform row 1/K for zero-mass rows.
inline CompatibilityMatrix normalize_compatibility(Matrix mass) {
  const std::size_t k = mass.rows();
  CompatibilityMatrix cm{std::move(mass), std::vector<bool>(k, false)};
  for (std::size_t r : l1_normalize_rows(cm.m)) {
    cm.fallback_rows[r] = true;
    for (double& v : cm.m.row(r)) v = 1.0 / static_cast<double>(k);
  }
  return cm;
}

/// Fraction of edges joining same-label endpoints. Undirected edges count once;
/// directed graphs count stored entries.
inline double edge_homophily(const Graph& g) {
  g.require_labeled("edge_homophily");
  if (g.adjacency().nnz() == 0) throw RangeError("edge_homophily: graph has no edges");
  std::size_t same = 0;
  const auto& y = g.labels();
  for (std::size_t u = 0; u < g.n_nodes(); ++u)
    for (auto v : g.neighbors(u))
      if (y[u] == y[v]) ++same;
  // Symmetric storage doubles both counts for undirected graphs.
  return static_cast<double>(same) / static_cast<double>(g.adjacency().nnz());
}

/// Mean over non-isolated nodes of the same-label fraction among neighbors.
inline double node_homophily(const Graph& g) {
  g.require_labeled("node_homophily");
  const auto& y = g.labels();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t u = 0; u < g.n_nodes(); ++u) {
    const auto nb = g.neighbors(u);
    if (nb.empty()) continue;
    std::size_t same = 0;
    for (auto v : nb)
      if (y[u] == y[v]) ++same;
    total += static_cast<double>(same) / static_cast<double>(nb.size());
    ++counted;
  }
  if (counted == 0) throw RangeError("node_homophily: every node is isolated");
  return total / static_cast<double>(counted);
}

/// Row i is the L1-normalized sum of the soft labels of i's neighbors; isolated
/// nodes get a zero row.
inline Matrix semantic_neighborhood(const Graph& g, const Matrix& soft_labels) {
  if (soft_labels.rows() != g.n_nodes())
    throw ShapeError("soft labels have " + std::to_string(soft_labels.rows()) + " rows, graph has " +
                     std::to_string(g.n_nodes()) + " nodes");
  for (double v : soft_labels.data())
    if (v < 0.0) throw RangeError("semantic_neighborhood: negative soft label");
  Matrix nb = spmm(g.adjacency(), soft_labels);
  l1_normalize_rows(nb);
  return nb;
}

/// Observed compatibility matrix from ground-truth labels: row k aggregates the
/// semantic neighborhoods of class-k nodes, then L1-normalizes.
inline CompatibilityMatrix observed_cm(const Graph& g) {
  if (g.n_classes() < 2) throw RangeError("observed_cm requires K >= 2");
  g.require_labeled("observed_cm");
  const Matrix c = one_hot(g.labels(), g.n_classes());
  const Matrix nb = semantic_neighborhood(g, c);
  Matrix mass(g.n_classes(), g.n_classes());
  gemm_tn_accumulate(c, nb, mass);
  return normalize_compatibility(std::move(mass));
}

/// Observed compatibility matrix over an arbitrary (possibly directed) binary
/// neighborhood indicator, e.g. a feature kNN graph.
inline CompatibilityMatrix observed_cm(const CsrMatrix& neighborhood, std::span<const int> labels,
                                       std::size_t n_classes) {
  if (n_classes < 2) throw RangeError("observed_cm requires K >= 2");
  const Matrix c = one_hot(labels, n_classes);
  Matrix nb = spmm(neighborhood.binarized(), c);
  l1_normalize_rows(nb);
  Matrix mass(n_classes, n_classes);
  gemm_tn_accumulate(c, nb, mass);
  return normalize_compatibility(std::move(mass));
}

/// Total-variation distance between two probability rows.
inline double tv_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("tv_distance length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return 0.5 * s;
}

}  // namespace hetgnn
