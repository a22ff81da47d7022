#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/matrix.hpp"
#include "hetgnn/sparse.hpp"

namespace hetgnn {

inline constexpr int kUnlabeled = -1;

using Edge = std::pair<std::size_t, std::size_t>;

/// Immutable attributed graph: binary CSR adjacency without self-loops, node
/// features, and per-node labels (kUnlabeled allowed).
class Graph {
 public:
  struct BuildReport {
    std::size_t duplicate_edges = 0;
    std::size_t self_loops = 0;
  };

  Graph() = default;

  Graph(std::string name, CsrMatrix adjacency, Matrix features, std::vector<int> labels, std::size_t n_classes,
        bool directed)
      : name_(std::move(name)), adjacency_(std::move(adjacency)), features_(std::move(features)),
        labels_(std::move(labels)), n_classes_(n_classes), directed_(directed) {
    validate();
  }

  /// Builds from an edge list. Undirected edges are stored in both directions;
  /// duplicates and self-loops are dropped and counted in `report`.
  static Graph from_edges(std::string name, std::size_t n_nodes, std::span<const Edge> edges, Matrix features,
                          std::vector<int> labels, std::size_t n_classes, bool directed,
                          BuildReport* report = nullptr) {
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    t.reserve(edges.size() * (directed ? 1 : 2));
    BuildReport rep;
    for (const auto& [u, v] : edges) {
      if (u >= n_nodes || v >= n_nodes)
        throw RangeError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") references node >= " +
                         std::to_string(n_nodes));
      if (u == v) {
        ++rep.self_loops;
        continue;
      }
      t.emplace_back(u, v, 1.0);
      if (!directed) t.emplace_back(v, u, 1.0);
    }
    const std::size_t before = t.size();
    CsrMatrix a = CsrMatrix::from_triplets(n_nodes, n_nodes, std::move(t));
    rep.duplicate_edges = (before - a.nnz()) / (directed ? 1 : 2);
    a = a.binarized();
    if (report) *report = rep;
    return Graph(std::move(name), std::move(a), std::move(features), std::move(labels), n_classes, directed);
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t n_nodes() const noexcept { return adjacency_.rows(); }
  std::size_t n_classes() const noexcept { return n_classes_; }
  std::size_t n_features() const noexcept { return features_.cols(); }
  bool directed() const noexcept { return directed_; }

  /// Undirected graphs report each edge once; directed graphs report stored entries.
  std::size_t n_edges() const noexcept { return directed_ ? adjacency_.nnz() : adjacency_.nnz() / 2; }

  const CsrMatrix& adjacency() const noexcept { return adjacency_; }
  const Matrix& features() const noexcept { return features_; }
  const std::vector<int>& labels() const noexcept { return labels_; }

  std::size_t degree(std::size_t v) const noexcept { return adjacency_.row_nnz(v); }
  std::vector<double> degrees() const {
    std::vector<double> d(n_nodes());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(degree(i));
    return d;
  }

  std::span<const std::uint32_t> neighbors(std::size_t v) const noexcept {
    return {adjacency_.col_idx().data() + adjacency_.row_begin(v), adjacency_.row_nnz(v)};
  }

  bool fully_labeled() const noexcept {
    for (int y : labels_)
      if (y == kUnlabeled) return false;
    return true;
  }

  void require_labeled(const char* op) const {
    for (std::size_t i = 0; i < labels_.size(); ++i)
      if (labels_[i] == kUnlabeled) throw RangeError(std::string(op) + ": node " + std::to_string(i) + " is unlabeled");
  }

  std::vector<Edge> edge_list() const {
    std::vector<Edge> out;
    for (std::size_t u = 0; u < n_nodes(); ++u)
      for (auto v : neighbors(u))
        if (directed_ || u < v) out.emplace_back(u, v);
    return out;
  }

  /// Relabels nodes: node i of the result is node perm[i] of this graph.
  Graph permuted(std::span<const std::size_t> perm) const {
    if (perm.size() != n_nodes()) throw ShapeError("permutation length mismatch");
    std::vector<std::size_t> inverse(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) inverse[perm[i]] = i;
    std::vector<Edge> edges;
    for (const auto& [u, v] : edge_list()) edges.emplace_back(inverse[u], inverse[v]);
    Matrix x(n_nodes(), n_features());
    std::vector<int> y(n_nodes());
    for (std::size_t i = 0; i < perm.size(); ++i) {
      auto src = features_.row(perm[i]);
      std::copy(src.begin(), src.end(), x.row(i).begin());
      y[i] = labels_[perm[i]];
    }
    return from_edges(name_, n_nodes(), edges, std::move(x), std::move(y), n_classes_, directed_);
  }

  /// Same structure and features with labels replaced (used to permute class ids).
  Graph with_labels(std::vector<int> labels) const {
    return Graph(name_, adjacency_, features_, std::move(labels), n_classes_, directed_);
  }

 private:
  void validate() const {
    adjacency_.validate();
    if (adjacency_.rows() != adjacency_.cols()) throw ShapeError("adjacency must be square");
    const std::size_t n = adjacency_.rows();
    if (features_.rows() != n)
      throw ShapeError("feature rows " + std::to_string(features_.rows()) + " != n_nodes " + std::to_string(n));
    if (labels_.size() != n)
      throw ShapeError("label count " + std::to_string(labels_.size()) + " != n_nodes " + std::to_string(n));
    for (std::size_t i = 0; i < n; ++i) {
      if (labels_[i] != kUnlabeled && (labels_[i] < 0 || static_cast<std::size_t>(labels_[i]) >= n_classes_))
        throw RangeError("label " + std::to_string(labels_[i]) + " of node " + std::to_string(i) + " >= K=" +
                         std::to_string(n_classes_));
      for (auto v : neighbors(i))
        if (v == i) throw ShapeError("self-loop at node " + std::to_string(i) + " in base structure");
    }
    if (!directed_ && !adjacency_.is_symmetric()) throw ShapeError("undirected adjacency is not symmetric");
    if (!features_.all_finite()) throw NumericalError("non-finite node features");
  }

  std::string name_;
  CsrMatrix adjacency_;
  Matrix features_;
  std::vector<int> labels_;
  std::size_t n_classes_ = 0;
  bool directed_ = false;
};

}  // namespace hetgnn
