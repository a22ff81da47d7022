#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <queue>
#include <tuple>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/sparse.hpp"

namespace hetgnn {

/// Binary indicator of nodes reachable in 1..k hops (self excluded). With
/// `exact` only nodes at shortest-path distance exactly k are kept.
inline CsrMatrix khop_adjacency(const Graph& g, std::size_t k, bool exact = false) {
  if (k < 2) throw RangeError("khop_adjacency requires k >= 2");
  const std::size_t n = g.n_nodes();
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  std::vector<std::size_t> dist(n, SIZE_MAX);
  std::vector<std::size_t> touched;
  std::vector<std::size_t> frontier, next;
  for (std::size_t s = 0; s < n; ++s) {
    for (auto v : touched) dist[v] = SIZE_MAX;
    touched.clear();
    dist[s] = 0;
    touched.push_back(s);
    frontier.assign(1, s);
    for (std::size_t depth = 1; depth <= k && !frontier.empty(); ++depth) {
      next.clear();
      for (auto u : frontier)
        for (auto v : g.neighbors(u)) {
          if (dist[v] != SIZE_MAX) continue;
          dist[v] = depth;
          touched.push_back(v);
          next.push_back(v);
          if (!exact || depth == k) t.emplace_back(s, v, 1.0);
        }
      std::swap(frontier, next);
    }
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

/// Directed kNN graph under cosine similarity of feature rows. Self is
/// excluded; ties are broken by ascending node index. Zero-norm rows have
/// similarity 0 to everything.
inline CsrMatrix knn_feature_graph(const Graph& g, std::size_t k) {
  const std::size_t n = g.n_nodes();
  if (k < 1 || k >= n) throw RangeError("knn_feature_graph requires 1 <= k < n_nodes");
  const Matrix& x = g.features();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    norms[i] = std::sqrt(s);
  }
  std::vector<std::tuple<std::size_t, std::size_t, double>> t;
  t.reserve(n * k);
  std::vector<std::pair<double, std::size_t>> cand(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t c = 0;
    const auto xi = x.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      double sim = 0.0;
      if (norms[i] > 0.0 && norms[j] > 0.0) {
        const auto xj = x.row(j);
        for (std::size_t f = 0; f < xi.size(); ++f) sim += xi[f] * xj[f];
        sim /= norms[i] * norms[j];
      }
      cand[c++] = {sim, j};
    }
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    for (std::size_t r = 0; r < k; ++r) t.emplace_back(i, cand[r].second, 1.0);
  }
  return CsrMatrix::from_triplets(n, n, std::move(t));
}

}  // namespace hetgnn
