#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <tuple>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/htmp/spec.hpp"
#include "hetgnn/neighborhoods.hpp"
#include "hetgnn/sparse.hpp"

namespace hetgnn::htmp {

// Full indicators are materialized; beyond this many nodes they are refused.
inline constexpr std::size_t kMaxFullIndicatorNodes = 4096;

/// Fused (indicator ⊙ guidance) weights for one channel. The ego channel with
/// identity guidance short-circuits to Z W.
struct RealizedChannel {
  bool identity = false;
  std::shared_ptr<const CsrMatrix> weights;

  bool bound() const noexcept { return identity || weights != nullptr; }
};

/// Binary indicator matrix on `g`. Supplementary indicators are N x n_prototypes.
inline CsrMatrix realize_indicator(const Graph& g, const IndicatorSpec& spec, std::size_t n_prototypes = 0) {
  const std::size_t n = g.n_nodes();
  switch (spec.kind) {
    case IndicatorKind::Identity:
      return CsrMatrix::identity(n);
    case IndicatorKind::Raw:
      return g.adjacency();
    case IndicatorKind::RawSelfLoop:
      return add_self_loops(g.adjacency());
    case IndicatorKind::KHop:
      return khop_adjacency(g, spec.k, spec.exact);
    case IndicatorKind::FeatureKNN:
      return knn_feature_graph(g, spec.k);
    case IndicatorKind::Full: {
      if (n > kMaxFullIndicatorNodes)
        throw ConfigError("full indicator refused for " + std::to_string(n) + " nodes (limit " +
                          std::to_string(kMaxFullIndicatorNodes) + ")");
      return CsrMatrix::from_dense(Matrix(n, n, 1.0));
    }
    case IndicatorKind::Supplementary: {
      if (n_prototypes == 0) throw ConfigError("supplementary indicator needs prototype nodes");
      return CsrMatrix::from_dense(Matrix(n, n_prototypes, 1.0));
    }
  }
  throw ConfigError("unhandled indicator kind");
}

/// Applies a guidance rule over an indicator's support.
inline CsrMatrix apply_guidance(const CsrMatrix& indicator, const GuidanceSpec& guidance) {
  switch (guidance.kind) {
    case GuidanceKind::Identity: {
      if (indicator.rows() != indicator.cols()) throw ShapeError("identity guidance needs a square indicator");
      return hadamard(indicator, CsrMatrix::identity(indicator.rows()));
    }
    case GuidanceKind::DegAvgRow:
      return row_normalize(indicator);
    case GuidanceKind::DegAvgSym:
      return sym_normalize(indicator);
    case GuidanceKind::HighPass: {
      CsrMatrix low = sym_normalize(indicator);
      std::vector<std::tuple<std::size_t, std::size_t, double>> t;
      for (std::size_t r = 0; r < low.rows(); ++r) {
        t.emplace_back(r, r, 1.0);
        for (std::size_t k = low.row_begin(r); k < low.row_end(r); ++k) t.emplace_back(r, low.col_idx()[k], -low.values()[k]);
      }
      return CsrMatrix::from_triplets(low.rows(), low.cols(), std::move(t));
    }
    case GuidanceKind::Constant: {
      const Matrix& b = guidance.constant;
      if (b.rows() != indicator.rows() || b.cols() != indicator.cols())
        throw ShapeError("constant guidance " + b.shape_str() + " does not match indicator");
      CsrMatrix out = indicator;
      for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t k = out.row_begin(r); k < out.row_end(r); ++k)
          out.values()[k] = indicator.values()[k] * b(r, out.col_idx()[k]);
      return out;
    }
  }
  throw ConfigError("unhandled guidance kind");
}

/// Realizes channels on one graph, caching each (indicator, guidance) pair.
/// Thread-safe; realized matrices are immutable and shared.
class ChannelCache {
 public:
  explicit ChannelCache(const Graph& g) : graph_(&g) {}

  const Graph& graph() const noexcept { return *graph_; }

  RealizedChannel realize(const ChannelSpec& ch) {
    if (ch.indicator.kind == IndicatorKind::Identity && ch.guidance.kind == GuidanceKind::Identity)
      return RealizedChannel{true, nullptr};
    if (ch.indicator.kind == IndicatorKind::Supplementary)
      throw ConfigError("supplementary channels need prototype representations; use the cmgnn model");
    if (ch.guidance.kind == GuidanceKind::Constant)
      return RealizedChannel{false, std::make_shared<const CsrMatrix>(
                                        apply_guidance(realize_indicator(*graph_, ch.indicator), ch.guidance))};
    const auto key = std::make_tuple(static_cast<int>(ch.indicator.kind), ch.indicator.k, ch.indicator.exact,
                                     static_cast<int>(ch.guidance.kind));
    std::lock_guard lock(mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return RealizedChannel{false, it->second};
    auto fused = std::make_shared<const CsrMatrix>(apply_guidance(realize_indicator(*graph_, ch.indicator), ch.guidance));
    cache_.emplace(key, fused);
    return RealizedChannel{false, fused};
  }

 private:
  const Graph* graph_;
  std::mutex mutex_;
  std::map<std::tuple<int, std::size_t, bool, int>, std::shared_ptr<const CsrMatrix>> cache_;
};

}  // namespace hetgnn::htmp
