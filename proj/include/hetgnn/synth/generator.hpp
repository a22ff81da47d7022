#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/matrix.hpp"
#include "hetgnn/metrics.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn::synth {

enum class CmPattern { Easy, Hard };

inline std::string to_string(CmPattern p) { return p == CmPattern::Easy ? "easy" : "hard"; }

inline CmPattern pattern_from_string(const std::string& s) {
  if (s == "easy" || s == "Easy") return CmPattern::Easy;
  if (s == "hard" || s == "Hard") return CmPattern::Hard;
  throw ConfigError("unknown CM pattern '" + s + "' (expected easy or hard)");
}

/// Diagonal h everywhere. Hard spreads 1 - h uniformly over the other classes.
/// Easy arranges the classes on a seeded cycle and splits 1 - h evenly between
/// each class's two cycle neighbors, which keeps the matrix symmetric.
inline CompatibilityMatrix build_target_cm(std::size_t k, double h, CmPattern pattern, std::uint64_t seed = 0) {
  if (k < 2) throw ConfigError("target CM needs K >= 2");
  if (!(h > 0.0 && h < 1.0)) throw ConfigError("homophily level must lie in (0, 1)");
  Matrix m(k, k);
  if (pattern == CmPattern::Hard) {
    const double off = (1.0 - h) / static_cast<double>(k - 1);
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) m(i, j) = i == j ? h : off;
  } else {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed, 0xea5);
    rng.shuffle(std::span(order));
    for (std::size_t t = 0; t < k; ++t) {
      const std::size_t i = order[t];
      m(i, i) = h;
      m(i, order[(t + 1) % k]) += (1.0 - h) / 2.0;
      m(i, order[(t + k - 1) % k]) += (1.0 - h) / 2.0;
    }
  }
  return CompatibilityMatrix{std::move(m), std::vector<bool>(k, false)};
}

struct GaussianBaseOptions {
  std::size_t n_nodes = 1000;
  std::size_t n_classes = 5;
  std::size_t n_features = 16;
  double separation = 2.0;  // class mean k sits at separation * e_k
  double noise = 1.0;
};

struct Base {
  std::vector<int> labels;
  Matrix features;
};

/// Balanced labels with class-conditional spherical Gaussian features.
inline Base gaussian_base(const GaussianBaseOptions& opt, std::uint64_t seed) {
  if (opt.n_classes < 2) throw ConfigError("gaussian base needs at least 2 classes");
  if (opt.n_features < opt.n_classes)
    throw ConfigError("gaussian base needs n_features >= n_classes for one-hot class means");
  if (opt.n_nodes < opt.n_classes) throw ConfigError("gaussian base needs at least one node per class");
  Base b;
  b.labels.resize(opt.n_nodes);
  for (std::size_t i = 0; i < opt.n_nodes; ++i) b.labels[i] = static_cast<int>(i % opt.n_classes);
  Rng rng(seed, 0xba5e);
  rng.shuffle(std::span(b.labels));
  b.features = Matrix(opt.n_nodes, opt.n_features);
  for (std::size_t i = 0; i < opt.n_nodes; ++i) {
    for (double& v : b.features.row(i)) v = opt.noise * rng.normal();
    b.features(i, static_cast<std::size_t>(b.labels[i])) += opt.separation;
  }
  return b;
}

struct SynthSpec {
  std::string name = "synthetic";
  CompatibilityMatrix target;
  double mean_degree = 18.0;
  std::vector<int> labels;
  Matrix features;
  std::uint64_t seed = 0;
};

struct GenerationStats {
  std::size_t rejected_draws = 0;
  std::size_t dropped_stubs = 0;  // stubs abandoned after the retry budget
};

/// Each node initiates round(d/2) edges (fractional part randomized); the
/// partner class is drawn from the node's CM row and the partner uniformly
/// within that class. Self-loops and duplicates are redrawn up to a bound.
inline Graph generate_graph(const SynthSpec& spec, GenerationStats* stats = nullptr) {
  const std::size_t n = spec.labels.size();
  const std::size_t k = spec.target.m.rows();
  if (n == 0) throw ConfigError("synthetic spec has no nodes");
  if (spec.target.m.cols() != k) throw ShapeError("target CM must be square");
  if (spec.features.rows() != n) throw ShapeError("base features do not match the label count");
  if (!(spec.mean_degree > 0.0)) throw ConfigError("mean degree must be positive");
  for (std::size_t i = 0; i < k; ++i) {
    double s = 0.0;
    for (double v : spec.target.m.row(i)) {
      if (v < 0.0) throw ConfigError("target CM has negative entries");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-9) throw ConfigError("target CM row " + std::to_string(i) + " does not sum to 1");
  }

  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = spec.labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= k) throw RangeError("base label out of range at node " + std::to_string(i));
    members[static_cast<std::size_t>(y)].push_back(i);
  }
  for (std::size_t a = 0; a < k; ++a) {
    if (members[a].empty()) continue;
    for (std::size_t b = 0; b < k; ++b)
      if (spec.target.m(a, b) > 0.0 && members[b].empty())
        throw ConfigError("infeasible spec: class " + std::to_string(a) + " needs neighbors in empty class " +
                          std::to_string(b));
  }

  Rng rng(spec.seed, 0x5e7);
  std::unordered_set<std::uint64_t> present;
  std::vector<Edge> edges;
  GenerationStats st;
  constexpr int kMaxTries = 64;
  const double half = spec.mean_degree / 2.0;
  const double whole = std::floor(half);
  for (std::size_t u = 0; u < n; ++u) {
    const auto row = spec.target.m.row(static_cast<std::size_t>(spec.labels[u]));
    std::size_t stubs = static_cast<std::size_t>(whole) + (rng.uniform() < half - whole ? 1 : 0);
    for (std::size_t s = 0; s < stubs; ++s) {
      bool placed = false;
      for (int attempt = 0; attempt < kMaxTries && !placed; ++attempt) {
        double r = rng.uniform();
        std::size_t c = 0;
        while (c + 1 < k && r >= row[c]) r -= row[c++];
        while (row[c] == 0.0) c = (c + k - 1) % k;  // guard against rounding past the last positive entry
        const auto& pool = members[c];
        const std::size_t v = pool[rng.below(pool.size())];
        const std::uint64_t key = static_cast<std::uint64_t>(std::min(u, v)) * n + std::max(u, v);
        if (v == u || present.contains(key)) {
          ++st.rejected_draws;
          continue;
        }
        present.insert(key);
        edges.emplace_back(u, v);
        placed = true;
      }
      if (!placed) ++st.dropped_stubs;
    }
  }
  if (stats) *stats = st;
  return Graph::from_edges(spec.name, n, edges, spec.features, spec.labels, k, false);
}

struct VerifyReport {
  double edge_homophily = 0.0;
  CompatibilityMatrix observed;
  std::vector<double> row_tv;
  double max_row_tv = 0.0;
  double mean_degree = 0.0;
};

inline VerifyReport verify(const Graph& g, const CompatibilityMatrix& target) {
  if (target.m.rows() != g.n_classes()) throw ShapeError("target CM does not match the graph's class count");
  VerifyReport r;
  r.edge_homophily = g.adjacency().nnz() ? edge_homophily(g) : 0.0;
  r.observed = observed_cm(g);
  for (std::size_t i = 0; i < g.n_classes(); ++i) {
    r.row_tv.push_back(tv_distance(r.observed.m.row(i), target.m.row(i)));
    r.max_row_tv = std::max(r.max_row_tv, r.row_tv.back());
  }
  r.mean_degree = static_cast<double>(g.adjacency().nnz()) / static_cast<double>(g.n_nodes());
  return r;
}

inline void to_json(nlohmann::json& j, const VerifyReport& r) {
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < r.observed.m.rows(); ++i)
    rows.emplace_back(r.observed.m.row(i).begin(), r.observed.m.row(i).end());
  j = {{"edge_homophily", r.edge_homophily},
       {"observed_cm", rows},
       {"row_tv", r.row_tv},
       {"max_row_tv", r.max_row_tv},
       {"mean_degree", r.mean_degree}};
}

/// One cell of the homophily x pattern x degree grid.
struct GridConfig {
  double homophily;
  CmPattern pattern;
  double degree;

  std::string name() const {
    const char* h = homophily < 0.35 ? "Lowh" : (homophily < 0.65 ? "Midh" : "Highh");
    return std::string(h) + "-" + (pattern == CmPattern::Easy ? "Easy" : "Hard") + "-" +
           (degree < 10.0 ? "Lowdeg" : "Highdeg");
  }
};

inline std::vector<GridConfig> standard_grid() {
  std::vector<GridConfig> out;
  for (double h : {0.2, 0.5, 0.8})
    for (CmPattern p : {CmPattern::Easy, CmPattern::Hard})
      for (double d : {4.0, 18.0}) out.push_back(GridConfig{h, p, d});
  return out;
}

/// Generates one grid cell over a Gaussian base.
inline Graph make_grid_graph(const GridConfig& cfg, const GaussianBaseOptions& base_opt, std::uint64_t seed) {
  Base base = gaussian_base(base_opt, seed);
  SynthSpec spec;
  spec.name = cfg.name();
  spec.target = build_target_cm(base_opt.n_classes, cfg.homophily, cfg.pattern, seed);
  spec.mean_degree = cfg.degree;
  spec.labels = std::move(base.labels);
  spec.features = std::move(base.features);
  spec.seed = seed;
  return generate_graph(spec);
}

}  // namespace hetgnn::synth
