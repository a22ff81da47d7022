#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/train.hpp"

namespace hetgnn::bench {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and population standard deviation.
inline MeanStd mean_std(std::span<const double> xs) {
  if (xs.empty()) return {};
  // Welford's update: identical inputs give exactly that value and a zero spread.
  double mean = 0.0, m2 = 0.0, n = 0.0;
  for (double x : xs) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  return {mean, std::sqrt(m2 / n)};
}

/// "45.70 ± 4.92" from fractions in [0, 1].
inline std::string format_cell(const MeanStd& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f ± %.2f", 100.0 * m.mean, 100.0 * m.std);
  return buf;
}

/// Test nodes sorted by (degree, index) and cut into equal-count buckets whose
/// sizes differ by at most one.
inline std::vector<std::vector<std::size_t>> degree_buckets(const Graph& g, std::span<const std::size_t> test,
                                                            std::size_t n_buckets = 5) {
  if (n_buckets == 0) throw ConfigError("degree buckets: need at least one bucket");
  if (test.size() < n_buckets)
    throw RangeError("degree buckets: test set has " + std::to_string(test.size()) + " nodes, fewer than " +
                     std::to_string(n_buckets) + " buckets");
  std::vector<std::size_t> order(test.begin(), test.end());
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto da = g.degree(a), db = g.degree(b);
    return da != db ? da < db : a < b;
  });
  std::vector<std::vector<std::size_t>> out(n_buckets);
  const std::size_t base = order.size() / n_buckets, extra = order.size() % n_buckets;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < n_buckets; ++b) {
    const std::size_t len = base + (b < extra ? 1 : 0);
    out[b].assign(order.begin() + static_cast<std::ptrdiff_t>(pos), order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    pos += len;
  }
  return out;
}

struct DegreeBucketStats {
  std::vector<double> accuracy;       // mean over runs
  std::vector<double> mean_size;      // mean bucket size over runs
  std::vector<std::size_t> min_degree, max_degree;  // over all runs
  double overall = 0.0;               // mean test accuracy over runs
};

/// Per-bucket accuracy from stored test predictions, averaged over runs.
inline DegreeBucketStats degree_report(const Graph& g, std::span<const RunResult> runs, std::size_t n_buckets = 5) {
  if (runs.empty()) throw ConfigError("degree report: no runs");
  DegreeBucketStats st;
  st.accuracy.assign(n_buckets, 0.0);
  st.mean_size.assign(n_buckets, 0.0);
  st.min_degree.assign(n_buckets, static_cast<std::size_t>(-1));
  st.max_degree.assign(n_buckets, 0);
  for (const auto& r : runs) {
    if (r.test_predictions.size() != r.test_index.size())
      throw RangeError("degree report: run on split " + std::to_string(r.split_id) + " has no stored predictions");
    std::vector<int> pred(g.n_nodes(), -1);
    for (std::size_t t = 0; t < r.test_index.size(); ++t) pred.at(r.test_index[t]) = r.test_predictions[t];
    const auto buckets = degree_buckets(g, r.test_index, n_buckets);
    std::size_t hit_all = 0;
    for (std::size_t b = 0; b < n_buckets; ++b) {
      std::size_t hit = 0;
      for (auto i : buckets[b]) {
        if (pred[i] == g.labels()[i]) ++hit;
        st.min_degree[b] = std::min(st.min_degree[b], g.degree(i));
        st.max_degree[b] = std::max(st.max_degree[b], g.degree(i));
      }
      hit_all += hit;
      st.accuracy[b] += static_cast<double>(hit) / static_cast<double>(buckets[b].size());
      st.mean_size[b] += static_cast<double>(buckets[b].size());
    }
    st.overall += static_cast<double>(hit_all) / static_cast<double>(r.test_index.size());
  }
  const double n = static_cast<double>(runs.size());
  for (std::size_t b = 0; b < n_buckets; ++b) {
    st.accuracy[b] /= n;
    st.mean_size[b] /= n;
  }
  st.overall /= n;
  return st;
}

inline void to_json(nlohmann::json& j, const DegreeBucketStats& s) {
  j = {{"accuracy", s.accuracy},
       {"mean_size", s.mean_size},
       {"min_degree", s.min_degree},
       {"max_degree", s.max_degree},
       {"overall", s.overall}};
}

}  // namespace hetgnn::bench
