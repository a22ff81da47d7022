#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <vector>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;

  void validate(std::size_t n_nodes) const {
    std::vector<char> seen(n_nodes, 0);
    for (const auto* part : {&train, &valid, &test})
      for (auto i : *part) {
        if (i >= n_nodes) throw RangeError("split index " + std::to_string(i) + " >= n_nodes");
        if (seen[i]) throw RangeError("split index " + std::to_string(i) + " appears twice");
        seen[i] = 1;
      }
  }
};

/// Sizes of the 48/32/20 partition. Train and valid take the floor of their
/// share; if that leaves test more than one node over its share, valid takes one.
struct SplitSizes {
  std::size_t train, valid, test;
};

inline SplitSizes split_sizes(std::size_t n) {
  SplitSizes s{};
  s.train = n * 48 / 100;
  s.valid = n * 32 / 100;
  s.test = n - s.train - s.valid;
  if (static_cast<double>(s.test) > 0.2 * static_cast<double>(n) + 1.0) {
    ++s.valid;
    --s.test;
  }
  return s;
}

/// `n_splits` independent uniform shuffles, split k drawn from stream k of `seed`.
inline std::vector<Split> generate_splits(std::size_t n_nodes, std::size_t n_splits, std::uint64_t seed) {
  if (n_splits < 1) throw ConfigError("generate_splits requires n_splits >= 1");
  if (n_nodes < 10) throw RangeError("generate_splits requires at least 10 nodes");
  const auto sizes = split_sizes(n_nodes);
  std::vector<Split> out;
  out.reserve(n_splits);
  for (std::size_t k = 0; k < n_splits; ++k) {
    std::vector<std::size_t> perm(n_nodes);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed, 0x5b1u + k);
    rng.shuffle(std::span<std::size_t>(perm));
    Split s;
    s.seed = seed;
    const auto b = perm.begin();
    s.train.assign(b, b + static_cast<std::ptrdiff_t>(sizes.train));
    s.valid.assign(b + static_cast<std::ptrdiff_t>(sizes.train), b + static_cast<std::ptrdiff_t>(sizes.train + sizes.valid));
    s.test.assign(b + static_cast<std::ptrdiff_t>(sizes.train + sizes.valid), perm.end());
    out.push_back(std::move(s));
  }
  return out;
}

inline std::vector<Split> generate_splits(const Graph& g, std::size_t n_splits, std::uint64_t seed) {
  return generate_splits(g.n_nodes(), n_splits, seed);
}

}  // namespace hetgnn
