#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hetgnn/autodiff/ops.hpp"
#include "hetgnn/error.hpp"
#include "hetgnn/htmp/realize.hpp"
#include "hetgnn/htmp/spec.hpp"

namespace hetgnn::htmp {

/// AGGREGATE: B Z W, choosing the cheaper association order.
inline ad::Var aggregate(const RealizedChannel& ch, ad::Var z, std::optional<ad::Var> w) {
  if (!ch.bound()) throw Error("aggregate: channel is not bound to a graph");
  if (ch.identity) return w ? ad::matmul(z, *w) : z;
  if (!w) return ad::spmm(ch.weights, z);
  if (w->cols() < w->rows()) return ad::spmm(ch.weights, ad::matmul(z, *w));
  return ad::matmul(ad::spmm(ch.weights, z), *w);
}

/// Parameters of the adaptive channel-weight MLP.
struct AdaWeightParams {
  ad::Parameter* att_w = nullptr;  // (R*d [+1]) x R
  ad::Parameter* att_b = nullptr;  // 1 x R
  ad::Parameter* mix_w = nullptr;  // R x R
  ad::Parameter* mix_b = nullptr;  // 1 x R
};

inline AdaWeightParams add_ada_weight_params(ad::ParameterSet& ps, const std::string& prefix, std::size_t in_dim,
                                             std::size_t n_channels, Rng& rng) {
  AdaWeightParams p;
  p.att_w = &ps.add(prefix + ".att.W", ad::glorot_uniform(in_dim, n_channels, rng));
  p.att_b = &ps.add(prefix + ".att.b", Matrix(1, n_channels));
  p.mix_w = &ps.add(prefix + ".mix.W", ad::glorot_uniform(n_channels, n_channels, rng));
  p.mix_b = &ps.add(prefix + ".mix.b", Matrix(1, n_channels));
  return p;
}

/// alpha = softmax(sigmoid([Z_1 || ... || Z_R (|| d)] W_att + b_att) W_mix + b_mix), N x R.
inline ad::Var ada_weights(std::span<const ad::Var> channels, std::optional<ad::Var> degree,
                           const AdaWeightParams& p) {
  if (channels.empty()) throw ShapeError("ada_weights: no channels");
  ad::Tape& t = channels.front().tape();
  std::vector<ad::Var> parts(channels.begin(), channels.end());
  if (degree) parts.push_back(*degree);
  ad::Var in = ad::concat_cols(parts);
  ad::Var h = ad::sigmoid(ad::add_bias(ad::matmul(in, t.parameter(*p.att_w)), t.parameter(*p.att_b)));
  return ad::row_softmax(ad::add_bias(ad::matmul(h, t.parameter(*p.mix_w)), t.parameter(*p.mix_b)));
}

/// Fixed per-channel weights broadcast to an N x R constant.
inline ad::Var constant_weights(ad::Tape& t, std::size_t n, std::span<const double> w) {
  Matrix a(n, w.size());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t r = 0; r < w.size(); ++r) a(i, r) = w[r];
  return t.constant(std::move(a));
}

/// sum_r diag(alpha_{:,r}) Z_r.
inline ad::Var mix_channels(ad::Var alpha, std::span<const ad::Var> channels) {
  if (alpha.cols() != channels.size())
    throw ShapeError("mix_channels: " + std::to_string(alpha.cols()) + " weights for " +
                     std::to_string(channels.size()) + " channels");
  std::optional<ad::Var> acc;
  for (std::size_t r = 0; r < channels.size(); ++r) {
    ad::Var term = ad::row_scale(ad::slice_cols(alpha, r, r + 1), channels[r]);
    acc = acc ? ad::add(*acc, term) : term;
  }
  return *acc;
}

struct CombineResult {
  ad::Var z;
  std::optional<ad::Var> alpha;
};

/// COMBINE over the channel outputs of one layer.
inline CombineResult combine(const CombineSpec& spec, std::span<const ad::Var> channels,
                             const AdaWeightParams* ada, std::optional<ad::Var> degree,
                             const std::optional<std::vector<double>>& forced_alpha) {
  if (channels.empty()) throw ShapeError("combine: no channels");
  if (channels.size() == 1 && spec.rule != CombineRule::AdaAdd) return {channels.front(), std::nullopt};
  switch (spec.rule) {
    case CombineRule::Cat:
      return {ad::concat_cols(channels), std::nullopt};
    case CombineRule::Add: {
      ad::Var acc = channels.front();
      for (std::size_t r = 1; r < channels.size(); ++r) acc = ad::add(acc, channels[r]);
      return {acc, std::nullopt};
    }
    case CombineRule::WeightedAdd: {
      ad::Var acc = ad::scale(channels.front(), spec.weights.at(0));
      for (std::size_t r = 1; r < channels.size(); ++r) acc = ad::add(acc, ad::scale(channels[r], spec.weights.at(r)));
      return {acc, std::nullopt};
    }
    case CombineRule::AdaAdd: {
      ad::Var alpha = [&] {
        if (forced_alpha) {
          if (forced_alpha->size() != channels.size())
            throw ConfigError("forced alpha has " + std::to_string(forced_alpha->size()) + " entries for " +
                              std::to_string(channels.size()) + " channels");
          return constant_weights(channels.front().tape(), channels.front().rows(), *forced_alpha);
        }
        if (!ada) throw Error("combine: adaptive weights are not initialized");
        return ada_weights(channels, degree, *ada);
      }();
      return {mix_channels(alpha, channels), alpha};
    }
  }
  throw ConfigError("unhandled combine rule");
}

/// FUSE over Z^0..Z^L. `gamma` (1 x (L+1)) is used by AdaAdd only.
inline ad::Var fuse(FuseRule rule, std::span<const ad::Var> reps, ad::Parameter* gamma) {
  if (reps.empty()) throw ShapeError("fuse: no representations");
  switch (rule) {
    case FuseRule::Last:
      return reps.back();
    case FuseRule::Cat:
      return reps.size() == 1 ? reps.front() : ad::concat_cols(reps);
    case FuseRule::AdaAdd: {
      if (!gamma) throw Error("fuse: adaptive weights are not initialized");
      ad::Tape& t = reps.front().tape();
      ad::Var g = t.parameter(*gamma);
      if (g.cols() != reps.size()) throw ShapeError("fuse: gamma does not match the number of layers");
      std::optional<ad::Var> acc;
      for (std::size_t l = 0; l < reps.size(); ++l) {
        ad::Var term = ad::scale_by(ad::slice_cols(g, l, l + 1), reps[l]);
        acc = acc ? ad::add(*acc, term) : term;
      }
      return *acc;
    }
  }
  throw ConfigError("unhandled fuse rule");
}

}  // namespace hetgnn::htmp
