#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hetgnn/autodiff/adam.hpp"
#include "hetgnn/autodiff/ops.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/htmp/layers.hpp"
#include "hetgnn/htmp/realize.hpp"
#include "hetgnn/htmp/spec.hpp"
#include "hetgnn/model.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn::htmp {

/// A MessagePassingSpec bound to a graph with initialized parameters.
class HtmpModel final : public NodeClassifier {
 public:
  HtmpModel(MessagePassingSpec spec, const Graph& g, std::uint64_t seed,
            std::shared_ptr<ChannelCache> cache = nullptr)
      : spec_(std::move(spec)), graph_(&g), cache_(cache ? std::move(cache) : std::make_shared<ChannelCache>(g)) {
    spec_.validate();
    if (&cache_->graph() != graph_) throw ConfigError("channel cache is bound to a different graph");
    build(seed);
  }

  std::string name() const override { return spec_.name; }
  ad::ParameterSet& parameters() override { return params_; }
  double dropout() const override { return spec_.dropout; }
  const MessagePassingSpec& spec() const noexcept { return spec_; }
  const std::vector<std::size_t>& representation_dims() const noexcept { return rep_dims_; }
  std::size_t fused_dim() const noexcept { return fused_dim_; }

  ForwardOutput forward(ad::Tape& tape, const ForwardOptions& opt = {}) override {
    ForwardOutput out;
    const bool relu_first = spec_.relu_before_aggregate;
    ad::Var x = tape.constant(graph_->features());
    ad::Var z0 = enc_ ? ad::matmul(x, tape.parameter(*enc_)) : x;
    const bool enc_relu = enc_ && spec_.encoder_relu;
    if (enc_relu && !relu_first) z0 = ad::relu(z0);
    out.representations.push_back(ad::dropout(z0, spec_.dropout));

    std::optional<ad::Var> degree;
    bool pending_relu = enc_relu;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerState& ls = layers_[l];
      const LayerSpec& lspec = spec_.layers[l];
      try {
        ad::Var h = out.representations.back();
        if (relu_first && pending_relu) h = ad::relu(h);
        std::vector<ad::Var> outs;
        outs.reserve(ls.channels.size());
        for (std::size_t r = 0; r < ls.channels.size(); ++r) {
          std::optional<ad::Var> w;
          if (ls.weights[r]) w = tape.parameter(*ls.weights[r]);
          outs.push_back(aggregate(ls.channels[r], h, w));
        }
        if (spec_.combine.rule == CombineRule::AdaAdd && spec_.combine.use_degree && !degree) {
          Matrix d(graph_->n_nodes(), 1);
          for (std::size_t i = 0; i < graph_->n_nodes(); ++i) d(i, 0) = static_cast<double>(graph_->degree(i));
          degree = tape.constant(std::move(d));
        }
        CombineResult c = combine(spec_.combine, outs, ls.ada ? &*ls.ada : nullptr, degree, opt.forced_alpha);
        if (c.alpha) out.alphas.push_back(*c.alpha);
        ad::Var z = c.z;
        if (lspec.relu && !relu_first) z = ad::relu(z);
        const bool is_logits = l + 1 == layers_.size() && spec_.classifier == ClassifierKind::None;
        out.representations.push_back(is_logits ? z : ad::dropout(z, spec_.dropout));
      } catch (const NumericalError& e) {
        throw NumericalError(spec_.name + ": layer " + std::to_string(l + 1) + ": " + e.what());
      }
      pending_relu = lspec.relu;
    }

    if (opt.fuse_last_only) {
      out.fused = out.representations.back();
    } else {
      out.fused = fuse(spec_.fuse, out.representations, gamma_);
    }
    ad::Var f = out.fused;
    if (relu_first && pending_relu && spec_.classifier != ClassifierKind::None) f = ad::relu(f);
    switch (spec_.classifier) {
      case ClassifierKind::None:
        out.logits = f;
        break;
      case ClassifierKind::Linear:
        out.logits = ad::add_bias(ad::matmul(f, tape.parameter(*cls_w1_)), tape.parameter(*cls_b1_));
        break;
      case ClassifierKind::Mlp: {
        ad::Var hid = ad::relu(ad::add_bias(ad::matmul(f, tape.parameter(*cls_w1_)), tape.parameter(*cls_b1_)));
        hid = ad::dropout(hid, spec_.dropout);
        out.logits = ad::add_bias(ad::matmul(hid, tape.parameter(*cls_w2_)), tape.parameter(*cls_b2_));
        break;
      }
    }
    if (out.logits.cols() != graph_->n_classes())
      throw ShapeError(spec_.name + ": logits have " + std::to_string(out.logits.cols()) + " columns for " +
                       std::to_string(graph_->n_classes()) + " classes");
    return out;
  }

 private:
  struct LayerState {
    std::vector<RealizedChannel> channels;
    std::vector<ad::Parameter*> weights;
    std::optional<AdaWeightParams> ada;
  };

  void build(std::uint64_t seed) {
    Rng rng(seed, 0x1417);
    const std::size_t k = graph_->n_classes();
    std::size_t dim = graph_->n_features();
    if (spec_.encoder == EncoderKind::Linear) {
      enc_ = &params_.add("enc.W", ad::glorot_uniform(dim, spec_.hidden, rng));
      dim = spec_.hidden;
    }
    rep_dims_.push_back(dim);

    for (std::size_t l = 0; l < spec_.layers.size(); ++l) {
      const LayerSpec& lspec = spec_.layers[l];
      const bool last = l + 1 == spec_.layers.size();
      const std::size_t out_w = (last && spec_.classifier == ClassifierKind::None) ? k : spec_.hidden;
      const std::string prefix = "layer" + std::to_string(l + 1);
      LayerState ls;
      std::map<int, ad::Parameter*> groups;
      std::vector<std::size_t> ch_dims;
      for (std::size_t r = 0; r < lspec.channels.size(); ++r) {
        const ChannelSpec& ch = lspec.channels[r];
        ls.channels.push_back(cache_->realize(ch));
        ad::Parameter* w = nullptr;
        if (ch.has_weight) {
          if (ch.weight_group >= 0) {
            auto it = groups.find(ch.weight_group);
            if (it == groups.end()) {
              w = &params_.add(prefix + ".group" + std::to_string(ch.weight_group) + ".W",
                               ad::glorot_uniform(dim, out_w, rng));
              groups.emplace(ch.weight_group, w);
            } else {
              w = it->second;
            }
          } else {
            w = &params_.add(prefix + ".ch" + std::to_string(r) + ".W", ad::glorot_uniform(dim, out_w, rng));
          }
        }
        ls.weights.push_back(w);
        ch_dims.push_back(ch.has_weight ? out_w : dim);
      }
      std::size_t next = 0;
      if (spec_.combine.rule == CombineRule::Cat) {
        for (auto d : ch_dims) next += d;
      } else {
        for (auto d : ch_dims)
          if (d != ch_dims.front())
            throw ConfigError(spec_.name + ": " + prefix + " channels have unequal widths; use cat combine");
        next = ch_dims.front();
        if (spec_.combine.rule == CombineRule::AdaAdd) {
          const std::size_t in = next * ch_dims.size() + (spec_.combine.use_degree ? 1 : 0);
          ls.ada = add_ada_weight_params(params_, prefix, in, ch_dims.size(), rng);
        }
      }
      dim = next;
      rep_dims_.push_back(dim);
      layers_.push_back(std::move(ls));
    }

    std::size_t fused = rep_dims_.back();
    if (spec_.fuse == FuseRule::Cat) {
      fused = 0;
      for (auto d : rep_dims_) fused += d;
    } else if (spec_.fuse == FuseRule::AdaAdd) {
      for (auto d : rep_dims_)
        if (d != rep_dims_.front())
          throw ConfigError(spec_.name + ": ada_add fuse needs equal widths across layers");
      const double g0 = 1.0 / static_cast<double>(rep_dims_.size());
      gamma_ = &params_.add("fuse.gamma", Matrix(1, rep_dims_.size(), g0));
    }
    fused_dim_ = fused;

    switch (spec_.classifier) {
      case ClassifierKind::None:
        if (fused != k)
          throw ConfigError(spec_.name + ": without a classifier the fused width (" + std::to_string(fused) +
                            ") must equal the class count (" + std::to_string(k) + ")");
        break;
      case ClassifierKind::Linear:
        cls_w1_ = &params_.add("cls.W", ad::glorot_uniform(fused, k, rng));
        cls_b1_ = &params_.add("cls.b", Matrix(1, k));
        break;
      case ClassifierKind::Mlp:
        cls_w1_ = &params_.add("cls.W1", ad::glorot_uniform(fused, spec_.hidden, rng));
        cls_b1_ = &params_.add("cls.b1", Matrix(1, spec_.hidden));
        cls_w2_ = &params_.add("cls.W2", ad::glorot_uniform(spec_.hidden, k, rng));
        cls_b2_ = &params_.add("cls.b2", Matrix(1, k));
        break;
    }
  }

  MessagePassingSpec spec_;
  const Graph* graph_;
  std::shared_ptr<ChannelCache> cache_;
  ad::ParameterSet params_;
  ad::Parameter* enc_ = nullptr;
  std::vector<LayerState> layers_;
  ad::Parameter* gamma_ = nullptr;
  ad::Parameter* cls_w1_ = nullptr;
  ad::Parameter* cls_b1_ = nullptr;
  ad::Parameter* cls_w2_ = nullptr;
  ad::Parameter* cls_b2_ = nullptr;
  std::vector<std::size_t> rep_dims_;
  std::size_t fused_dim_ = 0;
};

}  // namespace hetgnn::htmp
