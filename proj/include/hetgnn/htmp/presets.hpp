#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/htmp/spec.hpp"

namespace hetgnn::htmp {

struct PresetOptions {
  std::size_t layers = 2;
  std::size_t hidden = 64;
  double dropout = 0.5;
  bool relu_variant = false;
  std::size_t mixhop_k = 2;
};

inline void from_json(const nlohmann::json& j, PresetOptions& o) {
  o.layers = j.value("layers", o.layers);
  o.hidden = j.value("hidden", o.hidden);
  o.dropout = j.value("dropout", o.dropout);
  o.relu_variant = j.value("relu_variant", o.relu_variant);
  o.mixhop_k = j.value("mixhop_k", o.mixhop_k);
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"mlp", "gcn", "mixhop", "h2gcn", "gprgnn", "acmgcn"};
  return names;
}

namespace detail {

inline ChannelSpec channel(IndicatorKind ind, GuidanceKind guide, bool weight = true, std::size_t k = 2,
                           bool exact = false) {
  ChannelSpec c;
  c.indicator = IndicatorSpec{ind, k, exact};
  c.guidance.kind = guide;
  c.has_weight = weight;
  return c;
}

inline std::vector<LayerSpec> repeat(std::size_t n, const std::vector<ChannelSpec>& channels, bool last_relu) {
  std::vector<LayerSpec> layers(n, LayerSpec{channels, true});
  if (!layers.empty()) layers.back().relu = last_relu;
  return layers;
}

}  // namespace detail

/// Baseline models expressed as message-passing specs.
inline MessagePassingSpec build_preset(const std::string& name, const Graph& g, const PresetOptions& opt = {}) {
  if (g.n_features() == 0) throw ConfigError("preset " + name + ": graph has no features");
  if (opt.mixhop_k < 2) throw ConfigError("preset mixhop: k must be at least 2");
  MessagePassingSpec s;
  s.name = name;
  s.hidden = opt.hidden;
  s.dropout = opt.dropout;
  s.relu_before_aggregate = opt.relu_variant;
  using detail::channel;
  using G = GuidanceKind;
  using I = IndicatorKind;

  if (name == "mlp") {
    s.layers = detail::repeat(opt.layers, {channel(I::Identity, G::Identity)}, false);
    s.classifier = ClassifierKind::None;
  } else if (name == "gcn") {
    s.layers = detail::repeat(opt.layers, {channel(I::RawSelfLoop, G::DegAvgSym)}, false);
    s.classifier = ClassifierKind::None;
  } else if (name == "mixhop") {
    std::vector<ChannelSpec> chs{channel(I::Identity, G::Identity), channel(I::Raw, G::DegAvgSym)};
    for (std::size_t k = 2; k <= opt.mixhop_k; ++k) chs.push_back(channel(I::KHop, G::DegAvgSym, true, k));
    s.layers = detail::repeat(opt.layers, chs, true);
    s.combine.rule = CombineRule::Cat;
    s.classifier = ClassifierKind::Linear;
  } else if (name == "h2gcn") {
    s.encoder = EncoderKind::Linear;
    s.encoder_relu = true;
    s.layers = detail::repeat(
        opt.layers, {channel(I::Raw, G::DegAvgSym, false), channel(I::KHop, G::DegAvgSym, false, 2, true)}, false);
    for (auto& l : s.layers) l.relu = false;
    s.combine.rule = CombineRule::Cat;
    s.fuse = FuseRule::Cat;
    s.classifier = ClassifierKind::Linear;
  } else if (name == "gprgnn") {
    s.encoder = EncoderKind::Linear;
    s.encoder_relu = true;
    s.layers = detail::repeat(opt.layers, {channel(I::RawSelfLoop, G::DegAvgSym, false)}, false);
    for (auto& l : s.layers) l.relu = false;
    s.fuse = FuseRule::AdaAdd;
    s.classifier = ClassifierKind::Linear;
  } else if (name == "acmgcn") {
    s.layers = detail::repeat(opt.layers,
                              {channel(I::Identity, G::Identity), channel(I::RawSelfLoop, G::DegAvgSym),
                               channel(I::RawSelfLoop, G::HighPass)},
                              false);
    s.combine.rule = CombineRule::AdaAdd;
    s.classifier = ClassifierKind::None;
  } else {
    throw ConfigError("unknown preset '" + name + "'");
  }
  s.validate();
  return s;
}

}  // namespace hetgnn::htmp
