#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/error.hpp"
#include "hetgnn/matrix.hpp"

namespace hetgnn::htmp {

enum class IndicatorKind { Identity, Raw, RawSelfLoop, KHop, FeatureKNN, Full, Supplementary };
enum class GuidanceKind { Identity, DegAvgRow, DegAvgSym, HighPass, Constant };
enum class CombineRule { Add, WeightedAdd, AdaAdd, Cat };
enum class FuseRule { Last, Cat, AdaAdd };
enum class EncoderKind { None, Linear };
enum class ClassifierKind { None, Linear, Mlp };

namespace detail {

template <typename E>
struct EnumName {
  E value;
  const char* name;
};

template <typename E, std::size_t N>
void enum_to_json(nlohmann::json& j, E e, const EnumName<E> (&table)[N]) {
  for (const auto& entry : table)
    if (entry.value == e) {
      j = entry.name;
      return;
    }
  throw ConfigError("unnamed enum value");
}

template <typename E, std::size_t N>
void enum_from_json(const nlohmann::json& j, E& e, const EnumName<E> (&table)[N], const char* what) {
  const auto s = j.get<std::string>();
  for (const auto& entry : table)
    if (s == entry.name) {
      e = entry.value;
      return;
    }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

inline constexpr EnumName<IndicatorKind> kIndicatorNames[] = {
    {IndicatorKind::Identity, "identity"},       {IndicatorKind::Raw, "raw"},
    {IndicatorKind::RawSelfLoop, "raw_self_loop"}, {IndicatorKind::KHop, "khop"},
    {IndicatorKind::FeatureKNN, "feature_knn"},  {IndicatorKind::Full, "full"},
    {IndicatorKind::Supplementary, "supplementary"}};
inline constexpr EnumName<GuidanceKind> kGuidanceNames[] = {{GuidanceKind::Identity, "identity"},
                                                            {GuidanceKind::DegAvgRow, "deg_avg_row"},
                                                            {GuidanceKind::DegAvgSym, "deg_avg_sym"},
                                                            {GuidanceKind::HighPass, "high_pass"},
                                                            {GuidanceKind::Constant, "constant"}};
inline constexpr EnumName<CombineRule> kCombineNames[] = {{CombineRule::Add, "add"},
                                                          {CombineRule::WeightedAdd, "weighted_add"},
                                                          {CombineRule::AdaAdd, "ada_add"},
                                                          {CombineRule::Cat, "cat"}};
inline constexpr EnumName<FuseRule> kFuseNames[] = {
    {FuseRule::Last, "last"}, {FuseRule::Cat, "cat"}, {FuseRule::AdaAdd, "ada_add"}};
inline constexpr EnumName<EncoderKind> kEncoderNames[] = {{EncoderKind::None, "none"}, {EncoderKind::Linear, "linear"}};
inline constexpr EnumName<ClassifierKind> kClassifierNames[] = {
    {ClassifierKind::None, "none"}, {ClassifierKind::Linear, "linear"}, {ClassifierKind::Mlp, "mlp"}};

}  // namespace detail

inline void to_json(nlohmann::json& j, IndicatorKind e) { detail::enum_to_json(j, e, detail::kIndicatorNames); }
inline void from_json(const nlohmann::json& j, IndicatorKind& e) {
  detail::enum_from_json(j, e, detail::kIndicatorNames, "indicator");
}
inline void to_json(nlohmann::json& j, GuidanceKind e) { detail::enum_to_json(j, e, detail::kGuidanceNames); }
inline void from_json(const nlohmann::json& j, GuidanceKind& e) {
  detail::enum_from_json(j, e, detail::kGuidanceNames, "guidance");
}
inline void to_json(nlohmann::json& j, CombineRule e) { detail::enum_to_json(j, e, detail::kCombineNames); }
inline void from_json(const nlohmann::json& j, CombineRule& e) {
  detail::enum_from_json(j, e, detail::kCombineNames, "combine rule");
}
inline void to_json(nlohmann::json& j, FuseRule e) { detail::enum_to_json(j, e, detail::kFuseNames); }
inline void from_json(const nlohmann::json& j, FuseRule& e) { detail::enum_from_json(j, e, detail::kFuseNames, "fuse rule"); }
inline void to_json(nlohmann::json& j, EncoderKind e) { detail::enum_to_json(j, e, detail::kEncoderNames); }
inline void from_json(const nlohmann::json& j, EncoderKind& e) {
  detail::enum_from_json(j, e, detail::kEncoderNames, "encoder");
}
inline void to_json(nlohmann::json& j, ClassifierKind e) { detail::enum_to_json(j, e, detail::kClassifierNames); }
inline void from_json(const nlohmann::json& j, ClassifierKind& e) {
  detail::enum_from_json(j, e, detail::kClassifierNames, "classifier");
}

struct IndicatorSpec {
  IndicatorKind kind = IndicatorKind::Raw;
  std::size_t k = 2;   // hop order (KHop) or neighbor count (FeatureKNN)
  bool exact = false;  // KHop: keep only nodes at distance exactly k

  bool operator==(const IndicatorSpec&) const = default;
};

struct GuidanceSpec {
  GuidanceKind kind = GuidanceKind::DegAvgRow;
  Matrix constant;  // used by GuidanceKind::Constant; conformable with the indicator
};

struct ChannelSpec {
  IndicatorSpec indicator;
  GuidanceSpec guidance;
  bool has_weight = true;
  int weight_group = -1;  // channels of a layer with the same group id >= 0 share W
};

struct CombineSpec {
  CombineRule rule = CombineRule::Add;
  std::vector<double> weights;  // WeightedAdd: one per channel
  bool use_degree = false;      // AdaAdd: append the degree column to the MLP input
};

struct LayerSpec {
  std::vector<ChannelSpec> channels;
  bool relu = true;
};

/// Declarative message-passing model: indicator/guidance channels per layer,
/// a COMBINE rule within layers and a FUSE rule across Z^0..Z^L.
struct MessagePassingSpec {
  std::string name = "custom";
  EncoderKind encoder = EncoderKind::None;
  bool encoder_relu = true;
  std::vector<LayerSpec> layers;
  CombineSpec combine;
  FuseRule fuse = FuseRule::Last;
  ClassifierKind classifier = ClassifierKind::Linear;
  std::size_t hidden = 64;
  double dropout = 0.5;
  bool relu_before_aggregate = false;

  void validate() const {
    if (hidden == 0) throw ConfigError(name + ": hidden dimension must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError(name + ": dropout must lie in [0, 1)");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      if (layer.channels.empty()) throw ConfigError(name + ": layer " + std::to_string(l + 1) + " has no channels");
      if (combine.rule == CombineRule::WeightedAdd && combine.weights.size() != layer.channels.size())
        throw ConfigError(name + ": WeightedAdd needs " + std::to_string(layer.channels.size()) + " weights, got " +
                          std::to_string(combine.weights.size()));
      for (const auto& ch : layer.channels) {
        if (ch.indicator.kind == IndicatorKind::KHop && ch.indicator.k < 2)
          throw ConfigError(name + ": khop indicator needs k >= 2");
        if (ch.indicator.kind == IndicatorKind::FeatureKNN && ch.indicator.k < 1)
          throw ConfigError(name + ": feature_knn indicator needs k >= 1");
      }
    }
    if (layers.empty() && classifier == ClassifierKind::None && encoder == EncoderKind::None)
      throw ConfigError(name + ": a model with no layers needs an encoder or classifier");
  }
};

inline void to_json(nlohmann::json& j, const IndicatorSpec& s) {
  j = {{"kind", s.kind}, {"k", s.k}, {"exact", s.exact}};
}
inline void from_json(const nlohmann::json& j, IndicatorSpec& s) {
  s.kind = j.at("kind").get<IndicatorKind>();
  s.k = j.value("k", std::size_t{2});
  s.exact = j.value("exact", false);
}

inline void to_json(nlohmann::json& j, const ChannelSpec& c) {
  j = {{"indicator", c.indicator}, {"guidance", c.guidance.kind}, {"has_weight", c.has_weight}, {"weight_group", c.weight_group}};
  if (c.guidance.kind == GuidanceKind::Constant) {
    j["guidance_matrix"] = {{"rows", c.guidance.constant.rows()},
                            {"cols", c.guidance.constant.cols()},
                            {"data", c.guidance.constant.data()}};
  }
}
inline void from_json(const nlohmann::json& j, ChannelSpec& c) {
  if (j.at("indicator").is_string())
    c.indicator.kind = j.at("indicator").get<IndicatorKind>();
  else
    c.indicator = j.at("indicator").get<IndicatorSpec>();
  c.guidance.kind = j.at("guidance").get<GuidanceKind>();
  c.has_weight = j.value("has_weight", true);
  c.weight_group = j.value("weight_group", -1);
  if (c.guidance.kind == GuidanceKind::Constant) {
    const auto& m = j.at("guidance_matrix");
    c.guidance.constant = Matrix(m.at("rows").get<std::size_t>(), m.at("cols").get<std::size_t>(),
                                 m.at("data").get<std::vector<double>>());
  }
}

inline void to_json(nlohmann::json& j, const LayerSpec& l) { j = {{"channels", l.channels}, {"relu", l.relu}}; }
inline void from_json(const nlohmann::json& j, LayerSpec& l) {
  l.channels = j.at("channels").get<std::vector<ChannelSpec>>();
  l.relu = j.value("relu", true);
}

inline void to_json(nlohmann::json& j, const CombineSpec& c) {
  j = {{"rule", c.rule}, {"weights", c.weights}, {"use_degree", c.use_degree}};
}
inline void from_json(const nlohmann::json& j, CombineSpec& c) {
  c.rule = j.at("rule").get<CombineRule>();
  c.weights = j.value("weights", std::vector<double>{});
  c.use_degree = j.value("use_degree", false);
}

inline void to_json(nlohmann::json& j, const MessagePassingSpec& s) {
  j = {{"name", s.name},
       {"encoder", s.encoder},
       {"encoder_relu", s.encoder_relu},
       {"layers", s.layers},
       {"combine", s.combine},
       {"fuse", s.fuse},
       {"classifier", s.classifier},
       {"hidden", s.hidden},
       {"dropout", s.dropout},
       {"relu_before_aggregate", s.relu_before_aggregate}};
}
inline void from_json(const nlohmann::json& j, MessagePassingSpec& s) {
  s.name = j.value("name", std::string("custom"));
  s.encoder = j.value("encoder", EncoderKind::None);
  s.encoder_relu = j.value("encoder_relu", true);
  s.layers = j.at("layers").get<std::vector<LayerSpec>>();
  s.combine = j.value("combine", CombineSpec{});
  s.fuse = j.value("fuse", FuseRule::Last);
  s.classifier = j.value("classifier", ClassifierKind::Linear);
  s.hidden = j.value("hidden", std::size_t{64});
  s.dropout = j.value("dropout", 0.5);
  s.relu_before_aggregate = j.value("relu_before_aggregate", false);
}

/// Parses a spec, mapping JSON and enum errors to ConfigError.
inline MessagePassingSpec spec_from_json(const nlohmann::json& j) {
  MessagePassingSpec s;
  try {
    s = j.get<MessagePassingSpec>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace hetgnn::htmp
