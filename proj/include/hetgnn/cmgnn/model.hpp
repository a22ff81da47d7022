#pragma once

#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/autodiff/adam.hpp"
#include "hetgnn/autodiff/ops.hpp"
#include "hetgnn/cmgnn/estimate.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/htmp/layers.hpp"
#include "hetgnn/htmp/spec.hpp"
#include "hetgnn/model.hpp"
#include "hetgnn/rng.hpp"

namespace hetgnn::cmgnn {

enum class RawGuidance { Row, Sym };

struct CmgnnConfig {
  std::size_t layers = 1;
  std::size_t hidden = 64;
  double dropout = 0.5;
  double lambda = 1.0;
  bool structure_info = false;
  bool relu_variant = false;
  bool discrimination = true;  // false drops the discrimination term entirely
  bool supplementary = true;   // false drops the prototype channel
  bool use_degree = true;
  RawGuidance raw_guidance = RawGuidance::Row;

  void validate() const {
    if (layers == 0) throw ConfigError("cmgnn: layers must be >= 1");
    if (hidden == 0) throw ConfigError("cmgnn: hidden must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("cmgnn: dropout must lie in [0, 1)");
    if (!(lambda >= 0.0)) throw ConfigError("cmgnn: lambda must be >= 0");
  }
};

inline void to_json(nlohmann::json& j, const CmgnnConfig& c) {
  j = {{"layers", c.layers},
       {"hidden", c.hidden},
       {"dropout", c.dropout},
       {"lambda", c.lambda},
       {"structure_info", c.structure_info},
       {"relu_variant", c.relu_variant},
       {"discrimination", c.discrimination},
       {"supplementary", c.supplementary},
       {"use_degree", c.use_degree},
       {"raw_guidance", c.raw_guidance == RawGuidance::Row ? "row" : "sym"}};
}

inline void from_json(const nlohmann::json& j, CmgnnConfig& c) {
  c.layers = j.value("layers", c.layers);
  c.hidden = j.value("hidden", c.hidden);
  c.dropout = j.value("dropout", c.dropout);
  c.lambda = j.value("lambda", c.lambda);
  c.structure_info = j.value("structure_info", c.structure_info);
  c.relu_variant = j.value("relu_variant", c.relu_variant);
  c.discrimination = j.value("discrimination", c.discrimination);
  c.supplementary = j.value("supplementary", c.supplementary);
  c.use_degree = j.value("use_degree", c.use_degree);
  const std::string rg = j.value("raw_guidance", std::string("row"));
  if (rg == "row")
    c.raw_guidance = RawGuidance::Row;
  else if (rg == "sym")
    c.raw_guidance = RawGuidance::Sym;
  else
    throw ConfigError("unknown raw_guidance '" + rg + "'");
}

/// Sum over ordered pairs i != j of cos(M_i Z, M_j Z).
inline ad::Var discrimination_loss(const Matrix& cm, ad::Var z_ptt) {
  const std::size_t k = cm.rows();
  if (cm.cols() != z_ptt.rows()) throw ShapeError("discrimination loss: " + cm.shape_str() + " x " + std::to_string(z_ptt.rows()) + " rows");
  ad::Tape& t = z_ptt.tape();
  ad::Var desired = ad::matmul(t.constant(cm), z_ptt);
  std::vector<ad::Var> rows;
  for (std::size_t i = 0; i < k; ++i) rows.push_back(ad::gather_rows(desired, {i}));
  std::optional<ad::Var> acc;
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) {
      ad::Var c = ad::cosine(rows[i], rows[j]);
      acc = acc ? ad::add(*acc, c) : c;
    }
  if (!acc) return t.constant(Matrix(1, 1));
  return ad::scale(*acc, 2.0);
}

/// L = CE over the training rows + lambda * L_dis.
inline ad::Var total_loss(ad::Var logits, std::span<const int> labels, std::span<const std::size_t> train,
                          std::optional<ad::Var> dis, double lambda) {
  if (train.empty()) throw RangeError("total_loss: empty training mask");
  if (lambda < 0.0) throw ConfigError("total_loss: lambda must be >= 0");
  ad::Var ce = ad::masked_cross_entropy(logits, labels, train);
  return dis ? ad::add(ce, ad::scale(*dis, lambda)) : ce;
}

/// Class prototypes are appended as K virtual nodes after the N real ones;
/// representations and alphas in ForwardOutput are stacked (N + K rows).
class CmgnnModel final : public NodeClassifier {
 public:
  CmgnnModel(const Graph& g, std::vector<std::size_t> train, CmgnnConfig cfg, std::uint64_t seed)
      : graph_(&g), train_(std::move(train)), cfg_(cfg) {
    cfg_.validate();
    if (train_.empty()) throw RangeError("cmgnn: empty training set");
    prototypes_ = build_prototypes(g, train_);
    build_structures();
    build_parameters(seed);
    refresh(pinned_soft_labels(g, train_, nullptr));
  }

  std::string name() const override {
    std::string n = "cmgnn";
    if (!cfg_.supplementary) n += cfg_.discrimination ? "_wo_sm" : "_wo_sm_dl";
    else if (!cfg_.discrimination) n += "_wo_dl";
    return n;
  }
  ad::ParameterSet& parameters() override { return params_; }
  double dropout() const override { return cfg_.dropout; }
  const CmgnnConfig& config() const noexcept { return cfg_; }
  const PrototypeSet& prototypes() const noexcept { return prototypes_; }
  const Matrix& soft_labels() const noexcept { return soft_; }
  std::size_t n_nodes() const noexcept { return graph_->n_nodes(); }

  const CMEstimate& estimate() const {
    if (!estimate_) throw Error("cmgnn: no compatibility estimate");
    return *estimate_;
  }

  /// Installs new soft labels and re-estimates M and B^sup.
  void refresh(Matrix soft) {
    CMEstimate est = estimate_cm(*graph_, soft);
    est.epoch = refreshes_++;
    const std::size_t n = graph_->n_nodes(), k = graph_->n_classes();
    Matrix bsup = supplementary_guidance(soft, est.cm.m);
    Matrix sup(n + k, k);
    for (std::size_t i = 0; i < n; ++i) std::copy(bsup.row(i).begin(), bsup.row(i).end(), sup.row(i).begin());
    for (std::size_t c = 0; c < k; ++c) std::copy(est.cm.m.row(c).begin(), est.cm.m.row(c).end(), sup.row(n + c).begin());
    sup_ = std::move(sup);
    soft_ = std::move(soft);
    estimate_ = std::move(est);
  }

  bool on_validation_improved(const Matrix& eval_logits) override {
    const Matrix probs = softmax_rows(eval_logits);
    refresh(pinned_soft_labels(*graph_, train_, &probs));
    return true;
  }

  nlohmann::json state_report() const override {
    nlohmann::json j;
    if (!estimate_) return j;
    const auto& est = *estimate_;
    std::vector<std::vector<double>> rows;
    for (std::size_t r = 0; r < est.cm.m.rows(); ++r) rows.emplace_back(est.cm.m.row(r).begin(), est.cm.m.row(r).end());
    j["cm"] = rows;
    j["cm_fallback_rows"] = est.cm.fallback_rows;
    j["cm_refreshes"] = refreshes_;
    const auto& g = est.confidence;
    double lo = g.empty() ? 0.0 : g.front(), hi = lo, sum = 0.0;
    for (double v : g) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      sum += v;
    }
    j["confidence"] = {{"min", lo}, {"max", hi}, {"mean", g.empty() ? 0.0 : sum / static_cast<double>(g.size())}};
    return j;
  }

  ForwardOutput forward(ad::Tape& tape, const ForwardOptions& opt = {}) override {
    if (!estimate_) throw Error("cmgnn: forward without a compatibility estimate");
    const std::size_t n = graph_->n_nodes(), k = graph_->n_classes();
    const bool relu_first = cfg_.relu_variant;
    ForwardOutput out;

    ad::Var x = tape.constant(x_all_);
    ad::Var z0;
    if (cfg_.structure_info) {
      ad::Var fx = ad::matmul(x, tape.parameter(*wx_));
      ad::Var fa = ad::spmm(structure_, tape.parameter(*wa_));
      z0 = ad::matmul(ad::concat_cols({fx, fa}), tape.parameter(*w0_));
    } else {
      z0 = ad::matmul(x, tape.parameter(*w0_));
    }
    if (!relu_first) z0 = ad::relu(z0);
    out.representations.push_back(ad::dropout(z0, cfg_.dropout));

    ad::Var degree = tape.constant(degree_col_);
    ad::Var sup = tape.constant(sup_);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const LayerParams& lp = layers_[l];
      try {
        ad::Var h = out.representations.back();
        if (relu_first) h = ad::relu(h);
        ad::Var ego = ad::matmul(h, tape.parameter(*lp.w[0]));
        ad::Var raw = ad::spmm(raw_, ad::matmul(h, tape.parameter(*lp.w[1])));
        std::vector<ad::Var> channels{ego, raw};
        if (cfg_.supplementary) {
          ad::Var h_ptt = ad::gather_rows(h, proto_rows_);
          channels.push_back(ad::matmul(sup, ad::matmul(h_ptt, tape.parameter(*lp.w[2]))));
        }
        ad::Var alpha = [&] {
          if (opt.forced_alpha) {
            if (opt.forced_alpha->size() != channels.size())
              throw ConfigError("cmgnn: forced alpha needs " + std::to_string(channels.size()) + " entries");
            return htmp::constant_weights(tape, n + k, *opt.forced_alpha);
          }
          return htmp::ada_weights(channels, cfg_.use_degree ? std::optional<ad::Var>(degree) : std::nullopt, lp.ada);
        }();
        out.alphas.push_back(alpha);
        ad::Var z = htmp::mix_channels(alpha, channels);
        if (!relu_first) z = ad::relu(z);
        out.representations.push_back(ad::dropout(z, cfg_.dropout));
      } catch (const NumericalError& e) {
        throw NumericalError("cmgnn: layer " + std::to_string(l + 1) + ": " + e.what());
      }
    }

    out.fused = opt.fuse_last_only ? out.representations.back() : ad::concat_cols(out.representations);
    ad::Var f = relu_first ? ad::relu(out.fused) : out.fused;
    if (opt.fuse_last_only && f.cols() != cls_w1_->value.rows())
      throw ConfigError("cmgnn: fuse_last_only needs a classifier sized for one layer (use for_last_layer_classifier)");
    ad::Var hid = ad::relu(ad::add_bias(ad::matmul(f, tape.parameter(*cls_w1_)), tape.parameter(*cls_b1_)));
    hid = ad::dropout(hid, cfg_.dropout);
    ad::Var logits_all = ad::add_bias(ad::matmul(hid, tape.parameter(*cls_w2_)), tape.parameter(*cls_b2_));
    out.logits = ad::gather_rows(logits_all, node_rows_);

    if (cfg_.discrimination) {
      ad::Var z_ptt = ad::gather_rows(out.fused, proto_rows_);
      out.auxiliary_loss = ad::scale(discrimination_loss(estimate_->cm.m, z_ptt), cfg_.lambda);
    }
    return out;
  }

  /// Reference spec with the same parameter shapes as this model restricted to
  /// its ego channel: linear encoder, identity layers, Cat fuse, MLP classifier.
  static htmp::MessagePassingSpec reference_mlp_spec(const CmgnnConfig& cfg) {
    htmp::MessagePassingSpec s;
    s.name = "mlp_cat";
    s.encoder = htmp::EncoderKind::Linear;
    s.encoder_relu = true;
    htmp::ChannelSpec ego;
    ego.indicator.kind = htmp::IndicatorKind::Identity;
    ego.guidance.kind = htmp::GuidanceKind::Identity;
    s.layers.assign(cfg.layers, htmp::LayerSpec{{ego}, true});
    s.combine.rule = htmp::CombineRule::Add;
    s.fuse = htmp::FuseRule::Cat;
    s.classifier = htmp::ClassifierKind::Mlp;
    s.hidden = cfg.hidden;
    s.dropout = cfg.dropout;
    s.relu_before_aggregate = cfg.relu_variant;
    return s;
  }

  /// Replaces the classifier input width with one layer's width, so that a
  /// truncated fuse (last layer only) can be evaluated.
  void for_last_layer_classifier(std::uint64_t seed) {
    Rng rng(seed, 0xc1a);
    cls_w1_->value = ad::glorot_uniform(cfg_.hidden, cfg_.hidden, rng);
    cls_w1_->grad = Matrix(cfg_.hidden, cfg_.hidden);
  }

 private:
  struct LayerParams {
    ad::Parameter* w[3] = {nullptr, nullptr, nullptr};
    htmp::AdaWeightParams ada;
  };

  void build_structures() {
    const Graph& g = *graph_;
    const std::size_t n = g.n_nodes(), k = g.n_classes(), d = g.n_features();
    x_all_ = Matrix(n + k, d);
    for (std::size_t i = 0; i < n; ++i) std::copy(g.features().row(i).begin(), g.features().row(i).end(), x_all_.row(i).begin());
    for (std::size_t c = 0; c < k; ++c)
      std::copy(prototypes_.features.row(c).begin(), prototypes_.features.row(c).end(), x_all_.row(n + c).begin());

    const CsrMatrix norm =
        cfg_.raw_guidance == RawGuidance::Row ? row_normalize(g.adjacency()) : sym_normalize(g.adjacency());
    std::vector<std::tuple<std::size_t, std::size_t, double>> t;
    t.reserve(norm.nnz());
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t e = norm.row_begin(r); e < norm.row_end(r); ++e) t.emplace_back(r, norm.col_idx()[e], norm.values()[e]);
    raw_ = std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(n + k, n + k, t));
    structure_ = std::make_shared<const CsrMatrix>(CsrMatrix::from_triplets(n + k, n, std::move(t)));

    degree_col_ = Matrix(n + k, 1);
    for (std::size_t i = 0; i < n; ++i) degree_col_(i, 0) = static_cast<double>(g.degree(i));
    node_rows_.resize(n);
    std::iota(node_rows_.begin(), node_rows_.end(), std::size_t{0});
    proto_rows_.resize(k);
    std::iota(proto_rows_.begin(), proto_rows_.end(), n);
  }

  void build_parameters(std::uint64_t seed) {
    Rng rng(seed, 0xc3);
    const std::size_t h = cfg_.hidden, d = graph_->n_features(), k = graph_->n_classes();
    if (cfg_.structure_info) {
      wx_ = &params_.add("enc.WX", ad::glorot_uniform(d, h, rng));
      wa_ = &params_.add("enc.WA", ad::glorot_uniform(graph_->n_nodes(), h, rng));
      w0_ = &params_.add("enc.W0", ad::glorot_uniform(2 * h, h, rng));
    } else {
      w0_ = &params_.add("enc.W0", ad::glorot_uniform(d, h, rng));
    }
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string prefix = "layer" + std::to_string(l + 1);
      LayerParams lp;
      const std::size_t n_ch = cfg_.supplementary ? 3 : 2;
      for (std::size_t r = 0; r < n_ch; ++r)
        lp.w[r] = &params_.add(prefix + ".ch" + std::to_string(r) + ".W", ad::glorot_uniform(h, h, rng));
      lp.ada = htmp::add_ada_weight_params(params_, prefix, n_ch * h + (cfg_.use_degree ? 1 : 0), n_ch, rng);
      layers_.push_back(lp);
    }
    const std::size_t fused = (cfg_.layers + 1) * h;
    cls_w1_ = &params_.add("cls.W1", ad::glorot_uniform(fused, h, rng));
    cls_b1_ = &params_.add("cls.b1", Matrix(1, h));
    cls_w2_ = &params_.add("cls.W2", ad::glorot_uniform(h, k, rng));
    cls_b2_ = &params_.add("cls.b2", Matrix(1, k));
  }

  const Graph* graph_;
  std::vector<std::size_t> train_;
  CmgnnConfig cfg_;
  PrototypeSet prototypes_;
  Matrix x_all_;
  std::shared_ptr<const CsrMatrix> raw_;
  std::shared_ptr<const CsrMatrix> structure_;
  Matrix degree_col_;
  Matrix sup_;
  Matrix soft_;
  std::optional<CMEstimate> estimate_;
  std::size_t refreshes_ = 0;
  std::vector<std::size_t> node_rows_, proto_rows_;

  ad::ParameterSet params_;
  ad::Parameter* wx_ = nullptr;
  ad::Parameter* wa_ = nullptr;
  ad::Parameter* w0_ = nullptr;
  std::vector<LayerParams> layers_;
  ad::Parameter* cls_w1_ = nullptr;
  ad::Parameter* cls_b1_ = nullptr;
  ad::Parameter* cls_w2_ = nullptr;
  ad::Parameter* cls_b2_ = nullptr;
};

}  // namespace hetgnn::cmgnn
