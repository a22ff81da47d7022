#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/autodiff/tape.hpp"
#include "hetgnn/matrix.hpp"

namespace hetgnn {

struct ForwardOptions {
  // Overrides every adaptive COMBINE with these fixed per-channel weights.
  std::optional<std::vector<double>> forced_alpha;
  // FUSE sees only the last layer's representation.
  bool fuse_last_only = false;
};

struct ForwardOutput {
  ad::Var logits;
  std::vector<ad::Var> representations;  // Z^0 .. Z^L
  ad::Var fused;
  std::vector<ad::Var> alphas;  // per-layer N x R channel weights (adaptive COMBINE only)
  std::optional<ad::Var> auxiliary_loss;
};

/// Anything the training protocol can fit: a parameterized forward pass over a
/// bound graph, plus an optional hook fired when validation accuracy improves.
class NodeClassifier {
 public:
  virtual ~NodeClassifier() = default;
  virtual std::string name() const = 0;
  virtual ad::ParameterSet& parameters() = 0;
  virtual ForwardOutput forward(ad::Tape& tape, const ForwardOptions& opt = {}) = 0;
  virtual double dropout() const = 0;

  /// Called with eval-mode logits after validation accuracy improved. Returns
  /// true when the model refreshed internal state (e.g. an estimated CM).
  virtual bool on_validation_improved(const Matrix& /*eval_logits*/) { return false; }

  /// Model-specific state worth reporting after a run.
  virtual nlohmann::json state_report() const { return nlohmann::json::object(); }
};

}  // namespace hetgnn
