#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/autodiff/adam.hpp"
#include "hetgnn/autodiff/ops.hpp"
#include "hetgnn/error.hpp"
#include "hetgnn/graph.hpp"
#include "hetgnn/model.hpp"
#include "hetgnn/splits.hpp"

namespace hetgnn {

struct TrainConfig {
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t max_epochs = 500;
  std::size_t patience = 100;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr}, {"weight_decay", c.weight_decay}, {"max_epochs", c.max_epochs}, {"patience", c.patience}};
}
inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.lr = j.value("lr", c.lr);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  if (!(c.lr >= 0.0) || !(c.weight_decay >= 0.0)) throw ConfigError("lr and weight_decay must be >= 0");
  if (c.max_epochs == 0) throw ConfigError("max_epochs must be positive");
}

struct RunResult {
  std::string model;
  std::uint64_t seed = 0;
  std::size_t split_id = 0;
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<double> loss_curve;
  std::vector<double> val_curve;
  std::vector<double> epoch_ms;
  std::vector<bool> refreshed;  // epochs that refreshed model state after improving
  std::vector<std::size_t> test_index;
  std::vector<int> test_predictions;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json model_state = nlohmann::json::object();
  bool diverged = false;
  std::string error;
};

inline void to_json(nlohmann::json& j, const RunResult& r) {
  j = {{"model", r.model},
       {"seed", r.seed},
       {"split_id", r.split_id},
       {"config", r.config},
       {"epochs_run", r.epochs_run},
       {"best_epoch", r.best_epoch},
       {"best_val_accuracy", r.best_val_accuracy},
       {"test_accuracy", r.test_accuracy},
       {"val_curve", r.val_curve},
       {"loss_curve", r.loss_curve},
       {"epoch_ms", r.epoch_ms},
       {"refreshed", r.refreshed},
       {"test_index", r.test_index},
       {"test_predictions", r.test_predictions},
       {"model_state", r.model_state},
       {"diverged", r.diverged}};
  if (!r.error.empty()) j["error"] = r.error;
}

inline void from_json(const nlohmann::json& j, RunResult& r) {
  r.model = j.value("model", std::string());
  r.seed = j.value("seed", std::uint64_t{0});
  r.split_id = j.value("split_id", std::size_t{0});
  r.epochs_run = j.value("epochs_run", std::size_t{0});
  r.best_epoch = j.value("best_epoch", std::size_t{0});
  r.best_val_accuracy = j.value("best_val_accuracy", 0.0);
  r.test_accuracy = j.value("test_accuracy", 0.0);
  r.val_curve = j.value("val_curve", std::vector<double>{});
  r.loss_curve = j.value("loss_curve", std::vector<double>{});
  r.epoch_ms = j.value("epoch_ms", std::vector<double>{});
  r.refreshed = j.value("refreshed", std::vector<bool>(r.epoch_ms.size(), false));
  if (r.refreshed.size() != r.epoch_ms.size()) throw ParseError("run record: refreshed and epoch_ms lengths differ");
  r.test_index = j.value("test_index", std::vector<std::size_t>{});
  r.test_predictions = j.value("test_predictions", std::vector<int>{});
  r.config = j.value("config", nlohmann::json::object());
  r.model_state = j.value("model_state", nlohmann::json::object());
  r.diverged = j.value("diverged", false);
  r.error = j.value("error", std::string());
}

/// Fraction of `index` whose argmax prediction matches the label.
inline double accuracy(const Matrix& logits, std::span<const int> labels, std::span<const std::size_t> index) {
  if (index.empty()) throw RangeError("accuracy over an empty index set");
  const std::vector<int> pred = argmax_rows(logits);
  std::size_t hit = 0;
  for (auto i : index) {
    if (labels[i] < 0) throw RangeError("accuracy: node " + std::to_string(i) + " is unlabeled");
    if (pred[i] == labels[i]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(index.size());
}

/// Full-batch training with Adam and early stopping on validation accuracy.
/// Test accuracy is taken from the epoch with the best validation accuracy
/// (strict improvements only); parameters are restored to that epoch.
/// Divergence stops the run and is reported through `diverged` and `error`.
inline RunResult train_node_classifier(NodeClassifier& model, const Graph& g, const Split& split,
                                       const TrainConfig& cfg, std::uint64_t seed, std::size_t split_id = 0) {
  split.validate(g.n_nodes());
  if (split.train.empty() || split.valid.empty() || split.test.empty())
    throw RangeError("split has an empty train, validation or test part");
  const auto& labels = g.labels();
  for (const auto* part : {&split.train, &split.valid, &split.test})
    for (auto i : *part)
      if (labels[i] < 0) throw RangeError("split node " + std::to_string(i) + " is unlabeled");

  RunResult res;
  res.model = model.name();
  res.seed = seed;
  res.split_id = split_id;
  res.config = cfg;
  res.test_index = split.test;

  ad::ParameterSet& params = model.parameters();
  ad::Adam adam(ad::AdamConfig{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay});
  double best = -1.0;
  std::vector<Matrix> snapshot = params.snapshot();
  Matrix best_logits;
  std::size_t since = 0;
  using clock = std::chrono::steady_clock;

  try {
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
      const auto t0 = clock::now();
      params.zero_grad();
      {
        ad::Tape tape(true, seed, epoch);
        ForwardOutput out = model.forward(tape);
        ad::Var loss = ad::masked_cross_entropy(out.logits, labels, split.train);
        if (out.auxiliary_loss) loss = ad::add(loss, *out.auxiliary_loss);
        res.loss_curve.push_back(loss.value()(0, 0));
        tape.backward(loss);
      }
      adam.step(params);

      Matrix logits;
      {
        ad::Tape eval(false);
        logits = model.forward(eval).logits.value();
      }
      const double val = accuracy(logits, labels, split.valid);
      res.val_curve.push_back(val);
      bool refreshed = false;
      if (val > best) {
        best = val;
        res.best_epoch = epoch;
        snapshot = params.snapshot();
        best_logits = logits;
        since = 0;
        refreshed = model.on_validation_improved(logits);
      } else {
        ++since;
      }
      res.refreshed.push_back(refreshed);
      res.epoch_ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
      res.epochs_run = epoch + 1;
      if (since >= cfg.patience) break;
    }
  } catch (const NumericalError& e) {
    res.diverged = true;
    res.error = e.what();
  }

  if (best >= 0.0) {
    params.restore(snapshot);
    res.best_val_accuracy = best;
    res.test_accuracy = accuracy(best_logits, labels, split.test);
    const std::vector<int> pred = argmax_rows(best_logits);
    for (auto i : split.test) res.test_predictions.push_back(pred[i]);
  }
  res.model_state = model.state_report();
  return res;
}

}  // namespace hetgnn
