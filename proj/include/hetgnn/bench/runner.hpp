#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hetgnn/bench/pool.hpp"
#include "hetgnn/bench/stats.hpp"
#include "hetgnn/cmgnn/model.hpp"
#include "hetgnn/dataset_io.hpp"
#include "hetgnn/error.hpp"
#include "hetgnn/htmp/model.hpp"
#include "hetgnn/htmp/presets.hpp"
#include "hetgnn/rng.hpp"
#include "hetgnn/train.hpp"

namespace hetgnn::bench {

/// Everything needed to train one model on one dataset; JSON field names
/// match the member names.
struct RunConfig {
  std::string model = "cmgnn";  // preset, cmgnn variant, or path to a JSON model spec
  std::string dataset;
  std::vector<std::size_t> splits{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::uint64_t seed = 0;
  double lr = 0.01;
  double weight_decay = 5e-4;
  std::size_t patience = 200;
  double dropout = 0.5;
  double lambda = 1.0;
  std::size_t layers = 1;
  std::size_t nhidden = 64;
  bool relu_variant = false;
  bool structure_info = false;
  std::size_t max_epochs = 500;

  TrainConfig train_config() const { return TrainConfig{lr, weight_decay, max_epochs, patience}; }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"model", c.model},         {"dataset", c.dataset},   {"splits", c.splits},
       {"seed", c.seed},           {"lr", c.lr},             {"weight_decay", c.weight_decay},
       {"patience", c.patience},   {"dropout", c.dropout},   {"lambda", c.lambda},
       {"layers", c.layers},       {"nhidden", c.nhidden},   {"relu_variant", c.relu_variant},
       {"structure_info", c.structure_info}, {"max_epochs", c.max_epochs}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  static const char* known[] = {"model",   "dataset", "splits", "seed",         "lr",            "weight_decay",
                                "patience", "dropout", "lambda", "layers",       "nhidden",       "relu_variant",
                                "structure_info", "max_epochs"};
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
      throw ConfigError("unknown run config field '" + key + "'");
  try {
    c.model = j.value("model", c.model);
    c.dataset = j.value("dataset", c.dataset);
    c.splits = j.value("splits", c.splits);
    c.seed = j.value("seed", c.seed);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.patience = j.value("patience", c.patience);
    c.dropout = j.value("dropout", c.dropout);
    c.lambda = j.value("lambda", c.lambda);
    c.layers = j.value("layers", c.layers);
    c.nhidden = j.value("nhidden", c.nhidden);
    c.relu_variant = j.value("relu_variant", c.relu_variant);
    c.structure_info = j.value("structure_info", c.structure_info);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid run config: ") + e.what());
  }
}

inline void validate(const RunConfig& c) {
  if (!(c.lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(c.lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (c.layers == 0 && c.model.rfind("cmgnn", 0) == 0) throw ConfigError("cmgnn needs layers >= 1");
  if (c.nhidden == 0) throw ConfigError("nhidden must be positive");
  if (c.max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (c.splits.empty()) throw ConfigError("no split ids");
}

inline const std::vector<std::string>& cmgnn_variants() {
  static const std::vector<std::string> v{"cmgnn", "cmgnn_wo_dl", "cmgnn_wo_sm", "cmgnn_wo_sm_dl"};
  return v;
}

inline cmgnn::CmgnnConfig cmgnn_config(const RunConfig& c) {
  cmgnn::CmgnnConfig m;
  m.layers = c.layers;
  m.hidden = c.nhidden;
  m.dropout = c.dropout;
  m.lambda = c.lambda;
  m.structure_info = c.structure_info;
  m.relu_variant = c.relu_variant;
  m.discrimination = c.model == "cmgnn" || c.model == "cmgnn_wo_sm";
  m.supplementary = c.model == "cmgnn" || c.model == "cmgnn_wo_dl";
  return m;
}

/// Per-run seed; repeated split ids give identical runs.
inline std::uint64_t run_seed(std::uint64_t seed, std::size_t split_id) { return mix_seed(seed, 0x5eed0000 + split_id); }

inline std::unique_ptr<NodeClassifier> make_model(const RunConfig& c, const Graph& g, const Split& split,
                                                  std::uint64_t seed) {
  const auto& variants = cmgnn_variants();
  if (std::find(variants.begin(), variants.end(), c.model) != variants.end())
    return std::make_unique<cmgnn::CmgnnModel>(g, split.train, cmgnn_config(c), seed);
  const auto& presets = htmp::preset_names();
  if (std::find(presets.begin(), presets.end(), c.model) != presets.end()) {
    htmp::PresetOptions opt;
    opt.layers = c.layers;
    opt.hidden = c.nhidden;
    opt.dropout = c.dropout;
    opt.relu_variant = c.relu_variant;
    return std::make_unique<htmp::HtmpModel>(htmp::build_preset(c.model, g, opt), g, seed);
  }
  if (c.model.size() > 5 && c.model.ends_with(".json")) {
    nlohmann::json j;
    try {
      j = read_json(c.model);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    return std::make_unique<htmp::HtmpModel>(htmp::spec_from_json(j), g, seed);
  }
  throw ConfigError("unknown model '" + c.model + "'");
}

inline const Split& split_at(const std::vector<Split>& splits, std::size_t id) {
  if (id >= splits.size())
    throw RangeError("split " + std::to_string(id) + " requested, dataset has " + std::to_string(splits.size()));
  return splits[id];
}

inline RunResult run_split(const RunConfig& c, const Graph& g, const std::vector<Split>& splits, std::size_t split_id) {
  const std::uint64_t seed = run_seed(c.seed, split_id);
  const Split& s = split_at(splits, split_id);
  auto model = make_model(c, g, s, seed);
  RunResult r = train_node_classifier(*model, g, s, c.train_config(), seed, split_id);
  r.config = c;
  return r;
}

struct BenchReport {
  RunConfig config;
  std::vector<RunResult> runs;
  std::vector<double> accuracies;      // successful runs, in split order
  std::vector<std::size_t> diverged;   // split ids excluded from the aggregate
  MeanStd test;
  MeanStd valid;
  double ms_per_epoch = 0.0;
  DegreeBucketStats degree;
  bool has_degree = false;
};

inline BenchReport run_bench(const RunConfig& c, const Graph& g, const std::vector<Split>& splits,
                             std::size_t threads = 1) {
  validate(c);
  for (auto id : c.splits) split_at(splits, id);
  BenchReport rep;
  rep.config = c;
  rep.runs.resize(c.splits.size());
  parallel_for(c.splits.size(), threads, [&](std::size_t i) { rep.runs[i] = run_split(c, g, splits, c.splits[i]); });
  std::vector<double> vals, ms;
  std::vector<RunResult> ok;
  for (const auto& r : rep.runs) {
    if (r.diverged) {
      rep.diverged.push_back(r.split_id);
      continue;
    }
    rep.accuracies.push_back(r.test_accuracy);
    vals.push_back(r.best_val_accuracy);
    for (std::size_t e = 0; e < r.epoch_ms.size(); ++e)
      if (!r.refreshed[e]) ms.push_back(r.epoch_ms[e]);
    ok.push_back(r);
  }
  rep.test = mean_std(rep.accuracies);
  rep.valid = mean_std(vals);
  rep.ms_per_epoch = mean_std(ms).mean;
  if (!ok.empty() && ok.front().test_index.size() >= 5) {
    rep.degree = degree_report(g, ok, 5);
    rep.has_degree = true;
  }
  return rep;
}

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = {{"config", r.config},
       {"accuracies", r.accuracies},
       {"diverged_splits", r.diverged},
       {"test_mean", r.test.mean},
       {"test_std", r.test.std},
       {"valid_mean", r.valid.mean},
       {"valid_std", r.valid.std},
       {"cell", format_cell(r.test)},
       {"ms_per_epoch", r.ms_per_epoch}};
  if (r.has_degree) j["degree_buckets"] = r.degree;
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& run : r.runs) {
    nlohmann::json rj = run;
    runs.push_back(rj);
  }
  j["runs"] = runs;
}

/// Aligned text summary in the "mean ± std" cell style.
inline std::string bench_table(const BenchReport& r, const std::string& dataset_name) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %-20s %-16s %10s\n", "model", "dataset", "accuracy", "ms/epoch");
  out += buf;
  std::snprintf(buf, sizeof buf, "%-16s %-20s %-16s %10.2f\n", r.config.model.c_str(), dataset_name.c_str(),
                format_cell(r.test).c_str(), r.ms_per_epoch);
  out += buf;
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const auto& run = r.runs[i];
    if (run.diverged)
      std::snprintf(buf, sizeof buf, "  split %-3zu DIVERGED: %s\n", run.split_id, run.error.c_str());
    else
      std::snprintf(buf, sizeof buf, "  split %-3zu test %6.2f  valid %6.2f  best epoch %zu\n", run.split_id,
                    100.0 * run.test_accuracy, 100.0 * run.best_val_accuracy, run.best_epoch);
    out += buf;
  }
  if (!r.diverged.empty()) out += "  WARNING: diverged splits excluded from the mean\n";
  return out;
}

/// The random-search domain for each tunable field.
struct SearchSpace {
  std::vector<double> lr{0.001, 0.005, 0.01, 0.05};
  std::vector<double> weight_decay{0.0, 1e-7, 5e-7, 1e-6, 5e-6, 5e-5, 5e-4};
  std::vector<std::size_t> patience{200, 400};
  double dropout_lo = 0.0, dropout_hi = 0.9;
  std::vector<double> lambda{0.0, 0.01, 0.1, 1.0, 10.0};
  std::vector<std::size_t> layers{1, 2, 4, 8};
  std::vector<std::size_t> nhidden{32, 64, 128, 256};

  RunConfig sample(const RunConfig& base, Rng& rng) const {
    RunConfig c = base;
    auto pick = [&rng](const auto& v) { return v[static_cast<std::size_t>(rng.below(v.size()))]; };
    c.lr = pick(lr);
    c.weight_decay = pick(weight_decay);
    c.patience = pick(patience);
    c.dropout = rng.uniform(dropout_lo, dropout_hi);
    c.lambda = pick(lambda);
    c.layers = pick(layers);
    c.nhidden = pick(nhidden);
    c.relu_variant = rng.below(2) == 1;
    c.structure_info = rng.below(2) == 1;
    return c;
  }

  bool contains(const RunConfig& c) const {
    auto in = [](const auto& v, auto x) { return std::find(v.begin(), v.end(), x) != v.end(); };
    return in(lr, c.lr) && in(weight_decay, c.weight_decay) && in(patience, c.patience) && c.dropout >= dropout_lo &&
           c.dropout <= dropout_hi && in(lambda, c.lambda) && in(layers, c.layers) && in(nhidden, c.nhidden);
  }
};

struct Trial {
  std::size_t index = 0;
  RunConfig config;
  double mean_valid = 0.0;
  double mean_test = 0.0;
  std::vector<std::size_t> diverged;
  std::string error;
};

inline void to_json(nlohmann::json& j, const Trial& t) {
  j = {{"trial", t.index},
       {"strategy", "random"},
       {"config", t.config},
       {"mean_valid", t.mean_valid},
       {"mean_test", t.mean_test},
       {"diverged_splits", t.diverged}};
  if (!t.error.empty()) j["error"] = t.error;
}

struct SearchResult {
  std::vector<Trial> trials;  // in sampling order
  std::size_t best = 0;
};

/// Seeded random search; trials are scored by mean validation accuracy.
/// Trials whose model cannot be built for the sampled values are kept with an
/// error and a score of zero.
inline SearchResult run_search(const RunConfig& base, const Graph& g, const std::vector<Split>& splits,
                               std::size_t budget, const SearchSpace& space = {}, std::size_t threads = 1) {
  if (budget == 0) throw ConfigError("search budget must be >= 1");
  Rng rng(base.seed, 0x5ea7c4);
  SearchResult res;
  for (std::size_t t = 0; t < budget; ++t) res.trials.push_back(Trial{t, space.sample(base, rng), 0.0, 0.0, {}, {}});
  parallel_for(budget, threads, [&](std::size_t t) {
    Trial& trial = res.trials[t];
    try {
      const BenchReport rep = run_bench(trial.config, g, splits, 1);
      trial.mean_valid = rep.valid.mean;
      trial.mean_test = rep.test.mean;
      trial.diverged = rep.diverged;
    } catch (const NumericalError& e) {
      trial.error = e.what();
    }
  });
  for (std::size_t t = 1; t < budget; ++t)
    if (res.trials[t].mean_valid > res.trials[res.best].mean_valid) res.best = t;
  return res;
}

struct TimingReport {
  std::size_t epochs = 0;
  std::size_t refresh_epochs = 0;
  double mean_ms = 0.0;          // epochs without a state refresh
  double refresh_mean_ms = 0.0;  // epochs with one
};

inline TimingReport timing_from_run(const RunResult& r) {
  TimingReport t;
  std::vector<double> plain, refresh;
  for (std::size_t e = 0; e < r.epoch_ms.size(); ++e) (r.refreshed[e] ? refresh : plain).push_back(r.epoch_ms[e]);
  t.epochs = r.epoch_ms.size();
  t.refresh_epochs = refresh.size();
  t.mean_ms = mean_std(plain).mean;
  t.refresh_mean_ms = mean_std(refresh).mean;
  return t;
}

inline void to_json(nlohmann::json& j, const TimingReport& t) {
  j = {{"epochs", t.epochs},
       {"refresh_epochs", t.refresh_epochs},
       {"mean_ms_per_epoch", t.mean_ms},
       {"refresh_mean_ms", t.refresh_mean_ms}};
}

/// Runs a fixed number of epochs at hidden width d and 2d and returns the
/// ratio of mean ms/epoch (refresh epochs excluded).
inline double hidden_scaling_ratio(RunConfig c, const Graph& g, const std::vector<Split>& splits, std::size_t epochs) {
  c.max_epochs = epochs;
  c.patience = std::numeric_limits<std::size_t>::max();
  const std::size_t id = c.splits.front();
  const double t1 = timing_from_run(run_split(c, g, splits, id)).mean_ms;
  c.nhidden *= 2;
  const double t2 = timing_from_run(run_split(c, g, splits, id)).mean_ms;
  if (!(t1 > 0.0)) throw NumericalError("timing: zero baseline epoch time");
  return t2 / t1;
}

}  // namespace hetgnn::bench
