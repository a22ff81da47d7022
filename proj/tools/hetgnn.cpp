// Command-line front end: dataset tools, synthetic generation, training,
// benchmarking, search and compatibility-matrix reports.

#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hetgnn/bench/heatmap.hpp"
#include "hetgnn/bench/runner.hpp"
#include "hetgnn/bench/stats.hpp"
#include "hetgnn/dataset_io.hpp"
#include "hetgnn/metrics.hpp"
#include "hetgnn/neighborhoods.hpp"
#include "hetgnn/splits.hpp"
#include "hetgnn/synth/generator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hetgnn;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
  std::size_t threads = 1;
  CLI::Option* seed_opt = nullptr;
};

// Run-config flags on a subcommand; only flags given on the command line
// override values from --config.
class RunFlags {
 public:
  void attach(CLI::App* app) {
    add(app, "--model", flags_.model, "preset, cmgnn variant, or JSON model spec path",
        [](auto& c, const auto& f) { c.model = f.model; });
    add(app, "--dataset", flags_.dataset, "dataset directory", [](auto& c, const auto& f) { c.dataset = f.dataset; });
    add(app, "--splits", flags_.splits, "split ids", [](auto& c, const auto& f) { c.splits = f.splits; });
    add(app, "--lr", flags_.lr, "learning rate", [](auto& c, const auto& f) { c.lr = f.lr; });
    add(app, "--weight-decay", flags_.weight_decay, "L2 weight decay",
        [](auto& c, const auto& f) { c.weight_decay = f.weight_decay; });
    add(app, "--patience", flags_.patience, "early-stopping patience", [](auto& c, const auto& f) { c.patience = f.patience; });
    add(app, "--dropout", flags_.dropout, "dropout rate", [](auto& c, const auto& f) { c.dropout = f.dropout; });
    add(app, "--lambda", flags_.lambda, "discrimination loss weight", [](auto& c, const auto& f) { c.lambda = f.lambda; });
    add(app, "--layers", flags_.layers, "message-passing layers", [](auto& c, const auto& f) { c.layers = f.layers; });
    add(app, "--nhidden", flags_.nhidden, "hidden width", [](auto& c, const auto& f) { c.nhidden = f.nhidden; });
    add(app, "--relu-variant", flags_.relu_variant, "apply ReLU before aggregation",
        [](auto& c, const auto& f) { c.relu_variant = f.relu_variant; });
    add(app, "--structure-info", flags_.structure_info, "use adjacency rows as extra features",
        [](auto& c, const auto& f) { c.structure_info = f.structure_info; });
    add(app, "--max-epochs", flags_.max_epochs, "epoch budget", [](auto& c, const auto& f) { c.max_epochs = f.max_epochs; });
  }

  bench::RunConfig resolve(const Globals& g) const {
    bench::RunConfig c;
    if (!g.config.empty()) {
      json j;
      try {
        j = read_json(g.config);
      } catch (const Error& e) {
        throw ConfigError(e.what());
      }
      c = j.get<bench::RunConfig>();
    }
    for (const auto& [opt, apply] : setters_)
      if (opt->count() > 0) apply(c, flags_);
    if (g.seed_opt->count() > 0) c.seed = g.seed;
    bench::validate(c);
    return c;
  }

 private:
  using Setter = std::function<void(bench::RunConfig&, const bench::RunConfig&)>;

  template <typename T>
  void add(CLI::App* app, const std::string& name, T& target, const std::string& help, Setter apply) {
    CLI::Option* opt = app->add_option(name, target, help);
    if constexpr (std::is_same_v<T, std::vector<std::size_t>>) opt->delimiter(',');
    setters_.emplace_back(opt, std::move(apply));
  }

  bench::RunConfig flags_;
  std::vector<std::pair<CLI::Option*, Setter>> setters_;
};

void emit(const Globals& g, const std::string& file, const std::string& contents, bool echo = true) {
  if (!g.out.empty()) {
    write_file_atomic(fs::path(g.out) / file, contents);
    std::cerr << "wrote " << (fs::path(g.out) / file).string() << "\n";
  }
  if (echo || g.out.empty()) std::cout << contents << (contents.ends_with('\n') ? "" : "\n");
}

LoadedDataset load_labeled(const std::string& dir) {
  if (dir.empty()) throw ConfigError("no dataset given (use --dataset or the config's \"dataset\" field)");
  return load_dataset(dir);
}

const std::vector<Split>& require_splits(const LoadedDataset& ds, const std::string& dir) {
  if (ds.splits.empty()) throw RangeError(dir + " has no splits; run `hetgnn dataset split` first");
  return ds.splits;
}

json cm_rows(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

Matrix cm_from_json(const json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) throw ParseError("empty compatibility matrix");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) throw ParseError("ragged compatibility matrix");
    for (std::size_t k = 0; k < m.cols(); ++k) m(i, k) = rows[i][k];
  }
  return m;
}

int cmd_inspect(const Globals& g, const std::string& dir) {
  const LoadedDataset ds = load_dataset(dir);
  const Graph& gr = ds.graph;
  json j{{"name", gr.name()},
         {"n_nodes", gr.n_nodes()},
         {"n_edges", gr.n_edges()},
         {"n_classes", gr.n_classes()},
         {"n_features", gr.n_features()},
         {"directed", gr.directed()},
         {"duplicate_edges_dropped", ds.report.duplicate_edges},
         {"self_loops_dropped", ds.report.self_loops},
         {"n_splits", ds.splits.size()}};
  std::vector<std::size_t> counts(gr.n_classes(), 0);
  std::size_t unlabeled = 0, isolated = 0, dmax = 0, dsum = 0;
  for (std::size_t i = 0; i < gr.n_nodes(); ++i) {
    if (gr.labels()[i] < 0)
      ++unlabeled;
    else
      ++counts[static_cast<std::size_t>(gr.labels()[i])];
    const auto d = gr.degree(i);
    if (d == 0) ++isolated;
    dmax = std::max(dmax, d);
    dsum += d;
  }
  j["class_counts"] = counts;
  j["unlabeled"] = unlabeled;
  j["isolated_nodes"] = isolated;
  j["degree"] = {{"mean", gr.n_nodes() ? static_cast<double>(dsum) / static_cast<double>(gr.n_nodes()) : 0.0},
                 {"max", dmax}};
  if (gr.fully_labeled() && gr.adjacency().nnz() > 0 && gr.n_classes() >= 2) {
    j["edge_homophily"] = edge_homophily(gr);
    j["node_homophily"] = node_homophily(gr);
    const auto cm = observed_cm(gr);
    j["observed_cm"] = cm_rows(cm.m);
    j["cm_fallback_rows"] = cm.fallback_rows;
  }
  emit(g, "inspect.json", j.dump(2));
  return 0;
}

int cmd_split(const Globals& g, const std::string& dir, std::size_t n_splits) {
  const LoadedDataset ds = load_dataset(dir);
  const auto splits = generate_splits(ds.graph, n_splits, g.seed);
  const fs::path target = g.out.empty() ? fs::path(dir) : fs::path(g.out);
  save_splits(target, splits);
  const auto sz = split_sizes(ds.graph.n_nodes());
  std::cout << "wrote " << n_splits << " splits to " << (target / "splits").string() << " (train " << sz.train
            << ", valid " << sz.valid << ", test " << sz.test << ")\n";
  return 0;
}

struct SynthArgs {
  double homophily = 0.5;
  std::string pattern = "hard";
  double degree = 18.0;
  std::size_t nodes = 1000;
  std::size_t classes = 5;
  std::size_t features = 16;
  double separation = 2.0;
  std::string base;
  std::string name;
  std::size_t n_splits = 10;
};

int cmd_synth(const Globals& g, const SynthArgs& a) {
  if (g.out.empty()) throw ConfigError("synth gen needs --out <dir>");
  synth::SynthSpec spec;
  if (!a.base.empty()) {
    LoadedDataset base = load_dataset(a.base);
    base.graph.require_labeled("synthetic base");
    spec.labels = base.graph.labels();
    spec.features = base.graph.features();
    spec.target = synth::build_target_cm(base.graph.n_classes(), a.homophily, synth::pattern_from_string(a.pattern), g.seed);
  } else {
    synth::GaussianBaseOptions bo;
    bo.n_nodes = a.nodes;
    bo.n_classes = a.classes;
    bo.n_features = a.features;
    bo.separation = a.separation;
    synth::Base base = synth::gaussian_base(bo, g.seed);
    spec.labels = std::move(base.labels);
    spec.features = std::move(base.features);
    spec.target = synth::build_target_cm(a.classes, a.homophily, synth::pattern_from_string(a.pattern), g.seed);
  }
  spec.mean_degree = a.degree;
  spec.seed = g.seed;
  spec.name = a.name.empty() ? synth::GridConfig{a.homophily, synth::pattern_from_string(a.pattern), a.degree}.name()
                             : a.name;
  synth::GenerationStats stats;
  const Graph graph = synth::generate_graph(spec, &stats);
  save_dataset(g.out, graph, generate_splits(graph, a.n_splits, g.seed));
  json report{{"name", spec.name},
              {"seed", g.seed},
              {"homophily", a.homophily},
              {"pattern", a.pattern},
              {"mean_degree_target", a.degree},
              {"target_cm", cm_rows(spec.target.m)},
              {"verify", synth::verify(graph, spec.target)},
              {"rejected_draws", stats.rejected_draws},
              {"dropped_stubs", stats.dropped_stubs}};
  emit(g, "synth.json", report.dump(2));
  return 0;
}

int cmd_train(const Globals& g, const RunFlags& flags, std::optional<std::size_t> split) {
  const bench::RunConfig c = flags.resolve(g);
  const LoadedDataset ds = load_labeled(c.dataset);
  const std::size_t id = split.value_or(c.splits.front());
  const RunResult r = bench::run_split(c, ds.graph, require_splits(ds, c.dataset), id);
  emit(g, "run.json", json(r).dump(2), false);
  std::printf("%s on %s split %zu: test %.2f%%  valid %.2f%%  best epoch %zu / %zu\n", r.model.c_str(),
              ds.graph.name().c_str(), id, 100.0 * r.test_accuracy, 100.0 * r.best_val_accuracy, r.best_epoch,
              r.epochs_run);
  if (r.diverged) {
    std::cerr << "training diverged: " << r.error << "\n";
    return static_cast<int>(ExitCode::Numerical);
  }
  return 0;
}

int cmd_bench(const Globals& g, const RunFlags& flags) {
  const bench::RunConfig c = flags.resolve(g);
  const LoadedDataset ds = load_labeled(c.dataset);
  const auto rep = bench::run_bench(c, ds.graph, require_splits(ds, c.dataset), g.threads);
  const std::string table = bench::bench_table(rep, ds.graph.name());
  if (!g.out.empty()) {
    write_file_atomic(fs::path(g.out) / "bench.json", json(rep).dump(2));
    write_file_atomic(fs::path(g.out) / "bench.txt", table);
  }
  std::cout << table;
  if (rep.accuracies.empty()) {
    std::cerr << "every split diverged\n";
    return static_cast<int>(ExitCode::Numerical);
  }
  return 0;
}

std::vector<RunResult> runs_from_file(const std::string& path) {
  const json j = read_json(path);
  std::vector<RunResult> runs;
  if (j.contains("runs")) {
    for (const auto& r : j.at("runs")) runs.push_back(r.get<RunResult>());
  } else {
    runs.push_back(j.get<RunResult>());
  }
  return runs;
}

int cmd_degree_report(const Globals& g, const std::string& runs_path, std::string dataset, std::size_t buckets) {
  auto runs = runs_from_file(runs_path);
  std::erase_if(runs, [](const RunResult& r) { return r.diverged; });
  if (runs.empty()) throw RangeError(runs_path + " holds no completed runs");
  if (dataset.empty()) dataset = runs.front().config.value("dataset", std::string());
  const LoadedDataset ds = load_labeled(dataset);
  const auto st = bench::degree_report(ds.graph, runs, buckets);
  std::string table = "bucket  degrees      size    accuracy\n";
  char buf[128];
  for (std::size_t b = 0; b < buckets; ++b) {
    std::snprintf(buf, sizeof buf, "%-7zu %4zu-%-7zu %6.1f  %8.2f\n", b + 1, st.min_degree[b], st.max_degree[b],
                  st.mean_size[b], 100.0 * st.accuracy[b]);
    table += buf;
  }
  std::snprintf(buf, sizeof buf, "overall                      %8.2f\n", 100.0 * st.overall);
  table += buf;
  if (!g.out.empty()) write_file_atomic(fs::path(g.out) / "degree_report.json", json(st).dump(2));
  std::cout << table;
  return 0;
}

int cmd_search(const Globals& g, const RunFlags& flags, std::size_t budget) {
  const bench::RunConfig base = flags.resolve(g);
  const LoadedDataset ds = load_labeled(base.dataset);
  const auto res = bench::run_search(base, ds.graph, require_splits(ds, base.dataset), budget, {}, g.threads);
  std::string lines;
  for (const auto& t : res.trials) lines += json(t).dump() + "\n";
  const json best = res.trials[res.best];
  if (!g.out.empty()) {
    write_file_atomic(fs::path(g.out) / "leaderboard.jsonl", lines);
    write_file_atomic(fs::path(g.out) / "best.json", best.dump(2));
  } else {
    std::cout << lines;
  }
  std::printf("random search, %zu trials; best trial %zu: valid %.2f%%, test %.2f%%\n", budget, res.best,
              100.0 * res.trials[res.best].mean_valid, 100.0 * res.trials[res.best].mean_test);
  return 0;
}

int cmd_cm(const Globals& g, std::string dataset, const std::string& mode, const std::string& run_path, std::size_t knn_k) {
  std::optional<RunResult> run;
  if (mode == "estimated") {
    if (run_path.empty()) throw ConfigError("estimated mode needs --run <run.json> from a cmgnn training run");
    run = runs_from_file(run_path).front();
    if (!run->model_state.contains("cm"))
      throw RangeError(run_path + " holds no estimated compatibility matrix (not a cmgnn run?)");
    if (dataset.empty()) dataset = run->config.value("dataset", std::string());
  }
  const LoadedDataset ds = load_labeled(dataset);
  ds.graph.require_labeled("cm");
  auto write = [&](const std::string& stem, const Matrix& m, const std::string& title) {
    emit(g, stem + ".csv", bench::cm_csv(m), g.out.empty());
    if (!g.out.empty()) write_file_atomic(fs::path(g.out) / (stem + ".svg"), bench::cm_svg(m, title));
  };
  const std::string name = ds.graph.name();
  if (mode == "observed") {
    write("observed", observed_cm(ds.graph).m, name + ": observed");
  } else if (mode == "knn" || mode == "knn-reneighbored") {
    const CsrMatrix knn = knn_feature_graph(ds.graph, knn_k);
    write("knn", observed_cm(knn, ds.graph.labels(), ds.graph.n_classes()).m,
          name + ": feature kNN (k=" + std::to_string(knn_k) + ")");
  } else if (mode == "estimated") {
    const Matrix est = cm_from_json(run->model_state.at("cm"));
    const Matrix obs = observed_cm(ds.graph).m;
    if (!est.same_shape(obs)) throw ShapeError("estimated CM " + est.shape_str() + " vs observed " + obs.shape_str());
    write("estimated", est, name + ": estimated");
    write("observed", obs, name + ": observed");
    const json cmp{{"max_abs_diff", max_abs_diff(est, obs)}};
    emit(g, "cm_compare.json", cmp.dump(2));
  } else {
    throw ConfigError("unknown cm mode '" + mode + "' (observed, estimated, knn)");
  }
  return 0;
}

int cmd_timing(const Globals& g, const RunFlags& flags, const std::string& run_path, bool scaling, std::size_t epochs) {
  json out;
  if (!run_path.empty()) {
    const auto runs = runs_from_file(run_path);
    json per = json::array();
    for (const auto& r : runs) per.push_back(bench::timing_from_run(r));
    out["runs"] = per;
  }
  if (scaling) {
    const bench::RunConfig c = flags.resolve(g);
    const LoadedDataset ds = load_labeled(c.dataset);
    const double ratio = bench::hidden_scaling_ratio(c, ds.graph, require_splits(ds, c.dataset), epochs);
    out["scaling"] = {{"nhidden", c.nhidden}, {"nhidden_doubled", 2 * c.nhidden}, {"epochs", epochs}, {"ratio", ratio}};
  }
  if (out.empty()) throw ConfigError("timing needs --run <run.json> and/or --scaling");
  emit(g, "timing.json", out.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterophilous GNN toolkit: datasets, synthetic graphs, training and benchmarks"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "global random seed");
  app.add_option("--config", g.config, "run config JSON");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads for runs and trials")->check(CLI::PositiveNumber);

  auto* dataset = app.add_subcommand("dataset", "dataset tools");
  dataset->require_subcommand(1);
  std::string ds_dir;
  std::size_t n_splits = 10;
  auto* inspect = dataset->add_subcommand("inspect", "print dataset statistics");
  inspect->add_option("dir", ds_dir, "dataset directory")->required();
  auto* split = dataset->add_subcommand("split", "generate 48/32/20 splits");
  split->add_option("dir", ds_dir, "dataset directory")->required();
  split->add_option("--n-splits", n_splits, "number of splits");

  auto* synth_cmd = app.add_subcommand("synth", "synthetic graphs");
  synth_cmd->require_subcommand(1);
  SynthArgs sa;
  auto* gen = synth_cmd->add_subcommand("gen", "generate a CM-guided synthetic dataset");
  gen->add_option("--homophily", sa.homophily, "diagonal of the target CM");
  gen->add_option("--pattern", sa.pattern, "easy or hard off-diagonal pattern");
  gen->add_option("--degree", sa.degree, "target mean degree");
  gen->add_option("--nodes", sa.nodes, "node count (Gaussian base)");
  gen->add_option("--classes", sa.classes, "class count (Gaussian base)");
  gen->add_option("--features", sa.features, "feature dimension (Gaussian base)");
  gen->add_option("--separation", sa.separation, "class-mean separation (Gaussian base)");
  gen->add_option("--base", sa.base, "dataset whose labels and features are reused");
  gen->add_option("--name", sa.name, "dataset name");
  gen->add_option("--n-splits", sa.n_splits, "number of splits to write");

  RunFlags train_flags, bench_flags, search_flags, timing_flags;
  auto* train = app.add_subcommand("train", "train one model on one split");
  train_flags.attach(train);
  std::size_t split_id = 0;
  auto* split_opt = train->add_option("--split", split_id, "split id (default: first of --splits)");

  auto* bench_cmd = app.add_subcommand("bench", "train over splits and report mean ± std");
  bench_flags.attach(bench_cmd);

  auto* degree = app.add_subcommand("degree-report", "accuracy by test-node degree bucket");
  std::string runs_path, degree_dataset;
  std::size_t buckets = 5;
  degree->add_option("--runs", runs_path, "bench.json or run.json")->required();
  degree->add_option("--dataset", degree_dataset, "dataset directory (default: from the run config)");
  degree->add_option("--buckets", buckets, "number of buckets")->check(CLI::PositiveNumber);

  auto* search = app.add_subcommand("search", "random hyperparameter search");
  search_flags.attach(search);
  std::size_t budget = 0;
  search->add_option("--budget", budget, "number of trials")->required()->check(CLI::PositiveNumber);

  auto* cm = app.add_subcommand("cm", "compatibility-matrix CSV and SVG heatmap");
  std::string cm_dataset, cm_mode = "observed", cm_run;
  std::size_t knn_k = 10;
  cm->add_option("--dataset", cm_dataset, "dataset directory");
  cm->add_option("--mode", cm_mode, "observed, estimated or knn");
  cm->add_option("--run", cm_run, "cmgnn run.json (estimated mode)");
  cm->add_option("--knn-k", knn_k, "neighbors per node (knn mode)")->check(CLI::PositiveNumber);

  auto* timing = app.add_subcommand("timing", "ms/epoch report and hidden-width scaling check");
  timing_flags.attach(timing);
  std::string timing_run;
  bool scaling = false;
  std::size_t timing_epochs = 20;
  timing->add_option("--run", timing_run, "run.json or bench.json");
  timing->add_flag("--scaling", scaling, "time nhidden and 2*nhidden on the dataset");
  timing->add_option("--epochs", timing_epochs, "epochs per scaling measurement")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::Config);
  }

  try {
    if (!g.out.empty()) fs::create_directories(g.out);
    if (inspect->parsed()) return cmd_inspect(g, ds_dir);
    if (split->parsed()) return cmd_split(g, ds_dir, n_splits);
    if (gen->parsed()) return cmd_synth(g, sa);
    if (train->parsed())
      return cmd_train(g, train_flags, split_opt->count() ? std::optional<std::size_t>(split_id) : std::nullopt);
    if (bench_cmd->parsed()) return cmd_bench(g, bench_flags);
    if (degree->parsed()) return cmd_degree_report(g, runs_path, degree_dataset, buckets);
    if (search->parsed()) return cmd_search(g, search_flags, budget);
    if (cm->parsed()) return cmd_cm(g, cm_dataset, cm_mode, cm_run, knn_k);
    if (timing->parsed()) return cmd_timing(g, timing_flags, timing_run, scaling, timing_epochs);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Data);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::Data);
  }
  return 0;
}
