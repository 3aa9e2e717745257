// Copyright 2026 The GQWformer Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// gqwformer: walk inspection, training, evaluation, property checks, ablations.
// Exit codes: 0 success, 1 internal failure or failed check, 2 usage/input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gqw/checkpoint.hpp"
#include "gqw/config_file.hpp"
#include "gqw/invariants.hpp"
#include "gqw/qwalk.hpp"
#include "gqw/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInput = 2;

/// Bad user input: missing files, malformed data, incompatible checkpoints.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

gqw::GraphCollection read_dataset(const std::string& source) {
  try {
    return gqw::load_dataset(source);
  } catch (const std::exception& e) {
    throw InputError(std::string("dataset: ") + e.what());
  }
}

gqw::RunConfig read_config(const std::string& path) {
  try {
    return path.empty() ? gqw::RunConfig{} : gqw::load_run_config(path);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

json matrices_json(const gqw::EncodingSequence& seq) {
  json ms = json::array();
  for (const gqw::Mat& m : seq.matrices) {
    json rows = json::array();
    for (gqw::Index i = 0; i < m.rows(); ++i) {
      rows.push_back(std::vector<double>(m.row(i).data(), m.row(i).data() + m.cols()));
    }
    ms.push_back(std::move(rows));
  }
  return ms;
}

// ---- walk ----

struct WalkArgs {
  std::string dataset;
  int graph_index = 0;
  int length = 4;
  std::string mode = "ours";
  std::uint64_t seed = 0;
  int coin_dim = 16;
  std::string out;
};

int cmd_walk(const WalkArgs& a) {
  const gqw::GraphCollection c = read_dataset(a.dataset);
  if (a.graph_index < 0 || static_cast<std::size_t>(a.graph_index) >= c.size()) {
    throw InputError("graph index " + std::to_string(a.graph_index) + " out of range [0, " +
                     std::to_string(c.size()) + ")");
  }
  if (a.length < 0) throw InputError("--length must be >= 0");
  if (a.length == 0) std::cerr << "warning: walk length 0 emits only the initial encoding\n";
  const gqw::AttributedGraph& g = c.graphs[static_cast<std::size_t>(a.graph_index)];
  const gqw::WalkLayout layout = gqw::WalkLayout::of(g);

  gqw::EncodingSequence seq;
  if (a.mode == "vanilla") {
    seq = gqw::run_walk(layout, gqw::vanilla_coins(layout), a.length);
  } else {
    std::mt19937_64 rng(a.seed);
    gqw::CoinParams cp{gqw::uniform_mat(g.feature_dim(), a.coin_dim, 1.0, rng),
                       gqw::uniform_mat(2 * a.coin_dim, 1, 1.0, rng)};
    seq = gqw::run_walk(g, g.node_features, cp, a.length);
  }
  const json out = {{"dataset", c.name},
                    {"graph_index", a.graph_index},
                    {"mode", a.mode},
                    {"seed", a.seed},
                    {"T", a.length},
                    {"matrices", matrices_json(seq)}};
  write_text(a.out, out.dump() + "\n");
  std::fprintf(stderr, "max row-sum deviation: %.3e\n", gqw::max_row_sum_deviation(seq));
  return kExitOk;
}

// ---- train / eval ----

struct TrainArgs {
  std::string dataset;
  std::string config;
  std::string out;
  int threads = 0;
  bool no_checkpoint = false;
};

gqw::TrainConfig resolve_config(const std::string& config_path, std::string& dataset, int threads) {
  gqw::RunConfig rc = read_config(config_path);
  if (dataset.empty()) dataset = rc.dataset;
  if (dataset.empty()) throw InputError("no dataset given (--dataset or 'dataset =' in config)");
  if (threads > 0) rc.train.threads = threads;
  return rc.train;
}

int cmd_train(TrainArgs a) {
  const gqw::TrainConfig cfg = resolve_config(a.config, a.dataset, a.threads);
  const gqw::GraphCollection c = read_dataset(a.dataset);
  const fs::path dir(a.out);
  fs::create_directories(dir);

  std::cerr << "training on " << c.name << " (" << c.size() << " graphs, " << cfg.folds << " folds)\n";
  const gqw::CrossValidationReport report = gqw::cross_validate(c, cfg, [](const gqw::FoldResult& f) {
    std::fprintf(stderr, "fold %d: accuracy %.4f (%d/%d) in %.1fs\n", f.fold_id, f.test_accuracy,
                 f.correct, f.total, f.wall_time);
  });
  write_text(dir / "report.json", report.to_json().dump(2) + "\n");
  {
    std::ofstream csv(dir / "losses.csv");
    if (!csv) throw InputError("cannot write " + (dir / "losses.csv").string());
    report.write_loss_csv(csv);
  }
  std::printf("%s: mean accuracy %.4f +- %.4f over %zu folds\n", c.name.c_str(), report.mean,
              report.std, report.folds.size());

  if (!a.no_checkpoint) {
    // Final fit on every graph for the exported checkpoint.
    const gqw::ModelConfig mcfg = cfg.model_config(c.feature_dim, c.num_classes);
    const auto graphs = gqw::prepare_collection(c, cfg.degree_cap);
    std::vector<int> all(c.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    gqw::ParameterStore params;
    gqw::train_fold(graphs, mcfg, all, {}, cfg, cfg.folds, &params);
    gqw::save_checkpoint(dir / "checkpoint.json", mcfg, params);
    std::cerr << "checkpoint written to " << (dir / "checkpoint.json").string() << "\n";
  }
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset, int threads) {
  gqw::Checkpoint ck;
  try {
    ck = gqw::load_checkpoint(checkpoint);
  } catch (const gqw::CheckpointError& e) {
    throw InputError(e.what());
  }
  const gqw::GraphCollection c = read_dataset(dataset);
  try {
    gqw::require_compatible(ck.model, c);
  } catch (const gqw::CheckpointError& e) {
    throw InputError(e.what());
  }
  const auto graphs = gqw::prepare_collection(c, ck.model.degree_cap);
  std::vector<int> pred(graphs.size());
  gqw::parallel_for(graphs.size(), std::max(threads, 1), [&](std::size_t i) {
    pred[i] = gqw::predict_class(ck.params, ck.model, graphs[i]);
  });
  int correct = 0;
  for (std::size_t i = 0; i < graphs.size(); ++i) correct += pred[i] == graphs[i].graph.base.label;
  const double acc = graphs.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(graphs.size());
  const json out = {{"dataset", c.name}, {"accuracy", acc}, {"correct", correct},
                    {"total", graphs.size()}, {"predictions", pred}};
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

// ---- check ----

int cmd_check(std::uint64_t seed) {
  const std::vector<gqw::PropertyResult> results = gqw::run_all_checks(seed);
  bool ok = true;
  for (const auto& r : results) {
    ok = ok && r.passed;
    std::printf("%s %-36s worst=%.3e tol=%.1e (%.2fs)%s%s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.worst, r.tolerance, r.seconds, r.detail.empty() ? "" : "  ", r.detail.c_str());
  }
  std::printf("%s: %zu properties\n", ok ? "ALL PASS" : "SOME FAILED", results.size());
  return ok ? kExitOk : kExitFailure;
}

// ---- ablate / sweep ----

struct StudyArgs {
  std::string dataset;
  std::string config;
  std::string out;
  int threads = 0;
  std::vector<int> lengths = {3, 4, 5, 6, 7, 8};
};

int cmd_ablate(StudyArgs a) {
  const gqw::TrainConfig cfg = resolve_config(a.config, a.dataset, a.threads);
  const gqw::GraphCollection c = read_dataset(a.dataset);
  const gqw::AblationReport report = gqw::run_ablation(c, cfg);
  for (const auto& r : report.rows) {
    std::printf("%-12s attn=%d recu=%d coins=%-15s %.4f +- %.4f\n", r.name.c_str(), r.attention,
                r.recurrence, gqw::to_string(r.encoder), r.mean, r.std);
  }
  const json j = report.to_json();
  if (!a.out.empty()) write_text(a.out, j.dump(2) + "\n");
  return kExitOk;
}

int cmd_sweep(StudyArgs a) {
  const gqw::TrainConfig cfg = resolve_config(a.config, a.dataset, a.threads);
  for (int T : a.lengths) {
    if (T < 1) throw InputError("walk lengths must be >= 1");
  }
  const gqw::GraphCollection c = read_dataset(a.dataset);
  const auto rows = gqw::walk_length_sweep(c, cfg, a.lengths);
  for (const auto& r : rows) std::printf("T=%d %.4f +- %.4f (%.1fs)\n", r.walk_length, r.mean, r.std, r.wall_time);
  if (!a.out.empty()) write_text(a.out, gqw::sweep_to_json(c.name, rows).dump(2) + "\n");
  return kExitOk;
}

// ---- synth ----

int cmd_synth(int graphs, int nodes, std::uint64_t seed, const std::string& out) {
  gqw::GraphCollection c;
  try {
    c = gqw::make_synthetic_feature_dataset(graphs, nodes, seed);
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }
  gqw::write_tudataset(c, out, c.name);
  std::cerr << "wrote " << c.size() << " graphs to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GQWformer: graph quantum walk transformer"};
  app.require_subcommand(1);

  WalkArgs walk;
  auto* w = app.add_subcommand("walk", "Run a quantum walk on one graph and dump its encodings");
  w->add_option("--dataset", walk.dataset, "TUDataset directory or synthetic[:G[:N[:SEED]]]")->required();
  w->add_option("--graph-index", walk.graph_index, "Graph index in the dataset");
  w->add_option("--length", walk.length, "Walk length T");
  w->add_option("--mode", walk.mode, "Coin construction")->check(CLI::IsMember({"vanilla", "ours"}));
  w->add_option("--seed", walk.seed, "Seed for the coin parameters");
  w->add_option("--coin-dim", walk.coin_dim, "Coin projection width")->check(CLI::PositiveNumber);
  w->add_option("--out", walk.out, "Output JSON file")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Cross-validate on a dataset and export a checkpoint");
  t->add_option("--dataset", train.dataset, "TUDataset directory or synthetic[:G[:N[:SEED]]]");
  t->add_option("--config", train.config, "key = value configuration file");
  t->add_option("--out", train.out, "Output directory")->required();
  t->add_option("--threads", train.threads, "Override worker thread count");
  t->add_flag("--no-checkpoint", train.no_checkpoint, "Skip the final full-data fit");

  std::string ck_path, eval_dataset;
  int eval_threads = 1;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  e->add_option("--checkpoint", ck_path, "Checkpoint JSON")->required();
  e->add_option("--dataset", eval_dataset, "TUDataset directory or synthetic[:G[:N[:SEED]]]")->required();
  e->add_option("--threads", eval_threads, "Worker threads");

  std::uint64_t check_seed = 0;
  auto* c = app.add_subcommand("check", "Run the invariant battery");
  c->add_option("--seed", check_seed, "Seed for random instances");

  StudyArgs ablate;
  auto* ab = app.add_subcommand("ablate", "Train the four ablation configurations");
  ab->add_option("--dataset", ablate.dataset, "TUDataset directory or synthetic[:G[:N[:SEED]]]");
  ab->add_option("--config", ablate.config, "key = value configuration file");
  ab->add_option("--out", ablate.out, "Output JSON report");
  ab->add_option("--threads", ablate.threads, "Override worker thread count");

  StudyArgs sweep;
  auto* sw = app.add_subcommand("sweep", "Cross-validate over walk lengths");
  sw->add_option("--dataset", sweep.dataset, "TUDataset directory or synthetic[:G[:N[:SEED]]]");
  sw->add_option("--config", sweep.config, "key = value configuration file");
  sw->add_option("--lengths", sweep.lengths, "Walk lengths")->delimiter(',');
  sw->add_option("--out", sweep.out, "Output JSON report");
  sw->add_option("--threads", sweep.threads, "Override worker thread count");

  int synth_graphs = 40, synth_nodes = 8;
  std::uint64_t synth_seed = 0;
  std::string synth_out;
  auto* sy = app.add_subcommand("synth", "Write the synthetic feature dataset as TUDataset files");
  sy->add_option("--graphs", synth_graphs, "Number of graphs (even)");
  sy->add_option("--nodes", synth_nodes, "Cycle length");
  sy->add_option("--seed", synth_seed, "Seed");
  sy->add_option("--out", synth_out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*w) return cmd_walk(walk);
    if (*t) return cmd_train(train);
    if (*e) return cmd_eval(ck_path, eval_dataset, eval_threads);
    if (*c) return cmd_check(check_seed);
    if (*ab) return cmd_ablate(ablate);
    if (*sw) return cmd_sweep(sweep);
    if (*sy) return cmd_synth(synth_graphs, synth_nodes, synth_seed, synth_out);
  } catch (const InputError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInput;
  } catch (const std::exception& err) {
    std::cerr << "internal error: " << err.what() << "\n";
    return kExitFailure;
  }
  return kExitInput;
}
