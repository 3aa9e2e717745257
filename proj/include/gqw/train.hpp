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

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "gqw/folds.hpp"
#include "gqw/model.hpp"
#include "gqw/optim.hpp"

namespace gqw {

struct TrainConfig {
  double base_lr = 1e-4;
  double end_lr = 1e-9;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double dropout = 0.1;
  int epochs = 100;
  int batch_size = 32;
  int walk_length = 4;
  int num_blocks = 4;
  int model_dim = 32;
  int recur_dim = 32;
  int coin_dim = 16;
  int degree_cap = kDefaultDegreeCap;
  int folds = 10;
  int threads = 1;
  std::uint64_t seed = 0;
  CoinMode encoder_mode = CoinMode::kAttributeAware;
  bool use_attention = true;
  bool use_recurrence = true;

  void validate() const {
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
    if (end_lr > base_lr) throw std::invalid_argument("end_lr must be <= base_lr");
    if (walk_length < 1) throw std::invalid_argument("walk_length must be >= 1");
    if (num_blocks < 1) throw std::invalid_argument("num_blocks must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (folds < 2) throw std::invalid_argument("folds must be >= 2");
    if (threads < 1) throw std::invalid_argument("threads must be >= 1");
    if (clip_norm <= 0.0) throw std::invalid_argument("clip_norm must be > 0");
  }

  ModelConfig model_config(int feature_dim, int num_classes) const {
    ModelConfig m;
    m.feature_dim = feature_dim;
    m.num_classes = num_classes;
    m.model_dim = model_dim;
    m.recur_dim = recur_dim;
    m.coin_dim = coin_dim;
    m.num_blocks = num_blocks;
    m.walk_length = walk_length;
    m.degree_cap = degree_cap;
    m.dropout = dropout;
    m.coin_mode = encoder_mode;
    m.use_attention = use_attention;
    m.use_recurrence = use_recurrence;
    return m;
  }

  nlohmann::json to_json() const {
    return {{"base_lr", base_lr},         {"end_lr", end_lr},
            {"weight_decay", weight_decay}, {"clip_norm", clip_norm},
            {"dropout", dropout},         {"epochs", epochs},
            {"batch_size", batch_size},   {"walk_length", walk_length},
            {"num_blocks", num_blocks},   {"model_dim", model_dim},
            {"recur_dim", recur_dim},     {"coin_dim", coin_dim},
            {"degree_cap", degree_cap},   {"folds", folds},
            {"threads", threads},         {"seed", seed},
            {"encoder_mode", to_string(encoder_mode)},
            {"use_attention", use_attention}, {"use_recurrence", use_recurrence}};
  }
};

struct FoldResult {
  int fold_id = 0;
  double test_accuracy = 0.0;
  int correct = 0;
  int total = 0;
  std::vector<double> train_losses;
  double wall_time = 0.0;
  /// Graph ids that contributed to any parameter update.
  std::vector<int> trained_on;
  /// Largest global gradient norm observed after clipping.
  double max_clipped_norm = 0.0;
};

/// SplitMix64 finalizer, used to derive independent seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::vector<PreparedGraph> prepare_collection(const GraphCollection& c, int degree_cap) {
  std::vector<PreparedGraph> out;
  out.reserve(c.graphs.size());
  for (const auto& g : c.graphs) out.push_back(prepare_graph(g, degree_cap));
  return out;
}

struct GraphLoss {
  double loss = 0.0;
  GradSet grads;
};

/// Loss and parameter gradients for one graph in train mode.
inline GraphLoss graph_loss_and_grads(const ParameterStore& params, const ModelConfig& cfg,
                                      const PreparedGraph& g, std::uint64_t dropout_seed) {
  ad::Tape tape;
  ParamBinding binding(tape, params);
  std::mt19937_64 rng(dropout_seed);
  ForwardContext ctx{binding, cfg, true, &rng};
  const ad::Var logits = forward(ctx, g.graph, g.layout);
  const ad::Var loss = ad::cross_entropy(logits, g.graph.base.label);
  tape.backward(loss);
  return GraphLoss{loss.value()(0, 0), binding.gradients()};
}

inline int predict_class(const ParameterStore& params, const ModelConfig& cfg,
                         const PreparedGraph& g) {
  const Mat logits = predict_logits(params, cfg, g);
  Index best = 0;
  logits.row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers.
inline void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), count);
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Trains a fresh model on train_ids and evaluates on test_ids. Batches are
/// gradient accumulation over graphs; per-graph gradients are summed in batch
/// order, so results do not depend on the thread count. If `trained` is given
/// it receives the final parameters.
inline FoldResult train_fold(const std::vector<PreparedGraph>& graphs, const ModelConfig& mcfg,
                             std::span<const int> train_ids, std::span<const int> test_ids,
                             const TrainConfig& cfg, int fold_id = 0,
                             ParameterStore* trained = nullptr) {
  cfg.validate();
  {
    std::set<int> train_set(train_ids.begin(), train_ids.end());
    for (int id : test_ids) {
      if (train_set.count(id)) {
        throw std::invalid_argument("train_fold: graph " + std::to_string(id) +
                                    " is in both train and test sets");
      }
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::uint64_t fold_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(fold_id));

  ParameterStore params = make_parameters(mcfg);
  std::mt19937_64 init_rng(fold_seed);
  params.init_uniform(init_rng);
  AdamW opt(params, AdamWOptions{0.9, 0.999, 1e-8, cfg.weight_decay});

  FoldResult result;
  result.fold_id = fold_id;
  std::vector<int> order(train_ids.begin(), train_ids.end());
  const long batches = (static_cast<long>(order.size()) + cfg.batch_size - 1) / cfg.batch_size;
  const long total_steps = batches * cfg.epochs;
  long step = 0;
  std::set<int> trained_on;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(mix_seed(fold_seed, 1000003ULL + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (long b = 0; b < batches; ++b) {
      const std::size_t begin = static_cast<std::size_t>(b * cfg.batch_size);
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t count = end - begin;
      std::vector<GraphLoss> parts(count);
      parallel_for(count, cfg.threads, [&](std::size_t i) {
        const int id = order[begin + i];
        const std::uint64_t ds = mix_seed(mix_seed(fold_seed, static_cast<std::uint64_t>(step)),
                                          static_cast<std::uint64_t>(id));
        parts[i] = graph_loss_and_grads(params, mcfg, graphs.at(static_cast<std::size_t>(id)), ds);
      });
      GradSet grads = params.zero_grads();
      double batch_loss = 0.0;
      for (std::size_t i = 0; i < count; ++i) {
        batch_loss += parts[i].loss;
        for (std::size_t p = 0; p < grads.size(); ++p) grads[p] += parts[i].grads[p];
        trained_on.insert(order[begin + i]);
      }
      if (!std::isfinite(batch_loss)) {
        throw NumericError("train_fold: loss diverged at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(b));
      }
      const double inv = 1.0 / static_cast<double>(count);
      for (Mat& g : grads) g *= inv;
      clip_global_norm(grads, cfg.clip_norm);
      result.max_clipped_norm = std::max(result.max_clipped_norm, global_norm(grads));
      opt.step(params, grads, linear_lr(step, total_steps, cfg.base_lr, cfg.end_lr));
      ++step;
      epoch_loss += batch_loss;
    }
    result.train_losses.push_back(epoch_loss / static_cast<double>(order.size()));
  }

  std::vector<int> predictions(test_ids.size());
  parallel_for(test_ids.size(), cfg.threads, [&](std::size_t i) {
    predictions[i] = predict_class(params, mcfg, graphs.at(static_cast<std::size_t>(test_ids[i])));
  });
  for (std::size_t i = 0; i < test_ids.size(); ++i) {
    if (predictions[i] == graphs[static_cast<std::size_t>(test_ids[i])].graph.base.label) ++result.correct;
  }
  result.total = static_cast<int>(test_ids.size());
  result.test_accuracy =
      result.total > 0 ? static_cast<double>(result.correct) / static_cast<double>(result.total) : 0.0;
  result.trained_on.assign(trained_on.begin(), trained_on.end());
  result.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (trained) *trained = std::move(params);
  return result;
}

struct CrossValidationReport {
  std::string dataset;
  TrainConfig config;
  std::vector<FoldResult> folds;
  double mean = 0.0;
  double std = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json folds_json = nlohmann::json::array();
    for (const auto& f : folds) {
      folds_json.push_back({{"fold", f.fold_id},
                            {"accuracy", f.test_accuracy},
                            {"correct", f.correct},
                            {"total", f.total},
                            {"wall_time", f.wall_time}});
    }
    return {{"dataset", dataset},
            {"config", config.to_json()},
            {"folds", folds_json},
            {"mean", mean},
            {"std", std}};
  }

  /// One row per (fold, epoch).
  void write_loss_csv(std::ostream& os) const {
    os << "fold,epoch,train_loss\n";
    for (const auto& f : folds) {
      for (std::size_t e = 0; e < f.train_losses.size(); ++e) {
        os << f.fold_id << "," << e << "," << f.train_losses[e] << "\n";
      }
    }
  }
};

/// Mean and population standard deviation.
inline std::pair<double, double> mean_and_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

/// Called after each finished fold (for progress output).
using FoldCallback = std::function<void(const FoldResult&)>;

inline CrossValidationReport cross_validate(const GraphCollection& collection, const TrainConfig& cfg,
                                            const FoldCallback& on_fold = nullptr) {
  cfg.validate();
  const std::vector<PreparedGraph> graphs = prepare_collection(collection, cfg.degree_cap);
  const ModelConfig mcfg = cfg.model_config(collection.feature_dim, collection.num_classes);
  const std::vector<Fold> folds = stratified_kfold(collection, cfg.folds, cfg.seed);

  CrossValidationReport report;
  report.dataset = collection.name;
  report.config = cfg;
  std::vector<double> accs;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    report.folds.push_back(train_fold(graphs, mcfg, folds[f].train_ids, folds[f].test_ids, cfg,
                                      static_cast<int>(f)));
    accs.push_back(report.folds.back().test_accuracy);
    if (on_fold) on_fold(report.folds.back());
  }
  std::tie(report.mean, report.std) = mean_and_std(accs);
  return report;
}

struct AblationRow {
  std::string name;
  bool attention = true;
  bool recurrence = true;
  CoinMode encoder = CoinMode::kAttributeAware;
  double mean = 0.0;
  double std = 0.0;
};

struct AblationReport {
  std::string dataset;
  std::vector<AblationRow> rows;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      rs.push_back({{"name", r.name},
                    {"attention", r.attention},
                    {"recurrence", r.recurrence},
                    {"encoder", to_string(r.encoder)},
                    {"mean", r.mean},
                    {"std", r.std}});
    }
    return {{"dataset", dataset}, {"rows", rs}};
  }
};

/// Four configurations: attention only, recurrence only, full model with
/// vanilla coins, full model with attribute-aware coins.
inline AblationReport run_ablation(const GraphCollection& collection, const TrainConfig& base) {
  const std::vector<AblationRow> plan = {
      {"attn_only", true, false, CoinMode::kAttributeAware},
      {"recu_only", false, true, CoinMode::kAttributeAware},
      {"vanilla_qw", true, true, CoinMode::kVanilla},
      {"ours", true, true, CoinMode::kAttributeAware},
  };
  AblationReport report;
  report.dataset = collection.name;
  for (AblationRow row : plan) {
    TrainConfig cfg = base;
    cfg.use_attention = row.attention;
    cfg.use_recurrence = row.recurrence;
    cfg.encoder_mode = row.encoder;
    const CrossValidationReport cv = cross_validate(collection, cfg);
    row.mean = cv.mean;
    row.std = cv.std;
    report.rows.push_back(row);
  }
  return report;
}

struct SweepRow {
  int walk_length = 0;
  double mean = 0.0;
  double std = 0.0;
  double wall_time = 0.0;
};

/// Cross-validated accuracy for each walk length.
inline std::vector<SweepRow> walk_length_sweep(const GraphCollection& collection,
                                               const TrainConfig& base,
                                               const std::vector<int>& lengths) {
  std::vector<SweepRow> rows;
  for (int T : lengths) {
    TrainConfig cfg = base;
    cfg.walk_length = T;
    const auto t0 = std::chrono::steady_clock::now();
    const CrossValidationReport cv = cross_validate(collection, cfg);
    rows.push_back({T, cv.mean, cv.std,
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  }
  return rows;
}

inline nlohmann::json sweep_to_json(const std::string& dataset, const std::vector<SweepRow>& rows) {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows) {
    rs.push_back({{"walk_length", r.walk_length}, {"mean", r.mean}, {"std", r.std},
                  {"wall_time", r.wall_time}});
  }
  return {{"dataset", dataset}, {"rows", rs}};
}

}  // namespace gqw
