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

// Property battery for the walk engine and model: unitarity, conservation,
// oracle agreement, permutation symmetry, feature sensitivity, gradients.
// Each check reports its measured worst case against a fixed tolerance.

#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "gqw/finite_diff.hpp"
#include "gqw/model.hpp"
#include "gqw/oracle.hpp"
#include "gqw/qwalk.hpp"
#include "gqw/random_graphs.hpp"
#include "gqw/synthetic.hpp"

namespace gqw {

struct PropertyResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;
  double tolerance = 0.0;
  double seconds = 0.0;
  std::string detail;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline PropertyResult finish(std::string name, double worst, double tol, const Stopwatch& sw,
                             std::string detail = {}) {
  return PropertyResult{std::move(name), worst <= tol, worst, tol, sw.seconds(), std::move(detail)};
}

inline CoinParams random_coin_params(std::mt19937_64& rng, int feature_dim, int coin_dim) {
  return CoinParams{uniform_mat(feature_dim, coin_dim, 1.0, rng),
                    uniform_mat(2 * coin_dim, 1, 1.0, rng)};
}

inline RandomGraphSpec small_walk_spec() {
  RandomGraphSpec s;
  s.min_nodes = 1;
  s.max_nodes = 6;
  s.max_degree = 4;
  s.edge_prob = 0.55;
  return s;
}

}  // namespace detail

/// run_walk vs the dense oracle on random graphs with n <= 6, d <= 4, T <= 4.
inline PropertyResult check_oracle_equivalence(int trials, std::uint64_t seed, double tol = 1e-10) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> steps(0, 4);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const AttributedGraph g = random_graph(rng, detail::small_walk_spec());
    const CoinParams cp = detail::random_coin_params(rng, g.feature_dim(), 4);
    const int T = steps(rng);
    const CoinBank bank = generate_coin_vectors(g, g.node_features, cp);
    const EncodingSequence fast = run_walk(WalkLayout::of(g), bank, T);
    const EncodingSequence dense = oracle_evolve(g, bank, T);
    for (int t = 0; t <= T; ++t) {
      worst = std::max(worst, max_abs_diff(fast.matrices[static_cast<std::size_t>(t)],
                                           dense.matrices[static_cast<std::size_t>(t)]));
    }
  }
  return detail::finish("oracle_equivalence", worst, tol, sw, std::to_string(trials) + " graphs");
}

/// ||U U^T - I||_max over every generated coin and every dense step operator.
inline PropertyResult check_coin_unitarity(int trials, std::uint64_t seed, double tol = 1e-10) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const AttributedGraph g = random_graph(rng, detail::small_walk_spec());
    const CoinBank bank =
        generate_coin_vectors(g, g.node_features, detail::random_coin_params(rng, g.feature_dim(), 4));
    for (int v = 0; v < g.node_count; ++v) {
      const Mat u = build_coin_operator(bank.vectors.row(v), g.degree(v));
      worst = std::max(worst, max_abs_diff(u * u.transpose(), Mat::Identity(u.rows(), u.cols())));
    }
    const Mat step = oracle_step_operator(g, bank);
    worst = std::max(worst, max_abs_diff(step * step.transpose(), Mat::Identity(step.rows(), step.cols())));
  }
  return detail::finish("coin_unitarity", worst, tol, sw);
}

/// Per-walker squared norm after every coin and every shift.
inline PropertyResult check_norm_conservation(int trials, std::uint64_t seed, double tol = 1e-10) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  auto norm_dev = [](const WalkState& s) {
    double w = 0.0;
    for (Index r = 0; r < s.amplitudes.rows(); ++r) {
      w = std::max(w, std::abs(s.amplitudes.row(r).squaredNorm() - 1.0));
    }
    return w;
  };
  for (int i = 0; i < trials; ++i) {
    const AttributedGraph g = random_graph(rng, detail::small_walk_spec());
    const WalkLayout layout = WalkLayout::of(g);
    const CoinBank bank =
        generate_coin_vectors(g, g.node_features, detail::random_coin_params(rng, g.feature_dim(), 4));
    WalkState s = init_walk_state(layout);
    worst = std::max(worst, norm_dev(s));
    for (int t = 0; t < 8; ++t) {
      s = apply_coin(s, bank);
      worst = std::max(worst, norm_dev(s));
      s = apply_shift(s, layout);
      worst = std::max(worst, norm_dev(s));
    }
  }
  return detail::finish("norm_conservation", worst, tol, sw, std::to_string(trials) + " graphs x 8 steps");
}

inline PropertyResult check_row_stochastic(int trials, std::uint64_t seed, double tol = 1e-9) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const AttributedGraph g = random_graph(rng, detail::small_walk_spec());
    const EncodingSequence seq =
        run_walk(g, g.node_features, detail::random_coin_params(rng, g.feature_dim(), 4), 8);
    worst = std::max(worst, max_row_sum_deviation(seq));
    for (const Mat& m : seq.matrices) {
      if (m.size() && (m.minCoeff() < 0.0 || m.maxCoeff() > 1.0 + tol)) worst = std::max(worst, 1.0);
    }
  }
  return detail::finish("row_stochastic", worst, tol, sw);
}

/// shift(shift(s)) == s bitwise on random (not necessarily normalized) states.
inline PropertyResult check_shift_involution(int trials, std::uint64_t seed) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  for (int i = 0; i < trials; ++i) {
    const AttributedGraph g = random_graph(rng, detail::small_walk_spec());
    const WalkLayout layout = WalkLayout::of(g);
    WalkState s;
    s.n = layout.n;
    s.d = layout.d;
    s.amplitudes = uniform_mat(layout.n, layout.width(), 1.0, rng);
    const WalkState twice = apply_shift(apply_shift(s, layout), layout);
    worst = std::max(worst, (twice.amplitudes.array() != s.amplitudes.array()).cast<double>().sum());
  }
  return detail::finish("shift_involution", worst, 0.0, sw, "count of differing entries");
}

/// M^t of a relabeled graph equals P M^t P^T.
inline PropertyResult check_walk_equivariance(int graphs, int perms, std::uint64_t seed,
                                              double tol = 1e-10) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  double worst = 0.0;
  RandomGraphSpec spec;
  spec.min_nodes = 3;
  spec.max_nodes = 9;
  spec.max_degree = 5;
  for (int i = 0; i < graphs; ++i) {
    const AttributedGraph g = random_graph(rng, spec);
    const CoinParams cp = detail::random_coin_params(rng, g.feature_dim(), 4);
    const EncodingSequence ref = run_walk(g, g.node_features, cp, 5);
    for (int k = 0; k < perms; ++k) {
      const std::vector<int> perm = random_permutation(rng, g.node_count);
      const AttributedGraph pg = permute_graph(g, perm);
      const EncodingSequence got = run_walk(pg, pg.node_features, cp, 5);
      for (std::size_t t = 0; t < ref.matrices.size(); ++t) {
        worst = std::max(worst, max_abs_diff(got.matrices[t], permute_square(ref.matrices[t], perm)));
      }
    }
  }
  return detail::finish("walk_equivariance", worst, tol, sw);
}

/// Small model configuration used by the model-level checks.
inline ModelConfig check_model_config(int feature_dim, int num_classes, int blocks, int T) {
  ModelConfig m;
  m.feature_dim = feature_dim;
  m.num_classes = num_classes;
  m.model_dim = 8;
  m.recur_dim = 6;
  m.coin_dim = 4;
  m.num_blocks = blocks;
  m.walk_length = T;
  m.dropout = 0.0;
  return m;
}

/// Graph logits are unchanged by node relabeling.
inline PropertyResult check_logit_invariance(int graphs, int perms, std::uint64_t seed,
                                             double tol = 1e-8) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  const ModelConfig cfg = check_model_config(3, 3, 2, 3);
  ParameterStore params = make_parameters(cfg);
  params.init_uniform(rng);
  RandomGraphSpec spec;
  spec.min_nodes = 2;
  spec.max_nodes = 9;
  spec.max_degree = 5;
  double worst = 0.0;
  for (int i = 0; i < graphs; ++i) {
    const AttributedGraph g = random_graph(rng, spec);
    const Mat ref = predict_logits(params, cfg, prepare_graph(g, cfg.degree_cap));
    for (int k = 0; k < perms; ++k) {
      const AttributedGraph pg = permute_graph(g, random_permutation(rng, g.node_count));
      worst = std::max(worst, max_abs_diff(predict_logits(params, cfg, prepare_graph(pg, cfg.degree_cap)), ref));
    }
  }
  return detail::finish("logit_invariance", worst, tol, sw);
}

struct FeatureSensitivity {
  /// Largest elementwise difference between any class-0 / class-1 pair under
  /// vanilla coins (expected exactly 0).
  double vanilla_max_diff = 0.0;
  /// Smallest (over pairs) of the largest elementwise difference under
  /// attribute-aware coins.
  double aware_min_diff = 0.0;
};

/// Compares walk encodings across classes of the synthetic dataset.
inline FeatureSensitivity measure_feature_sensitivity(const GraphCollection& synthetic, int T,
                                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const CoinParams cp = detail::random_coin_params(rng, synthetic.feature_dim, 4);
  std::vector<EncodingSequence> vanilla, aware;
  std::vector<int> labels;
  for (const auto& g : synthetic.graphs) {
    const WalkLayout layout = WalkLayout::of(g);
    vanilla.push_back(run_walk(layout, vanilla_coins(layout), T));
    aware.push_back(run_walk(g, g.node_features, cp, T));
    labels.push_back(g.label);
  }
  auto seq_diff = [](const EncodingSequence& a, const EncodingSequence& b) {
    double d = 0.0;
    for (std::size_t t = 0; t < a.matrices.size(); ++t) d = std::max(d, max_abs_diff(a.matrices[t], b.matrices[t]));
    return d;
  };
  FeatureSensitivity out;
  out.aware_min_diff = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[i] != 0 || labels[j] != 1) continue;
      out.vanilla_max_diff = std::max(out.vanilla_max_diff, seq_diff(vanilla[i], vanilla[j]));
      out.aware_min_diff = std::min(out.aware_min_diff, seq_diff(aware[i], aware[j]));
    }
  }
  return out;
}

/// softmax(QK^T + 0) through the bias path vs the separate bias-free path.
inline PropertyResult check_bias_free_reduction(int trials, std::uint64_t seed, double tol = 1e-12) {
  detail::Stopwatch sw;
  std::mt19937_64 rng(seed);
  const ModelConfig cfg = check_model_config(3, 2, 1, 2);
  double worst = 0.0;
  std::uniform_int_distribution<int> rows(2, 12);
  for (int i = 0; i < trials; ++i) {
    ParameterStore params = make_parameters(cfg);
    params.init_uniform(rng);
    ad::Tape tape;
    ParamBinding binding(tape, params);
    ForwardContext ctx{binding, cfg};
    const ad::Var h = tape.constant(uniform_mat(rows(rng), cfg.model_dim, 2.0, rng));
    const ad::Var biased = attention_weights(ctx, h, ad::Var{}, block_prefix(0), true);
    const ad::Var plain = plain_attention_weights(ctx, h, block_prefix(0));
    worst = std::max(worst, max_abs_diff(biased.value(), plain.value()));
  }
  return detail::finish("bias_free_reduction", worst, tol, sw);
}

/// End-to-end loss gradient vs central differences for one tensor per
/// parameter group, on a random connected 5-node graph (K=2, T=3).
/// Coin parameters of the last block never reach the virtual-node readout, so
/// only block 0 coins are checked.
inline std::vector<PropertyResult> check_gradients(std::uint64_t seed, double tol = 1e-4,
                                                   double step = 1e-5) {
  std::mt19937_64 rng(seed);
  RandomGraphSpec spec;
  spec.min_nodes = 5;
  spec.max_nodes = 5;
  spec.max_degree = 4;
  spec.edge_prob = 0.4;
  spec.connected = true;
  AttributedGraph g = random_graph(rng, spec);
  g.label = 1;
  const ModelConfig cfg = check_model_config(g.feature_dim(), 3, 2, 3);
  ParameterStore params = make_parameters(cfg);
  params.init_uniform(rng);
  const PreparedGraph pg = prepare_graph(g, cfg.degree_cap);

  std::vector<std::string> names = representative_parameters(0);
  names.push_back(block_prefix(1) + "attn.Wv");
  names.push_back(block_prefix(1) + "gru_fwd.Wz");
  names.push_back(block_prefix(0) + "recu.proj.weight");
  names.push_back("classifier.bias");
  names.push_back("virtual.embedding");
  names.push_back(block_prefix(0) + "attn.virtual_bias");

  std::vector<PropertyResult> out;
  for (const std::string& name : names) {
    detail::Stopwatch sw;
    const ScalarFn fn = [&](ad::Tape& tape, const ad::Var& leaf) {
      ParamBinding binding(tape, params);
      binding.substitute(name, leaf);
      ForwardContext ctx{binding, cfg};
      return ad::cross_entropy(forward(ctx, pg.graph, pg.layout), pg.graph.base.label);
    };
    FiniteDiffOptions opts;
    opts.step = step;
    opts.seed = seed + out.size();
    const double err = finite_diff_check(fn, params[name].value, opts);
    out.push_back(detail::finish("gradient[" + name + "]", err, tol, sw));
  }
  return out;
}

/// The full battery with the default instance counts.
inline std::vector<PropertyResult> run_all_checks(std::uint64_t seed) {
  std::vector<PropertyResult> r;
  r.push_back(check_coin_unitarity(100, seed));
  r.push_back(check_norm_conservation(100, seed + 1));
  r.push_back(check_row_stochastic(100, seed + 2));
  r.push_back(check_shift_involution(100, seed + 3));
  r.push_back(check_oracle_equivalence(200, seed + 4));
  r.push_back(check_walk_equivariance(20, 5, seed + 5));
  r.push_back(check_logit_invariance(20, 5, seed + 6));
  {
    detail::Stopwatch sw;
    const FeatureSensitivity fs =
        measure_feature_sensitivity(make_synthetic_feature_dataset(10, 6, seed + 7), 4, seed + 7);
    r.push_back(detail::finish("vanilla_encodings_identical", fs.vanilla_max_diff, 0.0, sw));
    PropertyResult aware{"aware_encodings_differ", fs.aware_min_diff > 1e-6, fs.aware_min_diff, 1e-6,
                         sw.seconds(), "min pairwise max-diff must exceed tolerance"};
    r.push_back(aware);
  }
  r.push_back(check_bias_free_reduction(50, seed + 8));
  for (auto& g : check_gradients(seed + 9)) r.push_back(std::move(g));
  return r;
}

}  // namespace gqw
