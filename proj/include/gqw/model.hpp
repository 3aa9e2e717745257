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

// Graph transformer whose attention is biased by quantum-walk measurements.
//
// Each block k runs, in order:
//   walk      coins from the current node embeddings, measurements M^0..M^T
//   H_F = H   + 1/2 FFN(H)
//   H_A = H_F + Attn(H_F, bias M^T)
//   H_R = H_A + Recu(H_A, M^0..M^T)
//   H'  = H_R + 1/2 FFN(H_R)
// The graph is read out from a virtual node that attends to every node but is
// not part of the walk.

#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "gqw/autodiff.hpp"
#include "gqw/graph.hpp"
#include "gqw/params.hpp"
#include "gqw/qwalk.hpp"

namespace gqw {

struct ModelConfig {
  int feature_dim = 1;
  int num_classes = 2;
  int model_dim = 32;
  int recur_dim = 32;
  int coin_dim = 16;
  int num_blocks = 4;
  int walk_length = 4;
  int degree_cap = kDefaultDegreeCap;
  double dropout = 0.1;
  CoinMode coin_mode = CoinMode::kAttributeAware;
  bool use_attention = true;
  bool use_recurrence = true;
  /// When false the attention bias is the zero matrix (plain self-attention).
  bool use_walk_bias = true;

  void validate() const {
    if (feature_dim < 1 || num_classes < 1 || model_dim < 1 || recur_dim < 1 || coin_dim < 1) {
      throw std::invalid_argument("ModelConfig: dimensions must be positive");
    }
    if (num_blocks < 1) throw std::invalid_argument("ModelConfig: num_blocks must be >= 1");
    if (walk_length < 1) throw std::invalid_argument("ModelConfig: walk_length must be >= 1");
    if (degree_cap < 1) throw std::invalid_argument("ModelConfig: degree_cap must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("ModelConfig: dropout must be in [0, 1)");
  }
};

inline std::string block_prefix(int k) { return "block" + std::to_string(k) + "."; }

namespace detail {

inline void add_gru_params(ParameterStore& s, const std::string& p, int in, int hidden) {
  for (const char* gate : {"z", "r", "c"}) {
    s.add(p + "W" + gate, in, hidden, in);
    s.add(p + "U" + gate, hidden, hidden, hidden);
    s.add(p + "b" + gate, 1, hidden, hidden);
  }
}

inline void add_ffn_params(ParameterStore& s, const std::string& p, int dim) {
  s.add(p + "W1", dim, 4 * dim, dim);
  s.add(p + "b1", 1, 4 * dim, dim);
  s.add(p + "W2", 4 * dim, dim, 4 * dim);
  s.add(p + "b2", 1, dim, 4 * dim);
}

}  // namespace detail

/// Registers every model parameter (zero-valued; call init_uniform after).
inline ParameterStore make_parameters(const ModelConfig& cfg) {
  cfg.validate();
  const int D = cfg.model_dim;
  const int R = cfg.recur_dim;
  ParameterStore s;
  s.add("input.weight", cfg.feature_dim, D, cfg.feature_dim);
  s.add("degree.embedding", cfg.degree_cap + 1, D, D);
  s.add("virtual.embedding", 1, D, D);
  for (int k = 0; k < cfg.num_blocks; ++k) {
    const std::string p = block_prefix(k);
    s.add(p + "coin.W", D, cfg.coin_dim, D);
    s.add(p + "coin.attention", 2 * cfg.coin_dim, 1, 2 * cfg.coin_dim);
    detail::add_ffn_params(s, p + "ffn1.", D);
    for (const char* m : {"attn.Wq", "attn.Wk", "attn.Wv", "attn.Wo"}) s.add(p + m, D, D, D);
    s.add(p + "attn.virtual_bias", 1, 1, 1);
    detail::add_gru_params(s, p + "gru_fwd.", D, R);
    detail::add_gru_params(s, p + "gru_bwd.", D, R);
    s.add(p + "recu.proj.weight", 4 * R, D, 4 * R);
    s.add(p + "recu.proj.bias", 1, D, 4 * R);
    detail::add_ffn_params(s, p + "ffn2.", D);
  }
  s.add("classifier.weight", D, cfg.num_classes, D);
  s.add("classifier.bias", 1, cfg.num_classes, D);
  return s;
}

/// Parameter groups covered by gradient checks: one representative tensor each.
inline std::vector<std::string> representative_parameters(int block = 0) {
  const std::string p = block_prefix(block);
  return {p + "coin.W",     p + "coin.attention", p + "attn.Wq",        p + "attn.Wk",
          p + "attn.Wv",    p + "gru_fwd.Wz",     p + "gru_bwd.Uc",     p + "ffn1.W1",
          p + "ffn2.W2",    "degree.embedding",   "input.weight",       "classifier.weight"};
}

/// State shared by one forward pass.
struct ForwardContext {
  ParamBinding& params;
  const ModelConfig& cfg;
  bool train = false;
  std::mt19937_64* rng = nullptr;
  /// When set, receives each block's walk measurements.
  std::vector<EncodingSequence>* walk_trace = nullptr;

  ad::Tape& tape() { return params.tape(); }
  ad::Var p(const std::string& name) { return params.get(name); }

  ad::Var dropout(const ad::Var& x) {
    if (!train || cfg.dropout <= 0.0) return x;
    if (!rng) throw std::logic_error("dropout in train mode needs an rng");
    return ad::dropout_mask_apply(x, ad::make_dropout_mask(x.rows(), x.cols(), cfg.dropout, *rng));
  }
};

inline ad::Var linear(ForwardContext& ctx, const ad::Var& x, const std::string& weight,
                      const std::string& bias) {
  return ad::add_row_broadcast(ad::matmul(x, ctx.p(weight)), ctx.p(bias));
}

/// H^0: projected features plus degree embedding for base nodes, then the
/// virtual-node embedding as the last row.
inline ad::Var embed_inputs(ForwardContext& ctx, const AugmentedGraph& g) {
  const AttributedGraph& base = g.base;
  if (base.feature_dim() != ctx.cfg.feature_dim) {
    throw ShapeError("embed_inputs: graph feature dim " + std::to_string(base.feature_dim()) +
                     ", model expects " + std::to_string(ctx.cfg.feature_dim));
  }
  if (static_cast<int>(base.degree_index.size()) != base.node_count) {
    throw std::invalid_argument("embed_inputs: graph is not degree-encoded");
  }
  ad::Tape& t = ctx.tape();
  const ad::Var x = t.constant(base.node_features);
  const ad::Var h = ad::add(ad::matmul(x, ctx.p("input.weight")),
                            ad::embedding_lookup(ctx.p("degree.embedding"), base.degree_index));
  if (!g.has_virtual) return h;
  return ad::concat_rows({h, ctx.p("virtual.embedding")});
}

/// H + 1/2 FFN(H); FFN = Linear(D->4D) -> relu -> dropout -> Linear(4D->D).
inline ad::Var ffn_half(ForwardContext& ctx, const ad::Var& h, const std::string& prefix) {
  ad::Var hidden = ad::relu(linear(ctx, h, prefix + "W1", prefix + "b1"));
  hidden = ctx.dropout(hidden);
  const ad::Var out = linear(ctx, hidden, prefix + "W2", prefix + "b2");
  return ad::add(h, ad::scalar_mul(out, 0.5));
}

/// Attention bias over n base nodes plus the virtual node: walk probabilities
/// between base nodes, the learnable scalar b in every virtual row/column entry.
inline ad::Var virtual_bias_matrix(const ad::Var& walk, const ad::Var& b, bool has_virtual) {
  if (!has_virtual) return walk;
  ad::Tape& t = *walk.tape();
  const Index n = walk.rows();
  Mat out(n + 1, n + 1);
  out.topLeftCorner(n, n) = walk.value();
  const double bv = b.value()(0, 0);
  out.row(n).setConstant(bv);
  out.col(n).setConstant(bv);
  return t.record(std::move(out), {walk, b},
                  [walk, b, n](ad::Tape& tp, const Mat& g) {
                    if (walk.requires_grad()) tp.accumulate(walk, g.topLeftCorner(n, n));
                    if (b.requires_grad()) {
                      Mat gb(1, 1);
                      gb(0, 0) = g.row(n).sum() + g.col(n).head(n).sum();
                      tp.accumulate(b, gb);
                    }
                  },
                  "virtual_bias_matrix");
}

inline void require_row_stochastic(const Mat& m, const char* where) {
  for (Index i = 0; i < m.rows(); ++i) {
    const double s = m.row(i).sum();
    if (std::abs(s - 1.0) > 1e-6) {
      throw NumericError(std::string(where) + ": walk encoding row " + std::to_string(i) +
                         " sums to " + std::to_string(s));
    }
  }
}

/// Attention weights softmax(Q K^T + P). `walk` may be invalid (Var{}) to use a
/// zero bias.
inline ad::Var attention_weights(ForwardContext& ctx, const ad::Var& h, const ad::Var& walk,
                                 const std::string& prefix, bool has_virtual) {
  const ad::Var q = ad::matmul(h, ctx.p(prefix + "attn.Wq"));
  const ad::Var k = ad::matmul(h, ctx.p(prefix + "attn.Wk"));
  const ad::Var scores = ad::matmul(q, ad::transpose(k));
  ad::Var bias;
  if (walk.valid()) {
    require_row_stochastic(walk.value(), "gqw_attn");
    bias = virtual_bias_matrix(walk, ctx.p(prefix + "attn.virtual_bias"), has_virtual);
  } else {
    bias = ctx.tape().constant(Mat::Zero(h.rows(), h.rows()));
  }
  return ad::row_softmax_with_bias(scores, bias);
}

/// Bias-free self-attention weights softmax(Q K^T), computed without the bias
/// path. Used to cross-check the biased form at P = 0.
inline ad::Var plain_attention_weights(ForwardContext& ctx, const ad::Var& h,
                                       const std::string& prefix) {
  const ad::Var q = ad::matmul(h, ctx.p(prefix + "attn.Wq"));
  const ad::Var k = ad::matmul(h, ctx.p(prefix + "attn.Wk"));
  return ad::row_softmax(ad::matmul(q, ad::transpose(k)));
}

/// H + Attn(H) with the walk measurement M^T as attention bias.
inline ad::Var gqw_attn(ForwardContext& ctx, const ad::Var& h, const ad::Var& walk,
                        const std::string& prefix, bool has_virtual) {
  ad::Var w = attention_weights(ctx, h, walk, prefix, has_virtual);
  w = ctx.dropout(w);
  const ad::Var v = ad::matmul(h, ctx.p(prefix + "attn.Wv"));
  const ad::Var out = ad::matmul(ad::matmul(w, v), ctx.p(prefix + "attn.Wo"));
  return ad::add(h, out);
}

/// One GRU step for a batch of rows. With prefix p the cell reads
/// p{W,U,b}{z,r,c}.
inline ad::Var gru_cell(ForwardContext& ctx, const ad::Var& x, const ad::Var& h,
                        const std::string& p) {
  auto gate_in = [&](const char* g) {
    const std::string s(g);
    return ad::add_row_broadcast(ad::matmul(x, ctx.p(p + "W" + s)), ctx.p(p + "b" + s));
  };
  const ad::Var z = ad::sigmoid(ad::add(gate_in("z"), ad::matmul(h, ctx.p(p + "Uz"))));
  const ad::Var r = ad::sigmoid(ad::add(gate_in("r"), ad::matmul(h, ctx.p(p + "Ur"))));
  const ad::Var c = ad::tanh(ad::add(gate_in("c"), ad::matmul(ad::hadamard(r, h), ctx.p(p + "Uc"))));
  // (1 - z) h + z c
  return ad::add(h, ad::hadamard(z, ad::sub(c, h)));
}

/// H + Recu(H, M^0..M^T). Node i's input sequence is x_i^t = sum_j M^t[i,j] H[j]
/// over base nodes; a bidirectional GRU runs over t, o_0 is concatenated with the
/// mean of o_1..o_T and projected back to the model width. The virtual row is
/// passed through unchanged.
inline ad::Var gqw_recu(ForwardContext& ctx, const ad::Var& h, std::span<const ad::Var> walk,
                        const std::string& prefix, bool has_virtual) {
  if (walk.size() < 2) throw std::invalid_argument("gqw_recu: walk length T must be >= 1");
  ad::Tape& t = ctx.tape();
  const Index n = walk[0].rows();
  const ad::Var base = has_virtual ? ad::slice_rows(h, 0, n) : h;
  const std::size_t steps = walk.size();

  std::vector<ad::Var> inputs;
  inputs.reserve(steps);
  for (const ad::Var& m : walk) inputs.push_back(ad::matmul(m, base));

  const ad::Var h0 = t.constant(Mat::Zero(n, ctx.cfg.recur_dim));
  std::vector<ad::Var> fwd(steps), bwd(steps);
  ad::Var state = h0;
  for (std::size_t s = 0; s < steps; ++s) {
    state = gru_cell(ctx, inputs[s], state, prefix + "gru_fwd.");
    fwd[s] = state;
  }
  state = h0;
  for (std::size_t s = steps; s-- > 0;) {
    state = gru_cell(ctx, inputs[s], state, prefix + "gru_bwd.");
    bwd[s] = state;
  }
  std::vector<ad::Var> outs;
  outs.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) outs.push_back(ad::concat_cols({fwd[s], bwd[s]}));

  const ad::Var pooled = ad::mean_over_list(std::span<const ad::Var>(outs).subspan(1));
  const ad::Var merged = ad::concat_cols({outs[0], pooled});
  ad::Var update = linear(ctx, merged, prefix + "recu.proj.weight", prefix + "recu.proj.bias");
  update = ctx.dropout(update);
  if (has_virtual) {
    update = ad::concat_rows({update, t.constant(Mat::Zero(1, h.cols()))});
  }
  return ad::add(h, update);
}

/// Walk measurements for block k, with coins generated from the base rows of h.
inline std::vector<ad::Var> block_walk(ForwardContext& ctx, const ad::Var& h,
                                       const AugmentedGraph& g, const WalkLayout& layout, int k) {
  ad::Var coins;
  if (ctx.cfg.coin_mode == CoinMode::kVanilla) {
    coins = ctx.tape().constant(vanilla_coins(layout).vectors);
  } else {
    const std::string p = block_prefix(k);
    const ad::Var base = g.has_virtual ? ad::slice_rows(h, 0, g.base.node_count) : h;
    coins = coin_vectors(layout, base, ctx.p(p + "coin.W"), ctx.p(p + "coin.attention"));
  }
  std::vector<ad::Var> walk = walk_encodings(layout, coins, ctx.cfg.walk_length);
  if (ctx.walk_trace) {
    EncodingSequence seq;
    for (const ad::Var& m : walk) seq.matrices.push_back(m.value());
    ctx.walk_trace->push_back(std::move(seq));
  }
  return walk;
}

inline ad::Var gqwformer_block(ForwardContext& ctx, const ad::Var& h, const AugmentedGraph& g,
                               const WalkLayout& layout, int k) {
  const std::string p = block_prefix(k);
  const ModelConfig& cfg = ctx.cfg;
  const bool needs_walk = (cfg.use_attention && cfg.use_walk_bias) || cfg.use_recurrence;
  std::vector<ad::Var> walk;
  if (needs_walk) walk = block_walk(ctx, h, g, layout, k);

  ad::Var x = ffn_half(ctx, h, p + "ffn1.");
  if (cfg.use_attention) {
    const ad::Var bias = cfg.use_walk_bias ? walk.back() : ad::Var{};
    x = gqw_attn(ctx, x, bias, p, g.has_virtual);
  }
  if (cfg.use_recurrence) x = gqw_recu(ctx, x, walk, p, g.has_virtual);
  return ffn_half(ctx, x, p + "ffn2.");
}

/// Class logits (1 x C) read from the virtual node.
inline ad::Var forward(ForwardContext& ctx, const AugmentedGraph& g, const WalkLayout& layout) {
  if (!g.has_virtual) throw std::invalid_argument("forward: graph needs a virtual node");
  ad::Var h = embed_inputs(ctx, g);
  for (int k = 0; k < ctx.cfg.num_blocks; ++k) h = gqwformer_block(ctx, h, g, layout, k);
  const ad::Var readout = ad::slice_rows(h, g.virtual_node_id, 1);
  return linear(ctx, readout, "classifier.weight", "classifier.bias");
}

inline ad::Var forward(ForwardContext& ctx, const AugmentedGraph& g) {
  return forward(ctx, g, WalkLayout::of(g.base));
}

/// A graph prepared for the model: degree-encoded, virtual node added, walk
/// layout precomputed.
struct PreparedGraph {
  AugmentedGraph graph;
  WalkLayout layout;
};

inline PreparedGraph prepare_graph(AttributedGraph g, int degree_cap) {
  degree_encode(g, degree_cap);
  PreparedGraph out;
  out.layout = WalkLayout::of(g);
  out.graph = add_virtual_node(std::move(g));
  return out;
}

/// Inference-mode logits for one graph.
inline Mat predict_logits(const ParameterStore& params, const ModelConfig& cfg,
                          const PreparedGraph& g) {
  ad::Tape tape;
  ParamBinding binding(tape, params);
  ForwardContext ctx{binding, cfg};
  return forward(ctx, g.graph, g.layout).value();
}

}  // namespace gqw
