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

// Discrete-time coined quantum walks of n independent walkers, one started at
// every node. Amplitudes are real; coins are Householder reflections, so the
// evolution is orthogonal and interference comes from signed amplitudes.
//
// Storage: the n x n x d superposition tensor is held as an n x (n*d) matrix,
// one row per walker, column j*d + c for (position j, coin direction c).
// Direction c of node j is the c-th smallest neighbor of j.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "gqw/autodiff.hpp"
#include "gqw/graph.hpp"

namespace gqw {

enum class CoinMode { kAttributeAware, kVanilla };

inline const char* to_string(CoinMode m) {
  return m == CoinMode::kVanilla ? "vanilla" : "attribute_aware";
}

/// Slope of the leaky-relu in the coin attention score.
inline constexpr double kCoinLeakySlope = 0.2;

/// Graph-derived indexing used by every walk step. Built once per graph.
struct WalkLayout {
  int n = 0;
  /// Coin dimension: the graph's max degree, at least 1 so isolated nodes
  /// have a slot for their frozen amplitude.
  int d = 1;
  std::vector<int> degree;
  /// Column permutation realizing the flip-flop shift (an involution).
  std::vector<int> shift_perm;
  /// neighbor_index[v][j] = j-th neighbor of v (length degree(v)).
  std::vector<std::vector<int>> neighbor_index;
  /// self_index[v][j] = v for j < degree(v).
  std::vector<std::vector<int>> self_index;

  Index width() const { return static_cast<Index>(n) * d; }

  static WalkLayout of(const AttributedGraph& g) {
    WalkLayout l;
    l.n = g.node_count;
    l.d = std::max(g.max_degree, 1);
    l.degree.resize(static_cast<std::size_t>(l.n));
    l.shift_perm.resize(static_cast<std::size_t>(l.n * l.d));
    for (int k = 0; k < l.n * l.d; ++k) l.shift_perm[static_cast<std::size_t>(k)] = k;
    l.neighbor_index = g.neighbors;
    l.self_index.resize(static_cast<std::size_t>(l.n));
    for (int u = 0; u < l.n; ++u) {
      const auto& nb = g.neighbors[static_cast<std::size_t>(u)];
      l.degree[static_cast<std::size_t>(u)] = static_cast<int>(nb.size());
      l.self_index[static_cast<std::size_t>(u)].assign(nb.size(), u);
      for (std::size_t a = 0; a < nb.size(); ++a) {
        const int v = nb[a];
        const int b = g.direction_of(v, u);
        l.shift_perm[static_cast<std::size_t>(u * l.d) + a] = v * l.d + b;
      }
    }
    return l;
  }
};

/// Superposition tensor of all n walkers after `t` steps.
struct WalkState {
  Mat amplitudes;
  int n = 0;
  int d = 1;
  int t = 0;

  double at(int walker, int position, int direction) const {
    return amplitudes(walker, static_cast<Index>(position) * d + direction);
  }
};

/// Per-node coin vectors e_v (n x d, zero beyond each node's degree). The coin
/// of node v is the reflection I - 2 e e^T / (e^T e) on its active block.
struct CoinBank {
  Mat vectors;
  std::vector<int> active;

  int d() const { return static_cast<int>(vectors.cols()); }
};

/// Trainable parameters of the coin generator: W (F' x F_c) and the attention
/// vector (2 F_c x 1). The first F_c attention entries score the neighbor, the
/// last F_c score the node itself.
struct CoinParams {
  Mat W;
  Mat attention;
};

/// Measurements M^0..M^T of one walk.
struct EncodingSequence {
  std::vector<Mat> matrices;

  int walk_length() const { return static_cast<int>(matrices.size()) - 1; }
};

/// Materialized d x d coin: identity outside the leading active_dim block, a
/// Householder reflection inside it (identity if e is numerically zero).
inline Mat build_coin_operator(const Eigen::Ref<const Eigen::RowVectorXd>& e, int active_dim) {
  const Index d = e.size();
  if (active_dim < 0 || active_dim > d) throw ShapeError("build_coin_operator: bad active_dim");
  Mat u = Mat::Identity(d, d);
  const auto head = e.head(active_dim);
  const double s = head.squaredNorm();
  if (s < ad::kDegenerateReflection) return u;
  u.topLeftCorner(active_dim, active_dim) -= (2.0 / s) * head.transpose() * head;
  return u;
}

inline WalkState init_walk_state(const WalkLayout& layout) {
  WalkState s;
  s.n = layout.n;
  s.d = layout.d;
  s.amplitudes = Mat::Zero(layout.n, layout.width());
  for (int w = 0; w < layout.n; ++w) {
    const int deg = layout.degree[static_cast<std::size_t>(w)];
    if (deg == 0) {
      // Isolated node: amplitude parked in a slot the walk never touches.
      s.amplitudes(w, static_cast<Index>(w) * layout.d) = 1.0;
      continue;
    }
    const double amp = 1.0 / std::sqrt(static_cast<double>(deg));
    for (int c = 0; c < deg; ++c) s.amplitudes(w, static_cast<Index>(w) * layout.d + c) = amp;
  }
  return s;
}

inline WalkState init_walk_state(const AttributedGraph& g) { return init_walk_state(WalkLayout::of(g)); }

/// Feature-independent coins: e = (1, ..., 1) on every active block.
inline CoinBank vanilla_coins(const WalkLayout& layout) {
  CoinBank bank;
  bank.vectors = Mat::Zero(layout.n, layout.d);
  bank.active = layout.degree;
  for (int v = 0; v < layout.n; ++v) {
    bank.vectors.row(v).head(layout.degree[static_cast<std::size_t>(v)]).setOnes();
  }
  return bank;
}

// ---------------------------------------------------------------------------
// Differentiable path
// ---------------------------------------------------------------------------

/// e_v[j] = leaky_relu(a_nb . W x_{u_j} + a_self . W x_v) for the j-th neighbor
/// u_j of v; zero for j >= degree(v). Returns an n x d tensor.
inline ad::Var coin_vectors(const WalkLayout& layout, const ad::Var& embeddings, const ad::Var& W,
                            const ad::Var& attention) {
  if (embeddings.rows() != layout.n) {
    throw ShapeError("coin_vectors: embeddings " + shape_str(embeddings.value()) + " for " +
                     std::to_string(layout.n) + " nodes");
  }
  if (!all_finite(embeddings.value())) throw NumericError("coin_vectors: non-finite embeddings");
  const Index fc = W.cols();
  if (attention.rows() != 2 * fc || attention.cols() != 1) {
    throw ShapeError("coin_vectors: attention " + shape_str(attention.value()) + " for W " +
                     shape_str(W.value()));
  }
  const ad::Var z = ad::matmul(embeddings, W);
  const ad::Var s_nb = ad::matmul(z, ad::slice_rows(attention, 0, fc));
  const ad::Var s_self = ad::matmul(z, ad::slice_rows(attention, fc, fc));
  const ad::Var raw = ad::add(ad::gather_entries(s_nb, layout.neighbor_index, layout.d),
                              ad::gather_entries(s_self, layout.self_index, layout.d));
  return ad::leaky_relu(raw, kCoinLeakySlope);
}

/// One coin application: every position block reflected by its node's coin.
inline ad::Var apply_coin(const ad::Var& state, const ad::Var& coins) {
  return ad::rank1_householder_apply(state, coins);
}

inline ad::Var apply_shift(const ad::Var& state, const WalkLayout& layout) {
  return ad::permute_columns(state, layout.shift_perm);
}

/// M[w, j] = sum_c amplitude[w, j, c]^2.
inline ad::Var measure(const ad::Var& state, const WalkLayout& layout) {
  return ad::sum_column_groups(ad::square(state), layout.d);
}

/// Evolves T steps of shift(coin(.)) with fixed coins and returns the
/// measurements M^0..M^T as tape tensors.
inline std::vector<ad::Var> walk_encodings(const WalkLayout& layout, const ad::Var& coins, int T) {
  if (T < 0) throw std::invalid_argument("run_walk: walk length must be >= 0");
  ad::Tape& tape = *coins.tape();
  ad::Var state = tape.constant(init_walk_state(layout).amplitudes);
  std::vector<ad::Var> out;
  out.reserve(static_cast<std::size_t>(T) + 1);
  // Walkers start localized: M^0 = I exactly, not up to rounding of 1/sqrt(deg)^2.
  out.push_back(tape.constant(Mat::Identity(layout.n, layout.n)));
  for (int t = 0; t < T; ++t) {
    state = apply_shift(apply_coin(state, coins), layout);
    out.push_back(measure(state, layout));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Value-level API
// ---------------------------------------------------------------------------

inline CoinBank generate_coin_vectors(const AttributedGraph& g, const Mat& node_embeddings,
                                      const CoinParams& params) {
  const WalkLayout layout = WalkLayout::of(g);
  ad::Tape tape;
  const ad::Var e = coin_vectors(layout, tape.constant(node_embeddings), tape.constant(params.W),
                                 tape.constant(params.attention));
  return CoinBank{e.value(), layout.degree};
}

inline WalkState apply_coin(const WalkState& s, const CoinBank& bank) {
  if (bank.vectors.rows() != s.n || bank.vectors.cols() != s.d) {
    throw ShapeError("apply_coin: coin bank " + shape_str(bank.vectors) + " for state n=" +
                     std::to_string(s.n) + " d=" + std::to_string(s.d));
  }
  ad::Tape tape;
  WalkState out = s;
  out.amplitudes = apply_coin(tape.constant(s.amplitudes), tape.constant(bank.vectors)).value();
  return out;
}

inline WalkState apply_shift(const WalkState& s, const WalkLayout& layout) {
  ad::Tape tape;
  WalkState out = s;
  out.amplitudes = apply_shift(tape.constant(s.amplitudes), layout).value();
  ++out.t;
  return out;
}

inline Mat measure(const WalkState& s) {
  Mat m(s.n, s.n);
  for (int w = 0; w < s.n; ++w) {
    for (int j = 0; j < s.n; ++j) {
      m(w, j) = s.amplitudes.row(w).segment(static_cast<Index>(j) * s.d, s.d).squaredNorm();
    }
  }
  return m;
}

inline EncodingSequence run_walk(const WalkLayout& layout, const CoinBank& bank, int T) {
  ad::Tape tape;
  EncodingSequence seq;
  for (const ad::Var& m : walk_encodings(layout, tape.constant(bank.vectors), T)) {
    seq.matrices.push_back(m.value());
  }
  return seq;
}

inline EncodingSequence run_walk(const AttributedGraph& g, const Mat& node_embeddings,
                                 const CoinParams& params, int T) {
  if (T < 0) throw std::invalid_argument("run_walk: walk length must be >= 0");
  return run_walk(WalkLayout::of(g), generate_coin_vectors(g, node_embeddings, params), T);
}

/// Largest |row sum - 1| over all matrices of a sequence.
inline double max_row_sum_deviation(const EncodingSequence& seq) {
  double worst = 0.0;
  for (const Mat& m : seq.matrices) {
    for (Index i = 0; i < m.rows(); ++i) worst = std::max(worst, std::abs(m.row(i).sum() - 1.0));
  }
  return worst;
}

}  // namespace gqw
