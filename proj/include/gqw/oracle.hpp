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

// Dense reference evolution for small graphs. Builds the full step operator
// U = S (I (x) C) as an explicit matrix and evolves each walker's flattened
// state by repeated multiplication. Shares no evolution code with qwalk.hpp;
// only the coin materialization (build_coin_operator) is common.

#pragma once

#include <stdexcept>

#include "gqw/graph.hpp"
#include "gqw/qwalk.hpp"

namespace gqw {

inline constexpr int kOracleMaxDim = 64;

namespace detail {

inline int oracle_coin_dim(const AttributedGraph& g) { return g.max_degree > 0 ? g.max_degree : 1; }

}  // namespace detail

/// Flip-flop shift as a dense permutation matrix over the (position, direction)
/// basis, built by scanning neighbor lists directly.
inline Mat oracle_shift_matrix(const AttributedGraph& g) {
  const int d = detail::oracle_coin_dim(g);
  const int dim = g.node_count * d;
  Mat s = Mat::Zero(dim, dim);
  std::vector<bool> moved(static_cast<std::size_t>(dim), false);
  for (int u = 0; u < g.node_count; ++u) {
    const auto& nu = g.neighbors[static_cast<std::size_t>(u)];
    for (std::size_t a = 0; a < nu.size(); ++a) {
      const int v = nu[a];
      const auto& nv = g.neighbors[static_cast<std::size_t>(v)];
      int b = -1;
      for (std::size_t k = 0; k < nv.size(); ++k) {
        if (nv[k] == u) b = static_cast<int>(k);
      }
      if (b < 0) throw GraphError("oracle_shift_matrix: asymmetric neighbor lists");
      const int from = v * d + b;
      const int to = u * d + static_cast<int>(a);
      s(to, from) = 1.0;
      moved[static_cast<std::size_t>(from)] = true;
    }
  }
  for (int k = 0; k < dim; ++k) {
    if (!moved[static_cast<std::size_t>(k)]) s(k, k) = 1.0;
  }
  return s;
}

/// Block-diagonal coin operator I (x) C.
inline Mat oracle_coin_matrix(const AttributedGraph& g, const CoinBank& bank) {
  const int d = detail::oracle_coin_dim(g);
  if (bank.vectors.rows() != g.node_count || bank.vectors.cols() != d) {
    throw ShapeError("oracle_coin_matrix: coin bank " + shape_str(bank.vectors));
  }
  const int dim = g.node_count * d;
  Mat c = Mat::Zero(dim, dim);
  for (int v = 0; v < g.node_count; ++v) {
    c.block(v * d, v * d, d, d) = build_coin_operator(bank.vectors.row(v), g.degree(v));
  }
  return c;
}

/// Composite step operator S (I (x) C).
inline Mat oracle_step_operator(const AttributedGraph& g, const CoinBank& bank) {
  if (g.node_count * detail::oracle_coin_dim(g) > kOracleMaxDim) {
    throw std::invalid_argument("oracle_evolve: n*d exceeds " + std::to_string(kOracleMaxDim));
  }
  return oracle_shift_matrix(g) * oracle_coin_matrix(g, bank);
}

inline EncodingSequence oracle_evolve(const AttributedGraph& g, const CoinBank& bank, int T) {
  if (T < 0) throw std::invalid_argument("oracle_evolve: walk length must be >= 0");
  const Mat u = oracle_step_operator(g, bank);
  const int n = g.node_count;
  const int d = detail::oracle_coin_dim(g);
  const int dim = n * d;

  // Column w holds walker w's flattened state.
  Mat psi = Mat::Zero(dim, n);
  for (int w = 0; w < n; ++w) {
    const int deg = g.degree(w);
    if (deg == 0) {
      psi(w * d, w) = 1.0;
    } else {
      for (int c = 0; c < deg; ++c) psi(w * d + c, w) = 1.0 / std::sqrt(static_cast<double>(deg));
    }
  }

  auto measure_all = [&](const Mat& state) {
    Mat m = Mat::Zero(n, n);
    for (int w = 0; w < n; ++w) {
      for (int j = 0; j < n; ++j) {
        double p = 0.0;
        for (int c = 0; c < d; ++c) p += state(j * d + c, w) * state(j * d + c, w);
        m(w, j) = p;
      }
    }
    return m;
  };

  EncodingSequence seq;
  seq.matrices.push_back(measure_all(psi));
  for (int t = 0; t < T; ++t) {
    psi = u * psi;
    seq.matrices.push_back(measure_all(psi));
  }
  return seq;
}

}  // namespace gqw
