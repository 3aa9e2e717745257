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

// Random instances for property checks.

#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "gqw/graph.hpp"

namespace gqw {

struct RandomGraphSpec {
  int min_nodes = 2;
  int max_nodes = 6;
  int max_degree = 4;
  double edge_prob = 0.5;
  int feature_dim = 3;
  /// Add a spanning path first so the graph is connected (degree cap permitting).
  bool connected = false;
};

/// Random simple graph with uniform features in [-1, 1]; no node exceeds
/// spec.max_degree.
inline AttributedGraph random_graph(std::mt19937_64& rng, const RandomGraphSpec& spec) {
  std::uniform_int_distribution<int> size(spec.min_nodes, spec.max_nodes);
  const int n = size(rng);
  std::vector<int> deg(static_cast<std::size_t>(n), 0);
  std::vector<std::pair<int, int>> edges;
  auto try_add = [&](int u, int v) {
    if (deg[static_cast<std::size_t>(u)] >= spec.max_degree ||
        deg[static_cast<std::size_t>(v)] >= spec.max_degree) {
      return;
    }
    for (auto [a, b] : edges) {
      if ((a == u && b == v) || (a == v && b == u)) return;
    }
    edges.emplace_back(u, v);
    ++deg[static_cast<std::size_t>(u)];
    ++deg[static_cast<std::size_t>(v)];
  };
  if (spec.connected) {
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int i = 1; i < n; ++i) try_add(order[static_cast<std::size_t>(i - 1)], order[static_cast<std::size_t>(i)]);
  }
  std::bernoulli_distribution coin(spec.edge_prob);
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (coin(rng)) try_add(u, v);
    }
  }
  std::uniform_real_distribution<double> feat(-1.0, 1.0);
  Mat x(n, spec.feature_dim);
  for (Index i = 0; i < x.size(); ++i) x.data()[i] = feat(rng);
  return AttributedGraph::from_edges(n, edges, std::move(x), 0);
}

inline std::vector<int> random_permutation(std::mt19937_64& rng, int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

/// P M P^T for the relabeling old v -> perm[v].
inline Mat permute_square(const Mat& m, const std::vector<int>& perm) {
  Mat out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]) = m(i, j);
    }
  }
  return out;
}

}  // namespace gqw
