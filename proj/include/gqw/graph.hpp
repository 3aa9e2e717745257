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
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gqw/tensor.hpp"

namespace gqw {

/// Structural inconsistency in graph data (bad edge, bad node reference, ...).
class GraphError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Default clamp for degree-encoding indices.
inline constexpr int kDefaultDegreeCap = 64;

/// Undirected node-attributed graph. Neighbor lists are sorted ascending, and
/// coin direction j of node v always refers to neighbors[v][j].
struct AttributedGraph {
  int node_count = 0;
  /// Undirected edges stored once as (u, v) with u < v, sorted.
  std::vector<std::pair<int, int>> edges;
  /// n x F.
  Mat node_features;
  std::vector<std::vector<int>> neighbors;
  int max_degree = 0;
  int label = 0;
  /// Clamped degree per node; empty until degree_encode() runs.
  std::vector<int> degree_index;

  int degree(int v) const { return static_cast<int>(neighbors[static_cast<std::size_t>(v)].size()); }
  int feature_dim() const { return static_cast<int>(node_features.cols()); }

  /// Builds a graph from an arbitrary undirected edge list. Duplicates and
  /// reversed copies collapse to one edge; self-loops and out-of-range ids are
  /// rejected.
  static AttributedGraph from_edges(int n, std::span<const std::pair<int, int>> edge_list,
                                    Mat features, int label) {
    if (n < 0) throw GraphError("from_edges: negative node count");
    if (features.rows() != n) {
      throw GraphError("from_edges: feature rows " + std::to_string(features.rows()) +
                       " != node count " + std::to_string(n));
    }
    if (!all_finite(features)) throw GraphError("from_edges: non-finite node features");
    AttributedGraph g;
    g.node_count = n;
    g.node_features = std::move(features);
    g.label = label;
    for (auto [u, v] : edge_list) {
      if (u < 0 || v < 0 || u >= n || v >= n) {
        throw GraphError("from_edges: edge (" + std::to_string(u) + ", " + std::to_string(v) +
                         ") outside [0, " + std::to_string(n) + ")");
      }
      if (u == v) throw GraphError("from_edges: self-loop at node " + std::to_string(u));
      g.edges.emplace_back(std::min(u, v), std::max(u, v));
    }
    std::sort(g.edges.begin(), g.edges.end());
    g.edges.erase(std::unique(g.edges.begin(), g.edges.end()), g.edges.end());
    g.rebuild_neighbors();
    return g;
  }

  void rebuild_neighbors() {
    neighbors.assign(static_cast<std::size_t>(node_count), {});
    for (auto [u, v] : edges) {
      neighbors[static_cast<std::size_t>(u)].push_back(v);
      neighbors[static_cast<std::size_t>(v)].push_back(u);
    }
    max_degree = 0;
    for (auto& nb : neighbors) {
      std::sort(nb.begin(), nb.end());
      max_degree = std::max(max_degree, static_cast<int>(nb.size()));
    }
  }

  /// Position of `neighbor` in v's sorted neighbor list, or -1.
  int direction_of(int v, int neighbor) const {
    const auto& nb = neighbors[static_cast<std::size_t>(v)];
    auto it = std::lower_bound(nb.begin(), nb.end(), neighbor);
    if (it == nb.end() || *it != neighbor) return -1;
    return static_cast<int>(it - nb.begin());
  }
};

/// A dataset of graphs sharing one feature space.
struct GraphCollection {
  std::string name;
  std::vector<AttributedGraph> graphs;
  int num_classes = 0;
  int feature_dim = 0;

  std::size_t size() const { return graphs.size(); }

  void validate() const {
    for (std::size_t i = 0; i < graphs.size(); ++i) {
      const auto& g = graphs[i];
      if (g.feature_dim() != feature_dim) {
        throw GraphError("graph " + std::to_string(i) + " has feature dim " +
                         std::to_string(g.feature_dim()) + ", expected " +
                         std::to_string(feature_dim));
      }
      if (g.label < 0 || g.label >= num_classes) {
        throw GraphError("graph " + std::to_string(i) + " has label " + std::to_string(g.label) +
                         " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
};

/// Graph plus a virtual readout node with id n. The virtual node attends to
/// every node but takes no part in the walk, so the base topology is untouched.
struct AugmentedGraph {
  AttributedGraph base;
  int virtual_node_id = 0;
  bool has_virtual = false;

  int node_count() const { return base.node_count; }
  int attention_size() const { return base.node_count + (has_virtual ? 1 : 0); }
};

inline void degree_encode(AttributedGraph& g, int degree_cap = kDefaultDegreeCap) {
  if (degree_cap < 1) throw std::invalid_argument("degree_encode: degree_cap must be >= 1");
  g.degree_index.resize(static_cast<std::size_t>(g.node_count));
  for (int v = 0; v < g.node_count; ++v) {
    g.degree_index[static_cast<std::size_t>(v)] = std::min(g.degree(v), degree_cap);
  }
}

inline GraphCollection degree_encode(GraphCollection collection,
                                     int degree_cap = kDefaultDegreeCap) {
  for (auto& g : collection.graphs) degree_encode(g, degree_cap);
  return collection;
}

inline AugmentedGraph add_virtual_node(AttributedGraph graph) {
  AugmentedGraph a;
  a.virtual_node_id = graph.node_count;
  a.base = std::move(graph);
  a.has_virtual = true;
  return a;
}

inline AugmentedGraph add_virtual_node(const AugmentedGraph& graph) {
  if (graph.has_virtual) throw GraphError("add_virtual_node: graph already has a virtual node");
  return add_virtual_node(graph.base);
}

/// Relabels nodes: old node v becomes perm[v]. Features and degree indices
/// move with their nodes; neighbor lists are re-sorted under the new ids.
inline AttributedGraph permute_graph(const AttributedGraph& g, std::span<const int> perm) {
  if (static_cast<int>(perm.size()) != g.node_count) {
    throw GraphError("permute_graph: permutation size mismatch");
  }
  std::vector<int> seen(perm.size(), 0);
  for (int p : perm) {
    if (p < 0 || p >= g.node_count || seen[static_cast<std::size_t>(p)]++) {
      throw GraphError("permute_graph: not a permutation");
    }
  }
  std::vector<std::pair<int, int>> edges;
  edges.reserve(g.edges.size());
  for (auto [u, v] : g.edges) {
    edges.emplace_back(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]);
  }
  Mat features(g.node_features.rows(), g.node_features.cols());
  for (int v = 0; v < g.node_count; ++v) {
    features.row(perm[static_cast<std::size_t>(v)]) = g.node_features.row(v);
  }
  AttributedGraph out = AttributedGraph::from_edges(g.node_count, edges, std::move(features), g.label);
  if (!g.degree_index.empty()) {
    out.degree_index.resize(g.degree_index.size());
    for (int v = 0; v < g.node_count; ++v) {
      out.degree_index[static_cast<std::size_t>(perm[static_cast<std::size_t>(v)])] =
          g.degree_index[static_cast<std::size_t>(v)];
    }
  }
  return out;
}

}  // namespace gqw
