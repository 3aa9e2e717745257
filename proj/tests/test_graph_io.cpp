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

#include <algorithm>
#include <filesystem>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "gqw/checkpoint.hpp"
#include "gqw/folds.hpp"
#include "gqw/graph.hpp"
#include "gqw/random_graphs.hpp"
#include "gqw/synthetic.hpp"
#include "gqw/tudataset.hpp"
#include "test_util.hpp"

namespace gqw {
namespace {

namespace fs = std::filesystem;
using testing::make_graph;
using testing::scratch_dir;
using testing::write_file;

const fs::path kMutag = fs::path(GQW_DATA_DIR) / "MUTAG";

void expect_same_collection(const GraphCollection& a, const GraphCollection& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.num_classes, b.num_classes);
  EXPECT_EQ(a.feature_dim, b.feature_dim);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.graphs[i].node_count, b.graphs[i].node_count) << i;
    EXPECT_EQ(a.graphs[i].edges, b.graphs[i].edges) << i;
    EXPECT_EQ(a.graphs[i].label, b.graphs[i].label) << i;
    EXPECT_EQ(a.graphs[i].node_features, b.graphs[i].node_features) << i;
  }
}

TEST(ParseTUDataset, Mutag) {
  const GraphCollection c = load_tudataset_dir(kMutag);
  EXPECT_EQ(c.name, "MUTAG");
  EXPECT_EQ(c.size(), 188u);
  EXPECT_EQ(c.num_classes, 2);
  EXPECT_EQ(c.feature_dim, 7);
  int positives = 0;
  for (const auto& g : c.graphs) {
    positives += g.label;
    EXPECT_EQ(g.node_features.rows(), g.node_count);
    for (Index r = 0; r < g.node_features.rows(); ++r) EXPECT_EQ(g.node_features.row(r).sum(), 1.0);
  }
  EXPECT_EQ(positives, 125);
  EXPECT_NO_THROW(c.validate());
}

TEST(ParseTUDataset, SmallestFile) {
  const fs::path dir = scratch_dir("smallest");
  write_file(dir / "A.txt", "1,2\n2,1\n");
  write_file(dir / "ind.txt", "1\n1\n");
  write_file(dir / "gl.txt", "1\n");
  const GraphCollection c = parse_tudataset(dir / "A.txt", dir / "ind.txt", dir / "gl.txt");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.graphs[0].edges.size(), 1u);
  EXPECT_EQ(c.feature_dim, 1);
  EXPECT_EQ(c.graphs[0].node_features, Mat::Ones(2, 1));
}

TEST(ParseTUDataset, CrossGraphEdgeIsAConsistencyError) {
  const fs::path dir = scratch_dir("cross");
  write_file(dir / "A.txt", "1, 2\n3, 4\n");
  write_file(dir / "ind.txt", "1\n1\n1\n2\n");
  write_file(dir / "gl.txt", "0\n1\n");
  EXPECT_THROW(parse_tudataset(dir / "A.txt", dir / "ind.txt", dir / "gl.txt"), GraphError);
}

TEST(ParseTUDataset, MalformedLineReportsFileAndLine) {
  const fs::path dir = scratch_dir("malformed");
  write_file(dir / "A.txt", "1, 2\n2 1\n");
  write_file(dir / "ind.txt", "1\n1\n");
  write_file(dir / "gl.txt", "0\n");
  try {
    parse_tudataset(dir / "A.txt", dir / "ind.txt", dir / "gl.txt");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("A.txt:2"), std::string::npos) << e.what();
  }
}

TEST(ParseTUDataset, RejectsOutOfRangeIdsAndSelfLoops) {
  const fs::path dir = scratch_dir("range");
  write_file(dir / "ind.txt", "1\n1\n");
  write_file(dir / "gl.txt", "0\n");
  write_file(dir / "A.txt", "1, 3\n");
  EXPECT_THROW(parse_tudataset(dir / "A.txt", dir / "ind.txt", dir / "gl.txt"), ParseError);
  write_file(dir / "A.txt", "2, 2\n");
  EXPECT_THROW(parse_tudataset(dir / "A.txt", dir / "ind.txt", dir / "gl.txt"), GraphError);
}

TEST(ParseTUDataset, RoundTripMutag) {
  const GraphCollection c = load_tudataset_dir(kMutag);
  const fs::path dir = scratch_dir("roundtrip");
  write_tudataset(c, dir, "MUTAG");
  expect_same_collection(c, load_tudataset_dir(dir));
}

TEST(ParseTUDataset, RoundTripSynthetic) {
  const GraphCollection c = make_synthetic_feature_dataset(12, 7, 3);
  const fs::path dir = scratch_dir("roundtrip_synth");
  write_tudataset(c, dir, "SYNTH");
  expect_same_collection(c, load_tudataset_dir(dir));
}

TEST(Graph, DegreeSumIsTwiceEdgeCount) {
  for (const auto& g : load_tudataset_dir(kMutag).graphs) {
    int total = 0;
    for (int v = 0; v < g.node_count; ++v) total += g.degree(v);
    EXPECT_EQ(total, 2 * static_cast<int>(g.edges.size()));
  }
}

TEST(Graph, NeighborListsAscendingAndConsistent) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const AttributedGraph g = random_graph(rng, RandomGraphSpec{});
    for (int v = 0; v < g.node_count; ++v) {
      const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
      EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
      EXPECT_EQ(std::adjacent_find(nb.begin(), nb.end()), nb.end());
      EXPECT_LE(static_cast<int>(nb.size()), g.max_degree);
      for (int u : nb) EXPECT_GE(g.direction_of(u, v), 0);
    }
  }
}

TEST(Graph, DuplicateAndReversedEdgesCollapse) {
  const AttributedGraph g = make_graph(3, {{0, 1}, {1, 0}, {0, 1}, {2, 1}});
  EXPECT_EQ(g.edges.size(), 2u);
  EXPECT_THROW(make_graph(2, {{1, 1}}), GraphError);
  EXPECT_THROW(make_graph(2, {{0, 2}}), GraphError);
  Mat bad = Mat::Ones(2, 1);
  bad(1, 0) = std::nan("");
  EXPECT_THROW(AttributedGraph::from_edges(2, std::vector<std::pair<int, int>>{{0, 1}}, bad, 0), GraphError);
}

TEST(DegreeEncode, PathStarAndIsolated) {
  AttributedGraph p = testing::path3();
  degree_encode(p, 64);
  EXPECT_EQ(p.degree_index, (std::vector<int>{1, 2, 1}));

  std::vector<std::pair<int, int>> star;
  for (int i = 1; i <= 100; ++i) star.emplace_back(0, i);
  AttributedGraph s = make_graph(101, star);
  degree_encode(s, 64);
  EXPECT_EQ(s.degree_index[0], 64);
  EXPECT_EQ(s.degree_index[1], 1);

  AttributedGraph iso = make_graph(1, {});
  degree_encode(iso, 64);
  EXPECT_EQ(iso.degree_index, std::vector<int>{0});
}

TEST(VirtualNode, K2AndGuard) {
  const AugmentedGraph a = add_virtual_node(testing::k2());
  EXPECT_EQ(a.virtual_node_id, 2);
  EXPECT_EQ(a.node_count(), 2);
  EXPECT_EQ(a.attention_size(), 3);
  EXPECT_THROW(add_virtual_node(a), GraphError);

  const AugmentedGraph empty = add_virtual_node(make_graph(3, {}));
  EXPECT_EQ(empty.attention_size(), 4);
  EXPECT_EQ(empty.base.max_degree, 0);
}

TEST(Synthetic, TenSixNodeCycles) {
  const GraphCollection c = make_synthetic_feature_dataset(10, 6, 1);
  ASSERT_EQ(c.size(), 10u);
  int ones = 0;
  for (const auto& g : c.graphs) {
    EXPECT_EQ(g.node_count, 6);
    EXPECT_EQ(g.edges, c.graphs[0].edges);
    for (int v = 0; v < 6; ++v) EXPECT_EQ(g.degree(v), 2);
    ones += g.label;
  }
  EXPECT_EQ(ones, 5);
}

TEST(Synthetic, FeaturesDifferExactlyBetweenClasses) {
  const GraphCollection c = make_synthetic_feature_dataset(20, 8, 5);
  for (std::size_t i = 0; i < c.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) {
      if (c.graphs[i].label != c.graphs[j].label) {
        EXPECT_NE(c.graphs[i].node_features, c.graphs[j].node_features);
      }
    }
  }
  const GraphCollection tri = make_synthetic_feature_dataset(2, 3, 7);
  EXPECT_EQ(tri.graphs[0].edges, tri.graphs[1].edges);
  EXPECT_NE(tri.graphs[0].node_features, tri.graphs[1].node_features);
}

TEST(Synthetic, RejectsBadArguments) {
  EXPECT_THROW(make_synthetic_feature_dataset(3, 6, 0), std::invalid_argument);
  EXPECT_THROW(make_synthetic_feature_dataset(4, 2, 0), std::invalid_argument);
}

TEST(Synthetic, DatasetSourceSpec) {
  const GraphCollection c = load_dataset("synthetic:6:5:2");
  EXPECT_EQ(c.size(), 6u);
  EXPECT_EQ(c.graphs[0].node_count, 5);
  EXPECT_EQ(load_dataset("synthetic").size(), 40u);
  EXPECT_THROW(load_dataset("synthetic:x"), std::invalid_argument);
}

void expect_partition(const std::vector<Fold>& folds, std::size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& f : folds) {
    std::set<int> train(f.train_ids.begin(), f.train_ids.end());
    for (int id : f.test_ids) {
      ++seen[static_cast<std::size_t>(id)];
      EXPECT_EQ(train.count(id), 0u);
    }
    EXPECT_EQ(f.train_ids.size() + f.test_ids.size(), n);
  }
  for (int s : seen) EXPECT_EQ(s, 1);
}

TEST(Folds, MutagTenFold) {
  const GraphCollection c = load_tudataset_dir(kMutag);
  const auto folds = stratified_kfold(c, 10, 0);
  ASSERT_EQ(folds.size(), 10u);
  for (const auto& f : folds) {
    EXPECT_TRUE(f.test_ids.size() == 18u || f.test_ids.size() == 19u) << f.test_ids.size();
    int pos = 0;
    for (int id : f.test_ids) pos += c.graphs[static_cast<std::size_t>(id)].label;
    EXPECT_NEAR(static_cast<double>(pos) / static_cast<double>(f.test_ids.size()), 125.0 / 188.0, 0.1);
  }
  expect_partition(folds, c.size());
}

TEST(Folds, OneClassTenGraphs) {
  GraphCollection c;
  c.num_classes = 1;
  c.feature_dim = 1;
  for (int i = 0; i < 10; ++i) c.graphs.push_back(testing::k2());
  const auto folds = stratified_kfold(c, 10, 3);
  for (const auto& f : folds) EXPECT_EQ(f.test_ids.size(), 1u);
  expect_partition(folds, 10);
}

TEST(Folds, DeterministicUnderSeed) {
  const GraphCollection c = load_tudataset_dir(kMutag);
  const auto a = stratified_kfold(c, 10, 9);
  const auto b = stratified_kfold(c, 10, 9);
  const auto other = stratified_kfold(c, 10, 10);
  bool differs = false;
  for (std::size_t f = 0; f < a.size(); ++f) {
    EXPECT_EQ(a[f].test_ids, b[f].test_ids);
    EXPECT_EQ(a[f].train_ids, b[f].train_ids);
    differs = differs || a[f].test_ids != other[f].test_ids;
  }
  EXPECT_TRUE(differs);
}

TEST(Folds, TooFewMembersIsAnError) {
  const GraphCollection c = make_synthetic_feature_dataset(6, 4, 0);
  EXPECT_THROW(stratified_kfold(c, 10, 0), std::invalid_argument);
}

TEST(Permute, RelabelingMovesFeaturesAndEdges) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20; ++i) {
    const AttributedGraph g = random_graph(rng, RandomGraphSpec{});
    const auto perm = random_permutation(rng, g.node_count);
    const AttributedGraph p = permute_graph(g, perm);
    EXPECT_EQ(p.edges.size(), g.edges.size());
    for (auto [u, v] : g.edges) {
      EXPECT_GE(p.direction_of(perm[static_cast<std::size_t>(u)], perm[static_cast<std::size_t>(v)]), 0);
    }
    for (int v = 0; v < g.node_count; ++v) {
      EXPECT_EQ(p.node_features.row(perm[static_cast<std::size_t>(v)]), g.node_features.row(v));
    }
  }
}

}  // namespace
}  // namespace gqw
