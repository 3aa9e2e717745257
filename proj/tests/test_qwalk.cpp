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

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gqw/finite_diff.hpp"
#include "gqw/invariants.hpp"
#include "gqw/oracle.hpp"
#include "gqw/qwalk.hpp"
#include "gqw/random_graphs.hpp"
#include "gqw/synthetic.hpp"
#include "test_util.hpp"

namespace gqw {
namespace {

using testing::k2;
using testing::make_graph;
using testing::path3;
using testing::triangle;

const double kInvSqrt2 = 1.0 / std::sqrt(2.0);

Mat antidiagonal2() {
  Mat m(2, 2);
  m << 0.0, 1.0, 1.0, 0.0;
  return m;
}

// ---- initial state ----

TEST(InitWalkState, K2) {
  const WalkState s = init_walk_state(k2());
  EXPECT_EQ(s.d, 1);
  EXPECT_EQ(s.amplitudes(0, 0), 1.0);
  EXPECT_EQ(s.amplitudes(1, 1), 1.0);
  EXPECT_EQ(s.amplitudes.sum(), 2.0);
}

TEST(InitWalkState, TriangleSplitsEvenly) {
  const WalkState s = init_walk_state(triangle());
  ASSERT_EQ(s.d, 2);
  for (int w = 0; w < 3; ++w) {
    EXPECT_DOUBLE_EQ(s.amplitudes(w, 2 * w), kInvSqrt2);
    EXPECT_DOUBLE_EQ(s.amplitudes(w, 2 * w + 1), kInvSqrt2);
  }
}

TEST(InitWalkState, MeasuresToIdentity) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 30; ++i) {
    const AttributedGraph g = random_graph(rng, RandomGraphSpec{});
    const Mat id = Mat::Identity(g.node_count, g.node_count);
    EXPECT_LE(max_abs_diff(measure(init_walk_state(g)), id), 1e-15);
    EXPECT_EQ(run_walk(WalkLayout::of(g), vanilla_coins(WalkLayout::of(g)), 2).matrices[0], id);
  }
}

// ---- coin vectors and operators ----

TEST(CoinVectors, ZeroWeightsGiveIdentityCoins) {
  const AttributedGraph g = triangle();
  const CoinBank bank = generate_coin_vectors(g, g.node_features, CoinParams{Mat::Zero(1, 4), Mat::Ones(8, 1)});
  EXPECT_EQ(bank.vectors, Mat(Mat::Zero(3, 2)));
  for (int v = 0; v < 3; ++v) {
    EXPECT_EQ(build_coin_operator(bank.vectors.row(v), 2), Mat(Mat::Identity(2, 2)));
  }
  const WalkState s = init_walk_state(g);
  EXPECT_EQ(apply_coin(s, bank).amplitudes, s.amplitudes);
}

TEST(CoinVectors, SymmetricNodesGetEqualVectors) {
  std::mt19937_64 rng(4);
  const AttributedGraph g = triangle();
  const CoinParams cp{uniform_mat(1, 4, 1.0, rng), uniform_mat(8, 1, 1.0, rng)};
  const CoinBank bank = generate_coin_vectors(g, g.node_features, cp);
  EXPECT_EQ(bank.vectors.row(0), bank.vectors.row(1));
  EXPECT_EQ(bank.vectors.row(1), bank.vectors.row(2));
}

TEST(CoinVectors, MatchesScalarReimplementation) {
  Mat x = Mat::Identity(3, 3);
  const AttributedGraph g =
      AttributedGraph::from_edges(3, std::vector<std::pair<int, int>>{{0, 1}, {1, 2}, {0, 2}}, x, 0);
  std::mt19937_64 rng(0);
  const int fc = 4;
  const CoinParams cp{uniform_mat(3, fc, 1.0, rng), uniform_mat(2 * fc, 1, 1.0, rng)};
  const CoinBank bank = generate_coin_vectors(g, x, cp);
  for (int v = 0; v < 3; ++v) {
    const auto& nb = g.neighbors[static_cast<std::size_t>(v)];
    for (std::size_t j = 0; j < nb.size(); ++j) {
      double s = 0.0;
      for (int k = 0; k < fc; ++k) {
        double wu = 0.0, wv = 0.0;
        for (int f = 0; f < 3; ++f) {
          wu += x(nb[j], f) * cp.W(f, k);
          wv += x(v, f) * cp.W(f, k);
        }
        s += cp.attention(k, 0) * wu + cp.attention(fc + k, 0) * wv;
      }
      const double expected = s > 0.0 ? s : 0.2 * s;
      EXPECT_NEAR(bank.vectors(v, static_cast<Index>(j)), expected, 1e-14);
    }
  }
}

TEST(CoinVectors, PaddingEntriesAreZero) {
  std::mt19937_64 rng(6);
  const AttributedGraph g = make_graph(4, {{0, 1}, {0, 2}, {0, 3}}, 2);
  const CoinParams cp{uniform_mat(2, 3, 1.0, rng), uniform_mat(6, 1, 1.0, rng)};
  const CoinBank bank = generate_coin_vectors(g, uniform_mat(4, 2, 1.0, rng), cp);
  ASSERT_EQ(bank.d(), 3);
  for (int v = 1; v < 4; ++v) {
    EXPECT_EQ(bank.vectors(v, 1), 0.0);
    EXPECT_EQ(bank.vectors(v, 2), 0.0);
  }
}

TEST(CoinOperator, SmallCases) {
  Eigen::RowVectorXd one(1);
  one << 1.0;
  EXPECT_EQ(build_coin_operator(one, 1), Mat::Constant(1, 1, -1.0));
  Eigen::RowVectorXd two(2);
  two << 1.0, 1.0;
  Mat expected(2, 2);
  expected << 0.0, -1.0, -1.0, 0.0;
  EXPECT_LE(max_abs_diff(build_coin_operator(two, 2), expected), 1e-15);
  Eigen::RowVectorXd zero = Eigen::RowVectorXd::Zero(1);
  EXPECT_EQ(build_coin_operator(zero, 1), Mat::Constant(1, 1, 1.0));
}

TEST(CoinOperator, RandomReflectionProperties) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 20; ++i) {
    const Mat e = uniform_mat(1, 5, 1.0, rng);
    const Mat u = build_coin_operator(e.row(0), 5);
    EXPECT_LE(max_abs_diff(u * u.transpose(), Mat::Identity(5, 5)), 1e-12);
    EXPECT_LE(max_abs_diff(u * e.transpose(), -e.transpose()), 1e-12);
    // A vector orthogonal to e is fixed.
    Mat x = uniform_mat(5, 1, 1.0, rng);
    x -= e.transpose() * (e * x)(0, 0) / e.squaredNorm();
    EXPECT_LE(max_abs_diff(u * x, x), 1e-12);
    // Scale invariance in e.
    const Mat scaled = -3.5 * e;
    EXPECT_LE(max_abs_diff(build_coin_operator(scaled.row(0), 5), u), 1e-14);
  }
}

TEST(CoinOperator, InactiveBlockIsIdentity) {
  Eigen::RowVectorXd e(4);
  e << 0.3, -1.2, 0.0, 0.0;
  const Mat u = build_coin_operator(e, 2);
  EXPECT_EQ(u.bottomRightCorner(2, 2), Mat(Mat::Identity(2, 2)));
  EXPECT_EQ(u.topRightCorner(2, 2), Mat(Mat::Zero(2, 2)));
}

// ---- coin and shift ----

TEST(ApplyCoin, K2NegatesAmplitudes) {
  const WalkLayout l = WalkLayout::of(k2());
  const WalkState s = init_walk_state(l);
  EXPECT_EQ(apply_coin(s, vanilla_coins(l)).amplitudes, Mat(-s.amplitudes));
}

TEST(ApplyCoin, TriangleGroverCoin) {
  const WalkLayout l = WalkLayout::of(triangle());
  const WalkState s = apply_coin(init_walk_state(l), vanilla_coins(l));
  EXPECT_NEAR(s.amplitudes(0, 0), -kInvSqrt2, 1e-15);
  EXPECT_NEAR(s.amplitudes(0, 1), -kInvSqrt2, 1e-15);
}

TEST(ApplyShift, K2MovesAmplitude) {
  const WalkLayout l = WalkLayout::of(k2());
  WalkState s = init_walk_state(l);
  s.amplitudes(0, 0) = -1.0;
  const WalkState t = apply_shift(s, l);
  EXPECT_EQ(t.amplitudes(0, 1), -1.0);
  EXPECT_EQ(t.amplitudes(0, 0), 0.0);
  EXPECT_EQ(t.t, 1);
}

TEST(ApplyShift, PathFlipFlop) {
  const WalkLayout l = WalkLayout::of(path3());
  ASSERT_EQ(l.d, 2);
  WalkState s = init_walk_state(l);
  s.amplitudes.setZero();
  // Walker at node 1: direction 0 points to node 0, direction 1 to node 2.
  s.amplitudes(1, 2 * 1 + 0) = 0.6;
  s.amplitudes(1, 2 * 1 + 1) = 0.8;
  const WalkState t = apply_shift(s, l);
  EXPECT_EQ(t.amplitudes(1, 0), 0.6);  // node 0, direction back to 1
  EXPECT_EQ(t.amplitudes(1, 4), 0.8);  // node 2, direction back to 1
  EXPECT_NEAR(t.amplitudes.row(1).squaredNorm(), 1.0, 1e-15);
}

TEST(ApplyShift, IsAnInvolution) {
  const PropertyResult r = check_shift_involution(100, 21);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(Measure, K2AfterOneStep) {
  const WalkLayout l = WalkLayout::of(k2());
  const WalkState s = apply_shift(apply_coin(init_walk_state(l), vanilla_coins(l)), l);
  EXPECT_EQ(measure(s), antidiagonal2());
}

TEST(Measure, TriangleUniformCoinRow) {
  const WalkLayout l = WalkLayout::of(triangle());
  const Mat m = measure(apply_shift(apply_coin(init_walk_state(l), vanilla_coins(l)), l));
  EXPECT_NEAR(m(0, 0), 0.0, 1e-15);
  EXPECT_NEAR(m(0, 1), 0.5, 1e-15);
  EXPECT_NEAR(m(0, 2), 0.5, 1e-15);
}

TEST(Measure, PaddedDirectionsStayEmpty) {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 30; ++i) {
    const AttributedGraph g = random_graph(rng, RandomGraphSpec{});
    const WalkLayout l = WalkLayout::of(g);
    const CoinBank bank = generate_coin_vectors(g, g.node_features,
                                                CoinParams{uniform_mat(3, 4, 1.0, rng), uniform_mat(8, 1, 1.0, rng)});
    WalkState s = init_walk_state(l);
    for (int t = 0; t < 5; ++t) {
      s = apply_shift(apply_coin(s, bank), l);
      for (int w = 0; w < l.n; ++w) {
        for (int j = 0; j < l.n; ++j) {
          const int deg = l.degree[static_cast<std::size_t>(j)];
          for (int c = std::max(deg, 1); c < l.d; ++c) {
            EXPECT_EQ(s.amplitudes(w, static_cast<Index>(j) * l.d + c), 0.0);
          }
        }
      }
    }
  }
}

// ---- run_walk ----

TEST(RunWalk, ZeroLengthIsIdentity) {
  const AttributedGraph g = triangle();
  const EncodingSequence seq = run_walk(WalkLayout::of(g), vanilla_coins(WalkLayout::of(g)), 0);
  ASSERT_EQ(seq.walk_length(), 0);
  EXPECT_EQ(seq.matrices[0], Mat(Mat::Identity(3, 3)));
  EXPECT_THROW(run_walk(WalkLayout::of(g), vanilla_coins(WalkLayout::of(g)), -1), std::invalid_argument);
}

TEST(RunWalk, K2Bounces) {
  const WalkLayout l = WalkLayout::of(k2());
  const EncodingSequence seq = run_walk(l, vanilla_coins(l), 2);
  ASSERT_EQ(seq.matrices.size(), 3u);
  EXPECT_EQ(seq.matrices[0], Mat(Mat::Identity(2, 2)));
  EXPECT_EQ(seq.matrices[1], antidiagonal2());
  EXPECT_EQ(seq.matrices[2], Mat(Mat::Identity(2, 2)));
}

TEST(RunWalk, IsolatedNodeStaysPut) {
  const AttributedGraph g = make_graph(3, {{0, 1}});
  const WalkLayout l = WalkLayout::of(g);
  const EncodingSequence seq = run_walk(l, vanilla_coins(l), 3);
  for (const Mat& m : seq.matrices) EXPECT_EQ(m(2, 2), 1.0);
}

TEST(RunWalk, RowStochasticAndNormConserving) {
  EXPECT_TRUE(check_row_stochastic(100, 31).passed);
  const PropertyResult r = check_norm_conservation(100, 32);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(RunWalk, EntriesInUnitInterval) {
  std::mt19937_64 rng(33);
  for (int i = 0; i < 30; ++i) {
    const AttributedGraph g = random_graph(rng, RandomGraphSpec{});
    const EncodingSequence seq =
        run_walk(g, g.node_features, CoinParams{uniform_mat(3, 4, 1.0, rng), uniform_mat(8, 1, 1.0, rng)}, 6);
    for (const Mat& m : seq.matrices) {
      EXPECT_GE(m.minCoeff(), 0.0);
      EXPECT_LE(m.maxCoeff(), 1.0 + 1e-12);
    }
  }
}

TEST(RunWalk, GeneratedCoinsAreOrthogonal) {
  const PropertyResult r = check_coin_unitarity(100, 34);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(RunWalk, PermutationEquivariance) {
  const PropertyResult r = check_walk_equivariance(20, 5, 35);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(RunWalk, FeatureSensitivity) {
  const FeatureSensitivity fs = measure_feature_sensitivity(make_synthetic_feature_dataset(10, 6, 1), 4, 36);
  EXPECT_EQ(fs.vanilla_max_diff, 0.0);
  EXPECT_GT(fs.aware_min_diff, 1e-6);
}

// ---- oracle ----

TEST(Oracle, K2StepOperator) {
  const AttributedGraph g = k2();
  Mat expected(2, 2);
  expected << 0.0, -1.0, -1.0, 0.0;
  EXPECT_EQ(oracle_step_operator(g, vanilla_coins(WalkLayout::of(g))), expected);
}

TEST(Oracle, StepOperatorOrthogonal) {
  std::mt19937_64 rng(40);
  for (int i = 0; i < 50; ++i) {
    const AttributedGraph g = random_graph(rng, RandomGraphSpec{});
    const CoinBank bank = generate_coin_vectors(g, g.node_features,
                                                CoinParams{uniform_mat(3, 4, 1.0, rng), uniform_mat(8, 1, 1.0, rng)});
    const Mat u = oracle_step_operator(g, bank);
    EXPECT_LE(max_abs_diff(u * u.transpose(), Mat::Identity(u.rows(), u.cols())), 1e-10);
  }
}

TEST(Oracle, AgreesWithRunWalk) {
  const PropertyResult r = check_oracle_equivalence(200, 41);
  EXPECT_TRUE(r.passed) << r.worst;
}

TEST(Oracle, RandomFiveNodeGraphT4) {
  std::mt19937_64 rng(42);
  RandomGraphSpec spec;
  spec.min_nodes = spec.max_nodes = 5;
  spec.connected = true;
  const AttributedGraph g = random_graph(rng, spec);
  const CoinBank bank = generate_coin_vectors(g, g.node_features,
                                              CoinParams{uniform_mat(3, 4, 1.0, rng), uniform_mat(8, 1, 1.0, rng)});
  const EncodingSequence a = run_walk(WalkLayout::of(g), bank, 4);
  const EncodingSequence b = oracle_evolve(g, bank, 4);
  for (int t = 0; t <= 4; ++t) EXPECT_LE(max_abs_diff(a.matrices[t], b.matrices[t]), 1e-10);
}

TEST(Oracle, RefusesLargeGraphs) {
  std::vector<std::pair<int, int>> cycle;
  for (int i = 0; i < 40; ++i) cycle.emplace_back(i, (i + 1) % 40);
  const AttributedGraph g = make_graph(40, cycle);
  EXPECT_THROW(oracle_step_operator(g, vanilla_coins(WalkLayout::of(g))), std::invalid_argument);
}

// ---- gradients through the walk ----

TEST(WalkGradient, CoinParamsMatchFiniteDifferences) {
  std::mt19937_64 rng(50);
  RandomGraphSpec spec;
  spec.min_nodes = spec.max_nodes = 5;
  spec.connected = true;
  for (int trial = 0; trial < 5; ++trial) {
    const AttributedGraph g = random_graph(rng, spec);
    const WalkLayout l = WalkLayout::of(g);
    const Mat W0 = uniform_mat(3, 4, 1.0, rng);
    const Mat a0 = uniform_mat(8, 1, 1.0, rng);
    const Mat weights = uniform_mat(5, 5, 1.0, rng);
    auto loss = [&](ad::Tape& t, const ad::Var& W, const ad::Var& a) {
      const ad::Var e = coin_vectors(l, t.constant(g.node_features), W, a);
      const auto walk = walk_encodings(l, e, 3);
      return ad::sum(ad::hadamard(walk.back(), t.constant(weights)));
    };
    const double err_w = finite_diff_check(
        [&](ad::Tape& t, const ad::Var& W) { return loss(t, W, t.constant(a0)); }, W0);
    const double err_a = finite_diff_check(
        [&](ad::Tape& t, const ad::Var& a) { return loss(t, t.constant(W0), a); }, a0);
    EXPECT_LE(err_w, 1e-4);
    EXPECT_LE(err_a, 1e-4);
  }
}

}  // namespace
}  // namespace gqw
