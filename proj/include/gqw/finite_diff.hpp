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
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "gqw/autodiff.hpp"

namespace gqw {

/// Scalar function of one tensor, recorded on the given tape.
using ScalarFn = std::function<ad::Var(ad::Tape&, const ad::Var&)>;

struct FiniteDiffOptions {
  double step = 1e-5;
  std::size_t max_coords = 50;
  std::uint64_t seed = 0;
};

/// Compares the tape gradient of `fn` at `point` with central differences on a
/// random subsample of coordinates. Returns the largest relative error, using
/// max(|analytic|, |numeric|, 1e-8) as denominator.
inline double finite_diff_check(const ScalarFn& fn, const Mat& point,
                                const FiniteDiffOptions& opts = {}) {
  Mat analytic;
  {
    ad::Tape tape;
    const ad::Var x = tape.leaf(point);
    const ad::Var y = fn(tape, x);
    tape.backward(y);
    analytic = ad::gradient_or_zero(x);
  }

  auto eval = [&](const Mat& at) {
    ad::Tape tape;
    return fn(tape, tape.leaf(at)).value()(0, 0);
  };

  std::vector<Index> coords(static_cast<std::size_t>(point.size()));
  std::iota(coords.begin(), coords.end(), Index{0});
  if (coords.size() > opts.max_coords) {
    std::mt19937_64 rng(opts.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(opts.max_coords);
  }

  double worst = 0.0;
  Mat probe = point;
  for (Index k : coords) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + opts.step;
    const double up = eval(probe);
    probe.data()[k] = orig - opts.step;
    const double down = eval(probe);
    probe.data()[k] = orig;
    const double numeric = (up - down) / (2.0 * opts.step);
    const double a = analytic.data()[k];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace gqw
