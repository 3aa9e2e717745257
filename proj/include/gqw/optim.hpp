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

#include <cmath>
#include <stdexcept>
#include <string>

#include "gqw/params.hpp"

namespace gqw {

/// Linear interpolation from base_lr at step 0 to end_lr at total_steps.
inline double linear_lr(long step, long total_steps, double base_lr, double end_lr) {
  if (total_steps <= 0) return base_lr;
  if (step < 0 || step > total_steps) throw std::out_of_range("linear_lr: step outside [0, total]");
  if (step == total_steps) return end_lr;
  const double frac = static_cast<double>(step) / static_cast<double>(total_steps);
  return base_lr + (end_lr - base_lr) * frac;
}

inline double global_norm(const GradSet& grads) {
  double sq = 0.0;
  for (const Mat& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

/// Scales every gradient by max_norm / norm when the global L2 norm exceeds
/// max_norm. Returns the norm before clipping.
inline double clip_global_norm(GradSet& grads, double max_norm = 1.0) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Mat& g : grads) g *= scale;
  }
  return norm;
}

struct AdamWOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: p -= lr*wd*p, then the bias-corrected
/// adaptive step.
class AdamW {
 public:
  AdamW(const ParameterStore& store, AdamWOptions opts = {})
      : opts_(opts), m_(store.zero_grads()), v_(store.zero_grads()) {}

  /// Applies one update with learning rate lr. Throws (leaving parameters
  /// untouched) if any gradient is non-finite.
  void step(ParameterStore& store, const GradSet& grads, double lr) {
    if (grads.size() != store.size()) throw std::invalid_argument("AdamW: gradient count mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (!all_finite(grads[i])) {
        throw NumericError("AdamW: non-finite gradient for parameter " + store[i].name);
      }
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < grads.size(); ++i) {
      Mat& p = store[i].value;
      m_[i] = opts_.beta1 * m_[i] + (1.0 - opts_.beta1) * grads[i];
      v_[i] = opts_.beta2 * v_[i] + (1.0 - opts_.beta2) * grads[i].cwiseProduct(grads[i]);
      p *= (1.0 - lr * opts_.weight_decay);
      const auto m_hat = m_[i].array() / bc1;
      const auto v_hat = v_[i].array() / bc2;
      p.array() -= lr * m_hat / (v_hat.sqrt() + opts_.eps);
    }
  }

  long steps_taken() const { return t_; }

 private:
  AdamWOptions opts_;
  GradSet m_;
  GradSet v_;
  long t_ = 0;
};

}  // namespace gqw
