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
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gqw/graph.hpp"

namespace gqw {

struct Fold {
  std::vector<int> train_ids;
  std::vector<int> test_ids;
};

/// Stratified k-fold split. Members of each class are shuffled, then dealt
/// round-robin over the folds with one running cursor across classes, which
/// keeps fold sizes within one of each other and every class share within one
/// graph of its global share.
inline std::vector<Fold> stratified_kfold(const GraphCollection& collection, int k,
                                          std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("stratified_kfold: k must be >= 2");
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(collection.num_classes));
  for (std::size_t i = 0; i < collection.graphs.size(); ++i) {
    by_class.at(static_cast<std::size_t>(collection.graphs[i].label)).push_back(static_cast<int>(i));
  }
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (static_cast<int>(by_class[c].size()) < k) {
      throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) + " has " +
                                  std::to_string(by_class[c].size()) + " members, fewer than k=" +
                                  std::to_string(k));
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<std::vector<int>> test(static_cast<std::size_t>(k));
  std::size_t cursor = 0;
  for (auto& members : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (int id : members) {
      test[cursor % static_cast<std::size_t>(k)].push_back(id);
      ++cursor;
    }
  }

  std::vector<Fold> folds(static_cast<std::size_t>(k));
  for (std::size_t f = 0; f < folds.size(); ++f) {
    std::sort(test[f].begin(), test[f].end());
    folds[f].test_ids = test[f];
    for (std::size_t i = 0; i < collection.graphs.size(); ++i) {
      if (!std::binary_search(test[f].begin(), test[f].end(), static_cast<int>(i))) {
        folds[f].train_ids.push_back(static_cast<int>(i));
      }
    }
  }
  return folds;
}

}  // namespace gqw
