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
#include <map>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "gqw/autodiff.hpp"

namespace gqw {

struct Parameter {
  std::string name;
  Mat value;
  /// Initialization bound is 1/sqrt(fan_in).
  double fan_in = 1.0;
};

/// Gradients aligned index-by-index with a ParameterStore.
using GradSet = std::vector<Mat>;

/// Ordered set of named trainable tensors.
class ParameterStore {
 public:
  std::size_t add(std::string name, Index rows, Index cols, double fan_in) {
    if (index_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_.emplace(name, params_.size());
    params_.push_back(Parameter{std::move(name), Mat::Zero(rows, cols), fan_in});
    return params_.size() - 1;
  }

  std::size_t index_of(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw std::out_of_range("unknown parameter " + std::string(name));
    return it->second;
  }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  Parameter& operator[](std::size_t i) { return params_.at(i); }
  const Parameter& operator[](std::size_t i) const { return params_.at(i); }
  Parameter& operator[](std::string_view name) { return params_[index_of(name)]; }
  const Parameter& operator[](std::string_view name) const { return params_[index_of(name)]; }

  std::size_t size() const { return params_.size(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Total number of scalars.
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
    return n;
  }

  /// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], parameters drawn in order.
  void init_uniform(std::mt19937_64& rng) {
    for (auto& p : params_) {
      p.value = uniform_mat(p.value.rows(), p.value.cols(), 1.0 / std::sqrt(p.fan_in), rng);
    }
  }

  GradSet zero_grads() const {
    GradSet g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.push_back(Mat::Zero(p.value.rows(), p.value.cols()));
    return g;
  }

  /// name -> {shape, data}; keys are sorted so dumps diff cleanly.
  nlohmann::json to_json() const {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& p : params_) {
      std::vector<double> data(p.value.data(), p.value.data() + p.value.size());
      out[p.name] = {{"shape", {p.value.rows(), p.value.cols()}}, {"data", data}};
    }
    return out;
  }

  /// Loads values into an already-shaped store. Every parameter must be present
  /// with a matching shape.
  void load_json(const nlohmann::json& j) {
    for (auto& p : params_) {
      if (!j.contains(p.name)) throw std::invalid_argument("checkpoint lacks parameter " + p.name);
      const auto& entry = j.at(p.name);
      const auto shape = entry.at("shape").get<std::vector<Index>>();
      if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols()) {
        throw std::invalid_argument("checkpoint shape mismatch for " + p.name + ": expected " +
                                    shape_str(p.value));
      }
      const auto data = entry.at("data").get<std::vector<double>>();
      if (static_cast<Index>(data.size()) != p.value.size()) {
        throw std::invalid_argument("checkpoint data size mismatch for " + p.name);
      }
      std::copy(data.begin(), data.end(), p.value.data());
    }
    if (j.size() != params_.size()) {
      throw std::invalid_argument("checkpoint has " + std::to_string(j.size()) +
                                  " parameters, model expects " + std::to_string(params_.size()));
    }
  }

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Places store parameters on a tape as leaves, on first use. A binding can be
/// told to substitute a caller-owned Var for one parameter (finite-difference
/// checks do this).
class ParamBinding {
 public:
  ParamBinding(ad::Tape& tape, const ParameterStore& store)
      : tape_(tape), store_(store), vars_(store.size()) {}

  ad::Var get(std::string_view name) { return get(store_.index_of(name)); }

  ad::Var get(std::size_t i) {
    auto& slot = vars_.at(i);
    if (!slot) slot = tape_.leaf(store_[i].value);
    return *slot;
  }

  void substitute(std::string_view name, const ad::Var& v) {
    const std::size_t i = store_.index_of(name);
    if (v.rows() != store_[i].value.rows() || v.cols() != store_[i].value.cols()) {
      throw ShapeError("substitute: shape mismatch for " + std::string(name));
    }
    vars_[i] = v;
  }

  ad::Tape& tape() { return tape_; }
  const ParameterStore& store() const { return store_; }

  /// Gradients of every parameter after tape.backward(); zeros where unused.
  GradSet gradients() const {
    GradSet g = store_.zero_grads();
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      if (vars_[i] && vars_[i]->grad().size() != 0) g[i] = vars_[i]->grad();
    }
    return g;
  }

 private:
  ad::Tape& tape_;
  const ParameterStore& store_;
  std::vector<std::optional<ad::Var>> vars_;
};

}  // namespace gqw
