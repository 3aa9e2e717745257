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

// Checkpoint files (model config + parameter values) and dataset sources.

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "gqw/model.hpp"
#include "gqw/synthetic.hpp"
#include "gqw/tudataset.hpp"

namespace gqw {

inline constexpr const char* kCheckpointFormat = "gqwformer-checkpoint-1";

/// Raised for checkpoints that are unreadable or do not fit the data.
class CheckpointError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline nlohmann::json model_config_to_json(const ModelConfig& m) {
  return {{"feature_dim", m.feature_dim}, {"num_classes", m.num_classes},
          {"model_dim", m.model_dim},     {"recur_dim", m.recur_dim},
          {"coin_dim", m.coin_dim},       {"num_blocks", m.num_blocks},
          {"walk_length", m.walk_length}, {"degree_cap", m.degree_cap},
          {"dropout", m.dropout},         {"coin_mode", to_string(m.coin_mode)},
          {"use_attention", m.use_attention}, {"use_recurrence", m.use_recurrence},
          {"use_walk_bias", m.use_walk_bias}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig m;
  m.feature_dim = j.at("feature_dim").get<int>();
  m.num_classes = j.at("num_classes").get<int>();
  m.model_dim = j.at("model_dim").get<int>();
  m.recur_dim = j.at("recur_dim").get<int>();
  m.coin_dim = j.at("coin_dim").get<int>();
  m.num_blocks = j.at("num_blocks").get<int>();
  m.walk_length = j.at("walk_length").get<int>();
  m.degree_cap = j.at("degree_cap").get<int>();
  m.dropout = j.at("dropout").get<double>();
  const auto mode = j.at("coin_mode").get<std::string>();
  if (mode == "attribute_aware") {
    m.coin_mode = CoinMode::kAttributeAware;
  } else if (mode == "vanilla") {
    m.coin_mode = CoinMode::kVanilla;
  } else {
    throw CheckpointError("checkpoint: unknown coin_mode '" + mode + "'");
  }
  m.use_attention = j.at("use_attention").get<bool>();
  m.use_recurrence = j.at("use_recurrence").get<bool>();
  m.use_walk_bias = j.value("use_walk_bias", true);
  m.validate();
  return m;
}

struct Checkpoint {
  ModelConfig model;
  ParameterStore params;
};

inline nlohmann::json checkpoint_to_json(const ModelConfig& m, const ParameterStore& params) {
  return {{"format", kCheckpointFormat},
          {"model", model_config_to_json(m)},
          {"parameters", params.to_json()}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", std::string{}) != kCheckpointFormat) {
    throw CheckpointError(std::string("checkpoint: expected format ") + kCheckpointFormat);
  }
  try {
    Checkpoint c{model_config_from_json(j.at("model")), {}};
    c.params = make_parameters(c.model);
    c.params.load_json(j.at("parameters"));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& m,
                            const ParameterStore& params) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << checkpoint_to_json(m, params).dump() << "\n";
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Throws CheckpointError when the dataset does not fit the model's input or
/// output dimensions.
inline void require_compatible(const ModelConfig& m, const GraphCollection& c) {
  if (m.feature_dim != c.feature_dim) {
    throw CheckpointError("checkpoint expects " + std::to_string(m.feature_dim) +
                          " node features, dataset " + c.name + " has " +
                          std::to_string(c.feature_dim));
  }
  if (m.num_classes != c.num_classes) {
    throw CheckpointError("checkpoint expects " + std::to_string(m.num_classes) +
                          " classes, dataset " + c.name + " has " + std::to_string(c.num_classes));
  }
}

/// Dataset source: a TUDataset directory, or "synthetic[:GRAPHS[:NODES[:SEED]]]"
/// (defaults 40 graphs, 8 nodes, seed 0).
inline GraphCollection load_dataset(const std::string& source) {
  const std::string prefix = "synthetic";
  if (source.rfind(prefix, 0) != 0 || (source.size() > prefix.size() && source[prefix.size()] != ':')) {
    return load_tudataset_dir(source);
  }
  long long fields[3] = {40, 8, 0};
  std::size_t pos = prefix.size();
  for (int i = 0; i < 3 && pos < source.size(); ++i) {
    const std::size_t next = source.find(':', pos + 1);
    const std::string tok = source.substr(pos + 1, next == std::string::npos ? std::string::npos : next - pos - 1);
    const auto v = detail::parse_int(tok);
    if (!v || *v < 0) throw std::invalid_argument("bad synthetic dataset spec '" + source + "'");
    fields[i] = *v;
    pos = next == std::string::npos ? source.size() : next;
  }
  if (pos < source.size()) throw std::invalid_argument("bad synthetic dataset spec '" + source + "'");
  return make_synthetic_feature_dataset(static_cast<int>(fields[0]), static_cast<int>(fields[1]),
                                        static_cast<std::uint64_t>(fields[2]));
}

}  // namespace gqw
