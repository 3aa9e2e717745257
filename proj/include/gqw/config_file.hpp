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

// Plain-text run configuration: one "key = value" per line, '#' starts a
// comment. Keys mirror TrainConfig plus an optional dataset path.

#pragma once

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "gqw/train.hpp"
#include "gqw/tudataset.hpp"

namespace gqw {

struct RunConfig {
  TrainConfig train;
  std::string dataset;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  std::istringstream is(value);
  T out{};
  is >> out;
  if (!is || !is.eof()) throw ConfigError("config: bad value '" + value + "' for " + key);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: bad boolean '" + value + "' for " + key);
}

inline CoinMode parse_mode(const std::string& value) {
  if (value == "attribute_aware" || value == "ours") return CoinMode::kAttributeAware;
  if (value == "vanilla") return CoinMode::kVanilla;
  throw ConfigError("config: encoder_mode must be attribute_aware or vanilla, got '" + value + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& config_setters() {
  static const std::map<std::string, Setter> setters = {
      {"dataset", [](RunConfig& c, const std::string&, const std::string& v) { c.dataset = v; }},
      {"base_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.base_lr = parse_number<double>(k, v); }},
      {"end_lr", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.end_lr = parse_number<double>(k, v); }},
      {"weight_decay", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.weight_decay = parse_number<double>(k, v); }},
      {"clip_norm", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.clip_norm = parse_number<double>(k, v); }},
      {"dropout", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.dropout = parse_number<double>(k, v); }},
      {"epochs", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.epochs = parse_number<int>(k, v); }},
      {"batch_size", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.batch_size = parse_number<int>(k, v); }},
      {"walk_length", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.walk_length = parse_number<int>(k, v); }},
      {"num_blocks", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.num_blocks = parse_number<int>(k, v); }},
      {"model_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.model_dim = parse_number<int>(k, v); }},
      {"recur_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.recur_dim = parse_number<int>(k, v); }},
      {"coin_dim", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.coin_dim = parse_number<int>(k, v); }},
      {"degree_cap", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.degree_cap = parse_number<int>(k, v); }},
      {"folds", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.folds = parse_number<int>(k, v); }},
      {"threads", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.threads = parse_number<int>(k, v); }},
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
      {"encoder_mode", [](RunConfig& c, const std::string&, const std::string& v) { c.train.encoder_mode = parse_mode(v); }},
      {"use_attention", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.use_attention = parse_bool(k, v); }},
      {"use_recurrence", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.use_recurrence = parse_bool(k, v); }},
  };
  return setters;
}

}  // namespace detail

/// Parses key = value text on top of defaults. Unknown keys, repeated keys and
/// malformed lines are errors.
inline RunConfig parse_run_config(std::istream& in, const std::string& source = "config") {
  RunConfig cfg;
  std::map<std::string, bool> seen;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string_view body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(source, no, "expected 'key = value'");
    }
    const std::string key(detail::trim(body.substr(0, eq)));
    const std::string value(detail::trim(body.substr(eq + 1)));
    const auto& setters = detail::config_setters();
    auto it = setters.find(key);
    if (it == setters.end()) throw ParseError(source, no, "unknown key '" + key + "'");
    if (seen[key]) throw ParseError(source, no, "repeated key '" + key + "'");
    seen[key] = true;
    try {
      it->second(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ParseError(source, no, e.what());
    }
  }
  cfg.train.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path);
  return parse_run_config(in, path);
}

/// Writes every key; parse_run_config(print_run_config(c)) reproduces c.
inline std::string print_run_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  const TrainConfig& t = c.train;
  if (!c.dataset.empty()) os << "dataset = " << c.dataset << "\n";
  os << "base_lr = " << t.base_lr << "\n"
     << "end_lr = " << t.end_lr << "\n"
     << "weight_decay = " << t.weight_decay << "\n"
     << "clip_norm = " << t.clip_norm << "\n"
     << "dropout = " << t.dropout << "\n"
     << "epochs = " << t.epochs << "\n"
     << "batch_size = " << t.batch_size << "\n"
     << "walk_length = " << t.walk_length << "\n"
     << "num_blocks = " << t.num_blocks << "\n"
     << "model_dim = " << t.model_dim << "\n"
     << "recur_dim = " << t.recur_dim << "\n"
     << "coin_dim = " << t.coin_dim << "\n"
     << "degree_cap = " << t.degree_cap << "\n"
     << "folds = " << t.folds << "\n"
     << "threads = " << t.threads << "\n"
     << "seed = " << t.seed << "\n"
     << "encoder_mode = " << to_string(t.encoder_mode) << "\n"
     << "use_attention = " << (t.use_attention ? "true" : "false") << "\n"
     << "use_recurrence = " << (t.use_recurrence ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace gqw
