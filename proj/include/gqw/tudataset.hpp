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

// Reader and writer for the TUDataset text layout:
//   DS_A.txt               one "i, j" line per directed edge, 1-based global node ids
//   DS_graph_indicator.txt one graph id (1-based) per node
//   DS_graph_labels.txt    one class label per graph
//   DS_node_labels.txt     optional, one integer label per node

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gqw/graph.hpp"

namespace gqw {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::optional<long long> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Reads non-blank lines, keeping their 1-based line numbers.
inline std::vector<std::pair<std::size_t, std::string>> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::vector<std::pair<std::size_t, std::string>> out;
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    if (trim(line).empty()) continue;
    out.emplace_back(no, line);
  }
  return out;
}

inline std::vector<long long> read_int_column(const std::filesystem::path& p) {
  std::vector<long long> values;
  for (const auto& [no, line] : read_lines(p)) {
    auto v = parse_int(line);
    if (!v) throw ParseError(p.string(), no, "expected one integer, got '" + line + "'");
    values.push_back(*v);
  }
  return values;
}

// Maps sorted distinct values onto 0..k-1.
inline std::map<long long, int> dense_codes(const std::vector<long long>& values) {
  std::map<long long, int> codes;
  for (long long v : values) codes.emplace(v, 0);
  int next = 0;
  for (auto& [k, code] : codes) code = next++;
  return codes;
}

}  // namespace detail

/// Parses one TUDataset collection. Node labels become one-hot features; without
/// a node-label file every node gets the single constant feature 1.
inline GraphCollection parse_tudataset(const std::filesystem::path& adjacency_file,
                                       const std::filesystem::path& graph_indicator_file,
                                       const std::filesystem::path& graph_labels_file,
                                       const std::optional<std::filesystem::path>& node_labels_file =
                                           std::nullopt) {
  const std::vector<long long> indicator = detail::read_int_column(graph_indicator_file);
  const std::vector<long long> raw_labels = detail::read_int_column(graph_labels_file);
  const std::size_t num_nodes = indicator.size();
  const std::size_t num_graphs = raw_labels.size();

  // Graph membership and local ids (ascending global id order within a graph).
  std::vector<int> graph_of(num_nodes);
  std::vector<int> local_id(num_nodes);
  std::vector<int> sizes(num_graphs, 0);
  for (std::size_t i = 0; i < num_nodes; ++i) {
    const long long gid = indicator[i];
    if (gid < 1 || gid > static_cast<long long>(num_graphs)) {
      throw GraphError(graph_indicator_file.string() + ": node " + std::to_string(i + 1) +
                       " assigned to graph " + std::to_string(gid) + ", but only " +
                       std::to_string(num_graphs) + " graph labels exist");
    }
    graph_of[i] = static_cast<int>(gid - 1);
    local_id[i] = sizes[static_cast<std::size_t>(gid - 1)]++;
  }

  std::vector<std::vector<std::pair<int, int>>> edges(num_graphs);
  for (const auto& [no, line] : detail::read_lines(adjacency_file)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ParseError(adjacency_file.string(), no, "expected 'i, j', got '" + line + "'");
    }
    auto a = detail::parse_int(std::string_view(line).substr(0, comma));
    auto b = detail::parse_int(std::string_view(line).substr(comma + 1));
    if (!a || !b) throw ParseError(adjacency_file.string(), no, "expected 'i, j', got '" + line + "'");
    for (long long id : {*a, *b}) {
      if (id < 1 || id > static_cast<long long>(num_nodes)) {
        throw ParseError(adjacency_file.string(), no,
                         "node id " + std::to_string(id) + " outside [1, " +
                             std::to_string(num_nodes) + "]");
      }
    }
    const auto u = static_cast<std::size_t>(*a - 1);
    const auto v = static_cast<std::size_t>(*b - 1);
    if (graph_of[u] != graph_of[v]) {
      throw GraphError(adjacency_file.string() + ":" + std::to_string(no) + ": edge (" +
                       std::to_string(*a) + ", " + std::to_string(*b) + ") joins graph " +
                       std::to_string(graph_of[u] + 1) + " and graph " +
                       std::to_string(graph_of[v] + 1));
    }
    if (u == v) {
      throw GraphError(adjacency_file.string() + ":" + std::to_string(no) + ": self-loop at node " +
                       std::to_string(*a));
    }
    edges[static_cast<std::size_t>(graph_of[u])].emplace_back(local_id[u], local_id[v]);
  }

  // Node features.
  int feature_dim = 1;
  std::vector<int> node_code;
  if (node_labels_file) {
    const std::vector<long long> node_labels = detail::read_int_column(*node_labels_file);
    if (node_labels.size() != num_nodes) {
      throw GraphError(node_labels_file->string() + ": " + std::to_string(node_labels.size()) +
                       " node labels for " + std::to_string(num_nodes) + " nodes");
    }
    const auto codes = detail::dense_codes(node_labels);
    feature_dim = static_cast<int>(codes.size());
    node_code.reserve(num_nodes);
    for (long long l : node_labels) node_code.push_back(codes.at(l));
  }

  const auto class_codes = detail::dense_codes(raw_labels);
  GraphCollection out;
  out.num_classes = static_cast<int>(class_codes.size());
  out.feature_dim = feature_dim;
  std::vector<Mat> features(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    features[g] = node_labels_file ? Mat::Zero(sizes[g], feature_dim) : Mat::Ones(sizes[g], 1);
  }
  if (node_labels_file) {
    for (std::size_t i = 0; i < num_nodes; ++i) {
      features[static_cast<std::size_t>(graph_of[i])](local_id[i], node_code[i]) = 1.0;
    }
  }
  out.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    out.graphs.push_back(AttributedGraph::from_edges(sizes[g], edges[g], std::move(features[g]),
                                                     class_codes.at(raw_labels[g])));
  }
  return out;
}

/// Locates DS_*.txt files in `dir` (DS inferred from the single *_A.txt file)
/// and parses them.
inline GraphCollection load_tudataset_dir(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::string ds;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.size() > 6 && name.ends_with("_A.txt")) {
      if (!ds.empty()) throw std::runtime_error("multiple *_A.txt files in " + dir.string());
      ds = name.substr(0, name.size() - 6);
    }
  }
  if (ds.empty()) throw std::runtime_error("no *_A.txt file in " + dir.string());
  const fs::path node_labels = dir / (ds + "_node_labels.txt");
  GraphCollection c = parse_tudataset(
      dir / (ds + "_A.txt"), dir / (ds + "_graph_indicator.txt"), dir / (ds + "_graph_labels.txt"),
      fs::exists(node_labels) ? std::optional<fs::path>(node_labels) : std::nullopt);
  c.name = ds;
  return c;
}

/// Writes `collection` as DS_*.txt files into `dir`. One-hot features are
/// written back as node labels (argmax column); a single-column feature space is
/// treated as "no node labels".
inline void write_tudataset(const GraphCollection& collection, const std::filesystem::path& dir,
                            const std::string& ds) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::ofstream a(dir / (ds + "_A.txt"));
  std::ofstream ind(dir / (ds + "_graph_indicator.txt"));
  std::ofstream gl(dir / (ds + "_graph_labels.txt"));
  std::ofstream nl;
  const bool labeled = collection.feature_dim > 1;
  if (labeled) nl.open(dir / (ds + "_node_labels.txt"));
  if (!a || !ind || !gl || (labeled && !nl)) {
    throw std::runtime_error("cannot write dataset files into " + dir.string());
  }
  long long offset = 0;
  for (std::size_t g = 0; g < collection.graphs.size(); ++g) {
    const auto& graph = collection.graphs[g];
    for (auto [u, v] : graph.edges) {
      a << offset + u + 1 << ", " << offset + v + 1 << "\n";
      a << offset + v + 1 << ", " << offset + u + 1 << "\n";
    }
    for (int v = 0; v < graph.node_count; ++v) {
      ind << g + 1 << "\n";
      if (labeled) {
        Index col = 0;
        graph.node_features.row(v).maxCoeff(&col);
        nl << col << "\n";
      }
    }
    gl << graph.label << "\n";
    offset += graph.node_count;
  }
}

}  // namespace gqw
