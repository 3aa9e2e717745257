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

// Small fixture graphs shared by the unit tests.

#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "gqw/graph.hpp"

namespace gqw::testing {

inline AttributedGraph make_graph(int n, std::vector<std::pair<int, int>> edges, int feature_dim = 1,
                                  int label = 0) {
  Mat x = Mat::Ones(n, feature_dim);
  return AttributedGraph::from_edges(n, std::move(edges), std::move(x), label);
}

inline AttributedGraph k2() { return make_graph(2, {{0, 1}}); }
inline AttributedGraph triangle() { return make_graph(3, {{0, 1}, {1, 2}, {0, 2}}); }
inline AttributedGraph path3() { return make_graph(3, {{0, 1}, {1, 2}}); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gqw_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

}  // namespace gqw::testing
