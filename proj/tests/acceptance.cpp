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

// Acceptance run: one PASS/FAIL line per criterion, AC1..AC9.
// Usage: acceptance [REPORT_DIR]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "gqw/invariants.hpp"
#include "gqw/synthetic.hpp"
#include "gqw/train.hpp"
#include "gqw/tudataset.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string summary;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// Folds several property results into one line; a positive `budget` bounds
// their total time.
Outcome combine(const std::vector<gqw::PropertyResult>& rs, double budget = 0.0) {
  Outcome o{true, ""};
  double total = 0.0;
  for (const auto& r : rs) {
    o.passed = o.passed && r.passed;
    total += r.seconds;
    if (!o.summary.empty()) o.summary += "; ";
    o.summary += r.name + " worst=" + fmt("%.2e", r.worst) + (r.passed ? "" : " (over tol)");
  }
  if (budget > 0.0) {
    o.summary += "; " + fmt("%.2fs of %.0fs", total, budget);
    o.passed = o.passed && total <= budget;
  } else {
    o.summary += "; " + fmt("%.2fs", total);
  }
  return o;
}

// Small model for the synthetic studies.
gqw::TrainConfig study_config() {
  gqw::TrainConfig t;
  t.base_lr = 1e-3;
  t.epochs = 20;
  t.batch_size = 8;
  t.num_blocks = 2;
  t.model_dim = 16;
  t.recur_dim = 16;
  t.coin_dim = 8;
  t.folds = 5;
  return t;
}

void save(const fs::path& dir, const std::string& name, const nlohmann::json& j) {
  if (dir.empty()) return;
  fs::create_directories(dir);
  std::ofstream(dir / name) << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path report_dir = argc > 1 ? fs::path(argv[1]) : fs::path();
  const std::uint64_t seed = 20260101;
  const int threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  const gqw::GraphCollection synthetic = gqw::make_synthetic_feature_dataset(40, 8, 0);

  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;

  criteria.emplace_back("AC1 oracle equivalence", [&] {
    return combine({gqw::check_oracle_equivalence(200, seed + 1, 1e-10)}, 60.0);
  });

  criteria.emplace_back("AC2 unitarity and conservation", [&] {
    return combine({gqw::check_coin_unitarity(200, seed + 2, 1e-10),
                    gqw::check_norm_conservation(200, seed + 3, 1e-10),
                    gqw::check_row_stochastic(200, seed + 4, 1e-9),
                    gqw::check_shift_involution(200, seed + 5)},
                   30.0);
  });

  criteria.emplace_back("AC3 gradient fidelity", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto rs = gqw::check_gradients(seed + 6, 1e-4, 1e-5);
    Outcome o{true, ""};
    double worst = 0.0;
    for (const auto& r : rs) {
      o.passed = o.passed && r.passed;
      worst = std::max(worst, r.worst);
      if (!r.passed) o.summary += r.name + " rel.err=" + fmt("%.2e", r.worst) + "; ";
    }
    const double secs = seconds_since(t0);
    o.passed = o.passed && secs <= 120.0;
    o.summary += std::to_string(rs.size()) + " tensors, worst rel.err=" + fmt("%.2e", worst) +
                 "; " + fmt("%.2fs of 120s", secs);
    return o;
  });

  criteria.emplace_back("AC4 permutation symmetry", [&] {
    return combine({gqw::check_logit_invariance(20, 5, seed + 7, 1e-8),
                    gqw::check_walk_equivariance(20, 5, seed + 8, 1e-10)});
  });

  criteria.emplace_back("AC5 attribute-aware coins separate classes", [&] {
    const gqw::FeatureSensitivity fsens = gqw::measure_feature_sensitivity(synthetic, 4, seed + 9);
    const bool ok = fsens.vanilla_max_diff == 0.0 && fsens.aware_min_diff > 1e-6;
    return Outcome{ok, fmt("vanilla max diff=%.2e (must be 0); aware min diff=%.2e (must exceed 1e-06)",
                           fsens.vanilla_max_diff, fsens.aware_min_diff)};
  });

  criteria.emplace_back("AC6 zero bias reduces to plain attention", [&] {
    return combine({gqw::check_bias_free_reduction(200, seed + 10, 1e-12)});
  });

  criteria.emplace_back("AC7 MUTAG 10-fold accuracy", [&] {
    gqw::TrainConfig cfg;
    cfg.threads = threads;
    const gqw::GraphCollection mutag = gqw::load_tudataset_dir(fs::path(GQW_DATA_DIR) / "MUTAG");
    const auto t0 = std::chrono::steady_clock::now();
    const gqw::CrossValidationReport r = gqw::cross_validate(mutag, cfg, [&](const gqw::FoldResult& f) {
      std::fprintf(stderr, "  AC7 fold %d: %.4f (%d/%d) %.0fs\n", f.fold_id, f.test_accuracy, f.correct,
                   f.total, f.wall_time);
    });
    const double secs = seconds_since(t0);
    save(report_dir, "mutag_report.json", r.to_json());
    return Outcome{r.mean >= 0.75 && secs <= 45.0 * 60.0,
                   fmt("mean=%.4f std=%.4f (need >= 0.75); ", r.mean, r.std) +
                       fmt("%.0fs of 2700s on %.0f thread(s)", secs, threads)};
  });

  criteria.emplace_back("AC8 walk-length sweep", [&] {
    const std::vector<int> lengths = {3, 4, 5, 6, 7, 8};
    const auto rows = gqw::walk_length_sweep(synthetic, study_config(), lengths);
    save(report_dir, "sweep.json", gqw::sweep_to_json(synthetic.name, rows));
    std::string table;
    for (const auto& r : rows) table += "T=" + std::to_string(r.walk_length) + ":" + fmt("%.3f ", r.mean);
    return Outcome{rows.size() == lengths.size(), table + "(informational)"};
  });

  criteria.emplace_back("AC9 ablation harness", [&] {
    const gqw::AblationReport r = gqw::run_ablation(synthetic, study_config());
    save(report_dir, "ablation.json", r.to_json());
    std::string table;
    for (const auto& row : r.rows) table += row.name + "=" + fmt("%.3f ", row.mean);
    return Outcome{r.rows.size() == 4, std::to_string(r.rows.size()) + " rows: " + table};
  });

  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = Outcome{false, std::string("exception: ") + e.what()};
    }
    if (!o.passed) ++failures;
    std::printf("%s %s: %s\n", o.passed ? "PASS" : "FAIL", name.c_str(), o.summary.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
