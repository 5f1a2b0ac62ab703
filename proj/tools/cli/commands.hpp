// Copyright 2026 The metaug Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaug/eval.hpp"
#include "metaug/trainer.hpp"
#include "run_config.hpp"

namespace metaug::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitMissing = 3;
inline constexpr int kExitDivergence = 4;

/// Runs `fn`, mapping ConfigError, MissingArtifact and DivergenceError to
/// their exit codes (messages go to `err`). Other exceptions give 1.
int guarded(std::ostream& err, const std::function<int()>& fn);

/// Trains into `run_dir`: resolved_config.json, metrics.jsonl, checkpoints.
/// Throws train::DivergenceError on divergence.
train::TrainResult run_training(const RunConfig& config, const std::filesystem::path& run_dir);

/// Probe, collapse metrics and both similarity histograms for the final
/// checkpoint of `run_dir`. Writes eval_<tag>.json, eval_<tag>.csv and
/// eval_<tag>_histograms.csv (tag: h, z, zaug). Throws MissingArtifact.
std::vector<eval::EvalReport> run_eval(const std::filesystem::path& run_dir,
                                       std::optional<eval::FeatureSource> source);

/// Ordered parameter names with their value lists.
struct Grid {
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  std::size_t cells() const;
};

/// {"alpha": [..], "beta": [..]} in file order.
Grid grid_from_json(const nlohmann::json& j);
/// "name=v1,v2,..." (values parsed as JSON where possible).
std::pair<std::string, std::vector<nlohmann::json>> grid_axis_from_string(const std::string& text);

/// Worker count from METAUG_WORKERS (defaults to the hardware concurrency).
std::size_t sweep_workers();

/// Trains and evaluates every cell under `out_dir/cell_XXXX`, then writes
/// `out_dir/sweep.csv` aggregated from the cell directories. Unknown
/// parameter names throw ConfigError before any run starts.
std::filesystem::path run_sweep(const nlohmann::json& base_config, const Grid& grid,
                                const std::filesystem::path& out_dir, std::size_t workers,
                                std::ostream& log);

inline const std::vector<std::string> kCompareMethods = {"metaug", "metaug_oucl_only",
                                                         "metaug_mag_only", "infonce"};

/// Loss and MAG switches for one compared method. Throws ConfigError.
void apply_method(nlohmann::json& config, const std::string& method);

struct CompareRow {
  std::string method;
  std::uint64_t seed = 0;
  double probe_accuracy = 0.0;
  std::uint64_t batch_sequence_hash = 0;  // over regular-step batch hashes
  std::string status;                     // "ok" | "diverged"
};

/// Every method on every seed with shared data and batches. Writes
/// compare.csv (per run) and compare_summary.csv (mean per method).
std::vector<CompareRow> run_compare(const nlohmann::json& base_config,
                                    const std::vector<std::string>& methods,
                                    const std::vector<std::uint64_t>& seeds,
                                    const std::filesystem::path& out_dir, std::ostream& log);

/// Command-line entry point shared by the executable and the tests.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace metaug::cli
