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
#include <span>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "metaug/data.hpp"
#include "metaug/eval.hpp"
#include "metaug/trainer.hpp"

namespace metaug::cli {

/// Invalid or unknown configuration (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required file is missing from a run directory (exit code 3).
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataSpec {
  std::string kind = "synthetic";  // "synthetic" | "manifest"
  data::SyntheticConfig synthetic;
  std::string manifest;
  data::ManifestOptions manifest_options;
};

struct EvalSpec {
  eval::FeatureSource source = eval::FeatureSource::Representation;
  eval::ProbeConfig probe;
  eval::HistogramConfig histogram;
};

/// Everything a run needs. Training fields sit at the top level of the JSON
/// file, next to "data", "eval", "output_dir" and "run_name".
struct RunConfig {
  train::TrainConfig train;
  DataSpec data;
  EvalSpec eval;
  std::string output_dir = "runs";
  std::string run_name;  // empty: "run_seed<seed>"

  std::string resolved_run_name() const;
};

nlohmann::json to_json(const RunConfig& config);

/// Throws ConfigError naming the first unknown or malformed key.
RunConfig run_config_from_json(const nlohmann::json& j);

/// Sets a dotted path such as "model.rep_dim" or "data.synthetic.seed".
/// The path must already exist in `config`. The value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& path, const nlohmann::json& value);
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Defaults, then the file (if any), then each "key=value" override.
nlohmann::json resolve_config_json(const std::optional<std::filesystem::path>& file,
                                   std::span<const std::string> overrides);
RunConfig load_run_config(const std::optional<std::filesystem::path>& file,
                          std::span<const std::string> overrides);

data::Dataset build_dataset(const DataSpec& spec);

}  // namespace metaug::cli
