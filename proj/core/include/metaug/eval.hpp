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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaug/data.hpp"
#include "metaug/model.hpp"

namespace metaug::eval {

enum class FeatureSource { Representation, Projected, ProjectedPlusAugmented };

/// "h", "z", "z+aug"
std::string to_string(FeatureSource s);
FeatureSource feature_source_from_string(const std::string& s);

/// Per-view features of the chosen source for `indices`, concatenated
/// column-wise. ProjectedPlusAugmented appends every view's z-hat after the z
/// blocks. Parameters are only read.
Tensor extract_features(const model::ParamGroup& params, const data::Dataset& dataset,
                        std::span<const std::size_t> indices, FeatureSource source);

struct ProbeConfig {
  std::size_t steps = 500;
  double lr = 0.1;
};

struct ProbeReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<std::size_t> per_class_count;  // test samples per class
  FeatureSource source = FeatureSource::Representation;
  ProbeConfig config;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Softmax regression trained by full-batch gradient descent on features
/// standardized with train statistics; accuracy on the test rows.
ProbeReport fit_linear_probe(const Tensor& train_x, std::span<const int> train_y,
                             const Tensor& test_x, std::span<const int> test_y, int n_classes,
                             const ProbeConfig& config = {});

/// Frozen-network probe: train split to fit, test split to score. Throws
/// std::invalid_argument on a label-free dataset.
ProbeReport linear_probe(const model::ParamGroup& params, const data::Dataset& dataset,
                         FeatureSource source, const ProbeConfig& config = {});

enum class Population { OriginalsOnly, AugmentedVsOriginal };
std::string to_string(Population p);
Population population_from_string(const std::string& s);

struct HistogramConfig {
  std::size_t bins = 50;
  std::size_t max_diff_pairs = 100000;
  std::uint64_t seed = 0;
};

struct HistogramReport {
  std::vector<double> edges;  // bins + 1 edges over [0, 1]
  std::vector<std::size_t> count_same;
  std::vector<std::size_t> count_diff;
  Population population = Population::OriginalsOnly;
  std::size_t n_same = 0;
  std::size_t n_diff = 0;
  double mean_same = 0.0;
  double mean_diff = 0.0;
};

/// Histograms of d over same-sample and different-sample pairs. `z` holds the
/// per-view unit features (n x f). For AugmentedVsOriginal, pairs are
/// z_i^j vs zhat_i'^j (same view); otherwise z_i^j vs z_i'^j' for j < j'.
/// All same-sample pairs are used; different-sample pairs are
/// subsampled without replacement to at most `max_diff_pairs`.
HistogramReport histogram_from_features(const std::vector<Tensor>& z,
                                        const std::vector<Tensor>& zhat, Population population,
                                        const HistogramConfig& config = {});

/// Histograms over the test split (the whole dataset when it has no test split).
HistogramReport similarity_histograms(const model::ParamGroup& params,
                                      const data::Dataset& dataset, Population population,
                                      const HistogramConfig& config = {});

struct CollapseReport {
  double mean_pairwise_sim = 0.0;
  std::vector<double> per_dim_std;
  double effective_rank = 1.0;
};

/// Mean d over distinct rows (rows normalized first), population std per
/// column, and exp(entropy) of the normalized singular values of the centered
/// matrix (1 for a zero matrix). Throws std::invalid_argument for < 2 rows.
CollapseReport collapse_metrics(const Tensor& features);

struct EvalReport {
  std::string name;
  std::optional<ProbeReport> probe;
  std::optional<CollapseReport> collapse;
  std::optional<HistogramReport> histogram;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

enum class ExportFormat { Json, Csv, HistogramCsv };

/// Json: {"reports": [...]}. Csv: "report,metric,value" rows. HistogramCsv:
/// "report,bin_left,bin_right,count_same,count_diff" rows. Throws
/// std::runtime_error naming the path when it cannot be written.
void export_reports(std::span<const EvalReport> reports, const std::filesystem::path& path,
                    ExportFormat format);
std::vector<EvalReport> import_reports_json(const std::filesystem::path& path);

}  // namespace metaug::eval
