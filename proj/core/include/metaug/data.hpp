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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "metaug/image.hpp"
#include "metaug/tensor.hpp"

namespace metaug::data {

/// Per-view layout. Vector views use height = channels = 1.
struct ViewShape {
  std::size_t height = 1;
  std::size_t width = 0;
  std::size_t channels = 1;

  std::size_t size() const { return height * width * channels; }
  bool is_image() const { return height > 1; }
  friend bool operator==(const ViewShape&, const ViewShape&) = default;
};

struct Sample {
  std::int64_t id = 0;
  int label = -1;
  std::vector<Tensor> views;  // M rows of shape 1 x view_dim
  /// Source RGB image when views are derived on the fly (colour split + augmentation).
  std::optional<Image> rgb;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// How a 3-channel source image is turned into views.
enum class ColorViews { None, Lab, LabRgb };

struct Dataset {
  std::vector<Sample> samples;
  std::vector<ViewShape> view_shapes;
  Split split;
  int n_classes = 0;
  bool has_labels = true;
  ColorViews color_views = ColorViews::None;
  std::vector<AugOp> augmentations;  // applied to `rgb` per batch when non-empty
  nlohmann::json provenance;

  std::size_t size() const { return samples.size(); }
  std::size_t m_views() const { return view_shapes.size(); }
};

struct SyntheticConfig {
  std::uint64_t seed = 0;
  int n_classes = 4;
  int n_per_class = 100;
  std::size_t latent_dim = 8;
  std::size_t m_views = 2;
  std::vector<std::size_t> view_dims = {16, 16};
  double noise_sigma = 0.05;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
};

/// Gaussian clusters on the unit sphere in a latent space, observed through a
/// fixed random linear map per view plus per-view Gaussian noise.
Dataset gen_synthetic_multiview(const SyntheticConfig& config);

/// Stratified shuffled split; with no labels the whole id range is one stratum.
Split make_split(const std::vector<Sample>& samples, double train_fraction, double val_fraction,
                 std::uint64_t seed);

struct ManifestOptions {
  ColorViews color_views = ColorViews::None;
  std::vector<std::string> augmentations;
  std::uint64_t seed = 0;
  double train_fraction = 0.7;
  double val_fraction = 0.1;
};

/// Reads a JSON manifest {n, m_views, view_shapes, labels_path, tensors_path,
/// dtype: "u8"|"f32"}. Tensors are row-major little-endian, sample-major then
/// view-major. u8 values are scaled to [0, 1]. A null labels_path gives a
/// label-free dataset.
Dataset load_manifest(const std::filesystem::path& manifest, const ManifestOptions& options = {});

/// Writes `dataset` as a manifest plus f32 tensors and i32 labels next to it.
void write_manifest(const Dataset& dataset, const std::filesystem::path& manifest);

/// Views of one sample for the given epoch seed (identity unless the dataset
/// carries an RGB source with colour splitting or augmentations).
std::vector<Tensor> materialize_views(const Dataset& dataset, std::size_t index,
                                      std::uint64_t epoch_seed, const Image* mixup_partner);

struct ViewBatch {
  std::vector<std::int64_t> ids;
  std::vector<int> labels;
  std::vector<Tensor> views;  // M tensors of shape n x view_dim

  std::size_t size() const { return ids.size(); }
  std::size_t m_views() const { return views.size(); }
  /// FNV-1a over the sample ids, used to compare batch sequences across runs.
  std::uint64_t hash() const;
};

/// Number of minibatches per epoch over the train split.
std::size_t batches_per_epoch(const Dataset& dataset, std::size_t batch_size);

/// The t-th minibatch (0-based) of the epoch shuffled by `epoch_seed`, or
/// nullopt once the epoch is exhausted. The final batch may be smaller.
std::optional<ViewBatch> next_batch(const Dataset& dataset, std::size_t t,
                                    std::size_t batch_size, std::uint64_t epoch_seed);

/// All samples of `indices` stacked per view (no shuffling, no augmentation).
ViewBatch gather_batch(const Dataset& dataset, const std::vector<std::size_t>& indices);

}  // namespace metaug::data
