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

#include "metaug/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "metaug/random.hpp"

namespace metaug::data {
namespace {

constexpr std::uint64_t kCentersTag = 1;
constexpr std::uint64_t kMapsTag = 2;
constexpr std::uint64_t kSamplesTag = 3;
constexpr std::uint64_t kSplitTag = 4;
constexpr std::uint64_t kShuffleTag = 5;
constexpr std::uint64_t kAugmentTag = 6;

std::vector<double> gaussian_vector(Rng& rng, std::size_t n, double sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = sigma * normal(rng);
  return v;
}

std::vector<std::size_t> shuffled_train(const Dataset& dataset, std::uint64_t epoch_seed) {
  std::vector<std::size_t> order = dataset.split.train;
  Rng rng(derive_seed(epoch_seed, {kShuffleTag}));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

std::vector<Tensor> views_from_rgb(const Image& rgb, ColorViews mode) {
  if (mode == ColorViews::None) return {rgb.flatten()};
  LabSplit lab = rgb_to_lab_split(rgb);
  std::vector<Tensor> views = {lab.lightness.flatten(), lab.ab.flatten()};
  if (mode == ColorViews::LabRgb) views.push_back(rgb.flatten());
  return views;
}

template <typename T>
std::vector<T> read_binary(const std::filesystem::path& path, std::size_t count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<T> out(count);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(T)));
  if (static_cast<std::size_t>(in.gcount()) != count * sizeof(T)) {
    throw std::runtime_error(path.string() + ": expected " + std::to_string(count * sizeof(T)) +
                             " bytes");
  }
  return out;
}

}  // namespace

Split make_split(const std::vector<Sample>& samples, double train_fraction, double val_fraction,
                 std::uint64_t seed) {
  if (train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction > 1.0) {
    throw std::invalid_argument("split fractions must satisfy 0 < train, 0 <= val, sum <= 1");
  }
  std::vector<std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto label = static_cast<std::size_t>(std::max(samples[i].label, 0));
    if (strata.size() <= label) strata.resize(label + 1);
    strata[label].push_back(i);
  }
  Rng rng(derive_seed(seed, {kSplitTag}));
  Split split;
  for (auto& stratum : strata) {
    std::shuffle(stratum.begin(), stratum.end(), rng);
    const auto n = static_cast<double>(stratum.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * train_fraction));
    const auto n_val = std::min(stratum.size() - n_train,
                                static_cast<std::size_t>(std::llround(n * val_fraction)));
    split.train.insert(split.train.end(), stratum.begin(), stratum.begin() + n_train);
    split.val.insert(split.val.end(), stratum.begin() + n_train,
                     stratum.begin() + n_train + n_val);
    split.test.insert(split.test.end(), stratum.begin() + n_train + n_val, stratum.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

Dataset gen_synthetic_multiview(const SyntheticConfig& config) {
  if (config.n_classes < 2) throw std::invalid_argument("n_classes must be >= 2");
  if (config.m_views < 2) throw std::invalid_argument("at least two views are required");
  if (config.noise_sigma < 0.0) throw std::invalid_argument("noise_sigma must be >= 0");
  if (config.view_dims.size() != config.m_views) {
    throw std::invalid_argument("view_dims has " + std::to_string(config.view_dims.size()) +
                                " entries for " + std::to_string(config.m_views) + " views");
  }
  if (config.latent_dim == 0 || config.n_per_class <= 0) {
    throw std::invalid_argument("latent_dim and n_per_class must be positive");
  }

  // Class centres on the unit sphere, pairwise at least 0.5 apart.
  Rng center_rng(derive_seed(config.seed, {kCentersTag}));
  std::vector<std::vector<double>> centers;
  for (int attempts = 0; static_cast<int>(centers.size()) < config.n_classes; ++attempts) {
    if (attempts > 100000) throw std::runtime_error("could not place separated class centres");
    auto c = gaussian_vector(center_rng, config.latent_dim, 1.0);
    const double norm = l2_norm(c);
    if (norm == 0.0) continue;
    for (auto& x : c) x /= norm;
    const bool separated = std::all_of(centers.begin(), centers.end(), [&](const auto& other) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < c.size(); ++k) d2 += (c[k] - other[k]) * (c[k] - other[k]);
      return std::sqrt(d2) >= 0.5;
    });
    if (separated) centers.push_back(std::move(c));
  }

  Rng map_rng(derive_seed(config.seed, {kMapsTag}));
  std::vector<Tensor> maps;
  for (std::size_t j = 0; j < config.m_views; ++j) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
    maps.emplace_back(config.latent_dim, config.view_dims[j],
                      gaussian_vector(map_rng, config.latent_dim * config.view_dims[j], scale));
  }

  Dataset ds;
  ds.n_classes = config.n_classes;
  for (std::size_t j = 0; j < config.m_views; ++j) ds.view_shapes.push_back({1, config.view_dims[j], 1});

  Rng sample_rng(derive_seed(config.seed, {kSamplesTag}));
  std::int64_t next_id = 0;
  for (int cls = 0; cls < config.n_classes; ++cls) {
    for (int k = 0; k < config.n_per_class; ++k) {
      auto latent = gaussian_vector(sample_rng, config.latent_dim, config.noise_sigma);
      for (std::size_t d = 0; d < latent.size(); ++d) latent[d] += centers[static_cast<std::size_t>(cls)][d];
      Sample s;
      s.id = next_id++;
      s.label = cls;
      const Tensor latent_row(1, config.latent_dim, latent);
      for (std::size_t j = 0; j < config.m_views; ++j) {
        Tensor view = matmul(latent_row, maps[j]);
        const auto noise = gaussian_vector(sample_rng, view.size(), config.noise_sigma);
        for (std::size_t d = 0; d < view.size(); ++d) view[d] += noise[d];
        s.views.push_back(std::move(view));
      }
      ds.samples.push_back(std::move(s));
    }
  }
  ds.split = make_split(ds.samples, config.train_fraction, config.val_fraction, config.seed);
  ds.provenance = {{"generator", "synthetic_multiview"},
                   {"seed", config.seed},
                   {"n_classes", config.n_classes},
                   {"n_per_class", config.n_per_class},
                   {"latent_dim", config.latent_dim},
                   {"m_views", config.m_views},
                   {"view_dims", config.view_dims},
                   {"noise_sigma", config.noise_sigma},
                   {"train_fraction", config.train_fraction},
                   {"val_fraction", config.val_fraction}};
  return ds;
}

Dataset load_manifest(const std::filesystem::path& manifest, const ManifestOptions& options) {
  std::ifstream in(manifest);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  const auto base = manifest.parent_path();

  const auto n = j.at("n").get<std::size_t>();
  const auto m = j.at("m_views").get<std::size_t>();
  const auto dtype = j.at("dtype").get<std::string>();
  if (dtype != "u8" && dtype != "f32") throw std::invalid_argument("unsupported dtype " + dtype);
  const auto shapes = j.at("view_shapes").get<std::vector<std::vector<std::size_t>>>();
  if (shapes.size() != m) throw std::invalid_argument("view_shapes length differs from m_views");

  std::vector<ViewShape> stored;
  std::size_t per_sample = 0;
  for (const auto& s : shapes) {
    if (s.size() != 3) throw std::invalid_argument("view shapes must be [height, width, channels]");
    stored.push_back({s[0], s[1], s[2]});
    per_sample += stored.back().size();
  }

  std::vector<double> values(n * per_sample);
  const auto tensors_path = base / j.at("tensors_path").get<std::string>();
  if (dtype == "u8") {
    const auto raw = read_binary<std::uint8_t>(tensors_path, values.size());
    for (std::size_t i = 0; i < raw.size(); ++i) values[i] = raw[i] / 255.0;
  } else {
    const auto raw = read_binary<float>(tensors_path, values.size());
    for (std::size_t i = 0; i < raw.size(); ++i) values[i] = raw[i];
  }

  Dataset ds;
  ds.has_labels = j.contains("labels_path") && !j.at("labels_path").is_null();
  std::vector<std::int32_t> labels(n, -1);
  if (ds.has_labels) {
    labels = read_binary<std::int32_t>(base / j.at("labels_path").get<std::string>(), n);
    ds.n_classes = 1 + *std::max_element(labels.begin(), labels.end());
  }

  ds.color_views = options.color_views;
  const bool split_colour = options.color_views != ColorViews::None;
  if (split_colour && (m != 1 || stored[0].channels != 3)) {
    throw std::invalid_argument("colour views need a single 3-channel stored view");
  }
  for (const auto& a : options.augmentations) ds.augmentations.push_back(parse_aug_op(a));
  if (!ds.augmentations.empty() && !(m == 1 && stored[0].channels == 3)) {
    throw std::invalid_argument("pixel augmentations need a single RGB stored view");
  }

  if (split_colour) {
    const auto& s = stored[0];
    ds.view_shapes = {{s.height, s.width, 1}, {s.height, s.width, 2}};
    if (options.color_views == ColorViews::LabRgb) ds.view_shapes.push_back(s);
  } else {
    ds.view_shapes = stored;
  }

  std::size_t offset = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.id = static_cast<std::int64_t>(i);
    s.label = labels[i];
    if (split_colour || !ds.augmentations.empty()) {
      Image img(stored[0].height, stored[0].width, 3);
      std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(offset), img.pixels.size(),
                  img.pixels.begin());
      s.views = views_from_rgb(img, options.color_views);
      s.rgb = std::move(img);
      offset += per_sample;
    } else {
      for (const auto& shape : stored) {
        std::vector<double> v(values.begin() + static_cast<std::ptrdiff_t>(offset),
                              values.begin() + static_cast<std::ptrdiff_t>(offset + shape.size()));
        s.views.emplace_back(1, shape.size(), std::move(v));
        offset += shape.size();
      }
    }
    ds.samples.push_back(std::move(s));
  }
  ds.split = make_split(ds.samples, options.train_fraction, options.val_fraction, options.seed);
  ds.provenance = {{"manifest", manifest.string()},
                   {"seed", options.seed},
                   {"color_views", static_cast<int>(options.color_views)},
                   {"augmentations", options.augmentations}};
  return ds;
}

void write_manifest(const Dataset& dataset, const std::filesystem::path& manifest) {
  const auto base = manifest.parent_path();
  const std::string stem = manifest.stem().string();
  const std::string tensors_name = stem + "_tensors.f32";
  const std::string labels_name = stem + "_labels.i32";

  std::ofstream tensors(base / tensors_name, std::ios::binary);
  for (const auto& s : dataset.samples) {
    for (const auto& v : s.views) {
      for (double x : v.values()) {
        const auto f = static_cast<float>(x);
        tensors.write(reinterpret_cast<const char*>(&f), sizeof f);
      }
    }
  }
  nlohmann::json j;
  j["n"] = dataset.size();
  j["m_views"] = dataset.m_views();
  j["dtype"] = "f32";
  j["tensors_path"] = tensors_name;
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : dataset.view_shapes) shapes.push_back({s.height, s.width, s.channels});
  j["view_shapes"] = shapes;
  if (dataset.has_labels) {
    std::ofstream labels(base / labels_name, std::ios::binary);
    for (const auto& s : dataset.samples) {
      const std::int32_t l = s.label;
      labels.write(reinterpret_cast<const char*>(&l), sizeof l);
    }
    j["labels_path"] = labels_name;
  } else {
    j["labels_path"] = nullptr;
  }
  std::ofstream(manifest) << j.dump(2) << '\n';
}

std::vector<Tensor> materialize_views(const Dataset& dataset, std::size_t index,
                                      std::uint64_t epoch_seed, const Image* mixup_partner) {
  const Sample& s = dataset.samples.at(index);
  if (!s.rgb || dataset.augmentations.empty()) return s.views;
  std::vector<AugOp> ops = dataset.augmentations;
  for (auto& op : ops) {
    if (op.kind == AugKind::Mixup) op.partner = mixup_partner ? mixup_partner : &*s.rgb;
  }
  const auto seed = derive_seed(epoch_seed, {kAugmentTag, static_cast<std::uint64_t>(s.id)});
  return views_from_rgb(augment_view(*s.rgb, ops, seed), dataset.color_views);
}

std::uint64_t ViewBatch::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto id : ids) {
    auto v = static_cast<std::uint64_t>(id);
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::size_t batches_per_epoch(const Dataset& dataset, std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  return (dataset.split.train.size() + batch_size - 1) / batch_size;
}

namespace {

ViewBatch assemble(const Dataset& dataset, const std::vector<std::size_t>& indices,
                   std::optional<std::uint64_t> epoch_seed) {
  ViewBatch batch;
  const std::size_t m = dataset.m_views();
  std::vector<std::vector<double>> stacked(m);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Sample& s = dataset.samples.at(indices[k]);
    batch.ids.push_back(s.id);
    batch.labels.push_back(s.label);
    std::vector<Tensor> views;
    if (epoch_seed) {
      const Sample& partner = dataset.samples.at(indices[(k + 1) % indices.size()]);
      views = materialize_views(dataset, indices[k], *epoch_seed,
                                partner.rgb ? &*partner.rgb : nullptr);
    } else {
      views = s.views;
    }
    for (std::size_t j = 0; j < m; ++j) {
      stacked[j].insert(stacked[j].end(), views[j].values().begin(), views[j].values().end());
    }
  }
  for (std::size_t j = 0; j < m; ++j) {
    batch.views.emplace_back(indices.size(), dataset.view_shapes[j].size(), std::move(stacked[j]));
  }
  return batch;
}

}  // namespace

std::optional<ViewBatch> next_batch(const Dataset& dataset, std::size_t t, std::size_t batch_size,
                                    std::uint64_t epoch_seed) {
  const std::size_t n_train = dataset.split.train.size();
  if (batch_size == 0 || batch_size > n_train) {
    throw std::invalid_argument("batch size " + std::to_string(batch_size) +
                                " must be in [1, train size " + std::to_string(n_train) + "]");
  }
  const std::size_t begin = t * batch_size;
  if (begin >= n_train) return std::nullopt;
  const auto order = shuffled_train(dataset, epoch_seed);
  const std::size_t end = std::min(begin + batch_size, n_train);
  const std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
  return assemble(dataset, indices, epoch_seed);
}

ViewBatch gather_batch(const Dataset& dataset, const std::vector<std::size_t>& indices) {
  return assemble(dataset, indices, std::nullopt);
}

}  // namespace metaug::data
