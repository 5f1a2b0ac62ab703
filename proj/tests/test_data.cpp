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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "gradcheck.hpp"
#include "metaug/data.hpp"
#include "metaug/image.hpp"
#include "oracles.hpp"

namespace metaug::data {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("metaug_test_data_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Image random_image(Rng& rng, std::size_t h, std::size_t w, std::size_t c) {
  Image img(h, w, c);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.pixels) v = u(rng);
  return img;
}

// ---- synthetic generator ---------------------------------------------------

TEST(Synthetic, DefaultShapeAndLabels) {
  const auto ds = gen_synthetic_multiview({});
  EXPECT_EQ(ds.size(), 400u);
  EXPECT_EQ(ds.m_views(), 2u);
  EXPECT_EQ(ds.n_classes, 4);
  std::vector<int> counts(4, 0);
  for (const auto& s : ds.samples) {
    ASSERT_EQ(s.views.size(), 2u);
    EXPECT_EQ(s.views[0].shape(), (Shape{1, 16}));
    ++counts[static_cast<std::size_t>(s.label)];
  }
  for (int c : counts) EXPECT_EQ(c, 100);
}

TEST(Synthetic, SameSeedIsByteIdentical) {
  const auto a = gen_synthetic_multiview({});
  const auto b = gen_synthetic_multiview({});
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].views, b.samples[i].views);
    EXPECT_EQ(a.samples[i].label, b.samples[i].label);
  }
  EXPECT_EQ(a.split.train, b.split.train);
  SyntheticConfig other;
  other.seed = 1;
  EXPECT_NE(gen_synthetic_multiview(other).samples[0].views, a.samples[0].views);
}

TEST(Synthetic, ZeroNoiseGivesIdenticalViewsWithinAClass) {
  SyntheticConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.n_per_class = 5;
  const auto ds = gen_synthetic_multiview(cfg);
  for (const auto& a : ds.samples)
    for (const auto& b : ds.samples)
      if (a.label == b.label) EXPECT_EQ(a.views, b.views);
}

TEST(Synthetic, RejectsBadConfigs) {
  SyntheticConfig cfg;
  cfg.view_dims = {16};
  EXPECT_THROW(gen_synthetic_multiview(cfg), std::invalid_argument);
  cfg = {};
  cfg.n_classes = 1;
  EXPECT_THROW(gen_synthetic_multiview(cfg), std::invalid_argument);
  cfg = {};
  cfg.noise_sigma = -1;
  EXPECT_THROW(gen_synthetic_multiview(cfg), std::invalid_argument);
}

TEST(Synthetic, SplitIsAStratifiedPartition) {
  const auto ds = gen_synthetic_multiview({});
  std::set<std::size_t> seen;
  for (const auto* part : {&ds.split.train, &ds.split.val, &ds.split.test})
    for (auto i : *part) EXPECT_TRUE(seen.insert(i).second);
  EXPECT_EQ(seen.size(), ds.size());
  EXPECT_EQ(ds.split.train.size(), 280u);
  std::vector<int> per_class(4, 0);
  for (auto i : ds.split.train) ++per_class[static_cast<std::size_t>(ds.samples[i].label)];
  for (int c : per_class) EXPECT_EQ(c, 70);
}

TEST(Synthetic, DefaultDifficultyIsLinearlySeparable) {
  const auto ds = gen_synthetic_multiview({});
  const double acc = testing::logistic_oracle_accuracy(
      testing::raw_features(ds, ds.split.train), testing::labels_of(ds, ds.split.train),
      testing::raw_features(ds, ds.split.test), testing::labels_of(ds, ds.split.test), 4);
  EXPECT_GE(acc, 0.95);
}

// ---- colour ------------------------------------------------------------------

// sRGB -> Lab for a grey level, written out directly from the colorimetry
// definitions (for grey, X/Xn = Y/Yn = Z/Zn so a = b = 0).
double grey_lightness(double v) {
  const double lin = v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
  const double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
  return lin > eps ? 116.0 * std::cbrt(lin) - 16.0 : kappa * lin;
}

TEST(Colour, BlackAndWhiteExtremes) {
  Image black(2, 2, 3, 0.0), white(2, 2, 3, 1.0);
  const auto lb = rgb_to_lab_split(black);
  const auto lw = rgb_to_lab_split(white);
  for (double v : lb.lightness.pixels) EXPECT_NEAR(v, -1.0, 1e-12);
  for (double v : lb.ab.pixels) EXPECT_NEAR(v, 0.0, 1e-12);
  for (double v : lw.lightness.pixels) EXPECT_NEAR(v, 1.0, 1e-6);
  for (double v : lw.ab.pixels) EXPECT_NEAR(v, 0.0, 1e-4);
}

TEST(Colour, MidGreyMatchesReference) {
  const double reference = grey_lightness(0.5);
  EXPECT_NEAR(reference, 53.38896474111432, 1e-9);
  const auto lab = srgb_to_lab(0.5, 0.5, 0.5);
  EXPECT_NEAR(lab.l, reference, 1e-6);
  Image grey(1, 1, 3, 0.5);
  const auto split = rgb_to_lab_split(grey);
  EXPECT_NEAR(split.lightness.pixels[0], reference / 50.0 - 1.0, 1e-8);
  EXPECT_NEAR(split.lightness.pixels[0], 0.0677792948222864, 1e-8);
  EXPECT_NEAR(split.ab.pixels[0], 0.0, 1e-9);
  EXPECT_NEAR(split.ab.pixels[1], 0.0, 1e-9);
}

TEST(Colour, RoundTripWithinTolerance) {
  Rng rng(4);
  const Image img = random_image(rng, 6, 5, 3);
  const Image back = lab_split_to_rgb(rgb_to_lab_split(img));
  ASSERT_EQ(back.pixels.size(), img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) EXPECT_NEAR(back.pixels[i], img.pixels[i], 1e-3);
}

TEST(Colour, RejectsBadInput) {
  Image bad(1, 1, 3, 0.5);
  bad.pixels[0] = 1.5;
  EXPECT_THROW(rgb_to_lab_split(bad), std::invalid_argument);
  EXPECT_THROW(rgb_to_lab_split(Image(2, 2, 1, 0.5)), std::invalid_argument);
}

// ---- augmentation --------------------------------------------------------------

TEST(Augment, FlipTwiceIsIdentity) {
  Rng rng(1);
  const Image img = random_image(rng, 4, 5, 3);
  const std::vector<AugOp> flip = {horizontal_flip()};
  EXPECT_EQ(augment_view(augment_view(img, flip, 3), flip, 3), img);
  const std::vector<AugOp> twice = {horizontal_flip(), horizontal_flip()};
  EXPECT_EQ(augment_view(img, twice, 3), img);
  EXPECT_NE(augment_view(img, flip, 3), img);
}

TEST(Augment, FourRotationsAreIdentity) {
  Rng rng(2);
  const Image img = random_image(rng, 4, 4, 1);
  const std::vector<AugOp> ops(4, rotate90());
  EXPECT_EQ(augment_view(img, ops, 0), img);
  const std::vector<AugOp> one = {rotate90()};
  EXPECT_THROW(augment_view(random_image(rng, 3, 4, 1), one, 0), std::invalid_argument);
}

TEST(Augment, MixupAtOneIsIdentity) {
  Rng rng(3);
  const Image img = random_image(rng, 3, 3, 3);
  const Image partner = random_image(rng, 3, 3, 3);
  const std::vector<AugOp> ops = {mixup(1.0, &partner)};
  EXPECT_EQ(augment_view(img, ops, 5), img);
  const std::vector<AugOp> orphan = {mixup(0.5)};
  EXPECT_THROW(augment_view(img, orphan, 5), std::invalid_argument);
}

TEST(Augment, CropWithoutPaddingIsIdentityAndCropIsSeeded) {
  Rng rng(4);
  const Image img = random_image(rng, 6, 6, 3);
  const std::vector<AugOp> none = {random_crop(0)};
  EXPECT_EQ(augment_view(img, none, 9), img);
  const std::vector<AugOp> pad = {random_crop(2)};
  EXPECT_EQ(augment_view(img, pad, 9), augment_view(img, pad, 9));
}

TEST(Augment, ColourOpsRejectSingleChannel) {
  const Image grey(3, 3, 1, 0.5);
  const std::vector<AugOp> jitter = {color_jitter(0.4)};
  const std::vector<AugOp> to_grey = {random_grey(1.0)};
  EXPECT_THROW(augment_view(grey, jitter, 0), std::invalid_argument);
  EXPECT_THROW(augment_view(grey, to_grey, 0), std::invalid_argument);
}

TEST(Augment, JitterOnConstantImageReplaysTheSeededStream) {
  const double rgb[3] = {0.3, 0.5, 0.6};
  Image img(3, 4, 3);
  for (std::size_t p = 0; p < 12; ++p)
    for (std::size_t c = 0; c < 3; ++c) img.pixels[p * 3 + c] = rgb[c];

  Rng replay(7);
  std::uniform_real_distribution<double> u(0.6, 1.4);
  const double brightness = u(replay), contrast = u(replay), saturation = u(replay);
  double v[3];
  for (int c = 0; c < 3; ++c) v[c] = rgb[c] * brightness;
  const double grey = 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
  for (double& x : v) x = (x - grey) * contrast + grey;
  const double grey2 = 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
  for (double& x : v) x = std::clamp(grey2 + (x - grey2) * saturation, 0.0, 1.0);

  const std::vector<AugOp> ops = {color_jitter(0.4)};
  const Image out = augment_view(img, ops, 7);
  for (std::size_t p = 0; p < 12; ++p)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.pixels[p * 3 + c], v[c], 1e-12);
}

TEST(Augment, ParseRoundTrip) {
  for (std::string s : {"horizontal_flip(0.5)", "rotate90", "random_crop(4)", "random_grey(0.2)",
                        "color_jitter(0.4)", "mixup(0.7)"}) {
    EXPECT_EQ(to_string(parse_aug_op(s)), s);
  }
  EXPECT_THROW(parse_aug_op("sharpen"), std::invalid_argument);
  EXPECT_THROW(parse_aug_op("random_crop(x)"), std::invalid_argument);
}

// ---- batching ------------------------------------------------------------------

TEST(Batching, FullBatchHoldsEveryTrainIdOnce) {
  const auto ds = gen_synthetic_multiview({});
  const std::size_t n = ds.split.train.size();
  auto batch = next_batch(ds, 0, n, 42);
  ASSERT_TRUE(batch);
  std::set<std::int64_t> ids(batch->ids.begin(), batch->ids.end());
  EXPECT_EQ(ids.size(), n);
  for (auto i : ds.split.train) EXPECT_TRUE(ids.count(ds.samples[i].id));
  EXPECT_FALSE(next_batch(ds, 1, n, 42));
}

TEST(Batching, EpochIsAPartitionWithConsistentViews) {
  const auto ds = gen_synthetic_multiview({});
  std::multiset<std::int64_t> ids;
  std::size_t t = 0;
  while (auto b = next_batch(ds, t++, 64, 5)) {
    ASSERT_EQ(b->m_views(), 2u);
    for (const auto& v : b->views) EXPECT_EQ(v.rows(), b->size());
    EXPECT_EQ(b->labels.size(), b->size());
    ids.insert(b->ids.begin(), b->ids.end());
  }
  EXPECT_EQ(t - 1, batches_per_epoch(ds, 64));
  EXPECT_EQ(ids.size(), ds.split.train.size());
  EXPECT_EQ(std::set<std::int64_t>(ids.begin(), ids.end()).size(), ids.size());
}

TEST(Batching, FixedSeedGivesIdenticalSequence) {
  const auto ds = gen_synthetic_multiview({});
  for (std::size_t t = 0; t < 5; ++t) {
    auto a = next_batch(ds, t, 64, 11);
    auto b = next_batch(ds, t, 64, 11);
    EXPECT_EQ(a->ids, b->ids);
    EXPECT_EQ(a->views, b->views);
    EXPECT_EQ(a->hash(), b->hash());
  }
  EXPECT_NE(next_batch(ds, 0, 64, 11)->hash(), next_batch(ds, 0, 64, 12)->hash());
}

TEST(Batching, RejectsBadBatchSize) {
  const auto ds = gen_synthetic_multiview({});
  EXPECT_THROW(next_batch(ds, 0, 0, 1), std::invalid_argument);
  EXPECT_THROW(next_batch(ds, 0, ds.split.train.size() + 1, 1), std::invalid_argument);
}

// ---- manifests -------------------------------------------------------------------

TEST(Manifest, RoundTripPreservesViewsAndLabels) {
  SyntheticConfig cfg;
  cfg.n_per_class = 10;
  const auto ds = gen_synthetic_multiview(cfg);
  const auto dir = scratch_dir("roundtrip");
  write_manifest(ds, dir / "m.json");
  const auto back = load_manifest(dir / "m.json");
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_TRUE(back.has_labels);
  EXPECT_EQ(back.view_shapes, ds.view_shapes);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back.samples[i].label, ds.samples[i].label);
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_LT(relative_error(back.samples[i].views[j], ds.samples[i].views[j]), 1e-6);
    }
  }
}

TEST(Manifest, NullLabelsGiveLabelFreeDataset) {
  SyntheticConfig cfg;
  cfg.n_per_class = 5;
  const auto dir = scratch_dir("nolabels");
  write_manifest(gen_synthetic_multiview(cfg), dir / "m.json");
  nlohmann::json j;
  std::ifstream(dir / "m.json") >> j;
  j["labels_path"] = nullptr;
  std::ofstream(dir / "m.json") << j.dump();
  EXPECT_FALSE(load_manifest(dir / "m.json").has_labels);
}

TEST(Manifest, RgbImagesSplitIntoLabViewsAndAugmentPerEpoch) {
  const auto dir = scratch_dir("rgb");
  const std::size_t n = 6;
  Rng rng(8);
  std::vector<std::uint8_t> bytes(n * 4 * 4 * 3);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng() % 256);
  std::ofstream(dir / "x.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  std::vector<std::int32_t> labels = {0, 1, 0, 1, 0, 1};
  std::ofstream(dir / "y.bin", std::ios::binary)
      .write(reinterpret_cast<const char*>(labels.data()), static_cast<std::streamsize>(labels.size() * 4));
  nlohmann::json j = {{"n", n},          {"m_views", 1},         {"view_shapes", {{4, 4, 3}}},
                      {"dtype", "u8"},   {"labels_path", "y.bin"}, {"tensors_path", "x.bin"}};
  std::ofstream(dir / "m.json") << j.dump();

  ManifestOptions opts;
  opts.color_views = ColorViews::Lab;
  const auto lab = load_manifest(dir / "m.json", opts);
  ASSERT_EQ(lab.m_views(), 2u);
  EXPECT_EQ(lab.view_shapes[0], (ViewShape{4, 4, 1}));
  EXPECT_EQ(lab.view_shapes[1], (ViewShape{4, 4, 2}));
  EXPECT_NEAR(lab.samples[0].rgb->pixels[0], bytes[0] / 255.0, 1e-12);

  opts.augmentations = {"horizontal_flip(0.5)", "random_crop(1)"};
  const auto aug = load_manifest(dir / "m.json", opts);
  EXPECT_EQ(materialize_views(aug, 0, 1, nullptr), materialize_views(aug, 0, 1, nullptr));
  bool differs = false;
  for (std::uint64_t e = 2; e < 10 && !differs; ++e) {
    differs = materialize_views(aug, 0, e, nullptr) != materialize_views(aug, 0, 1, nullptr);
  }
  EXPECT_TRUE(differs);

  opts = {};
  opts.augmentations = {"color_jitter(0.4)"};
  j["view_shapes"] = {{4, 4, 3}};
  EXPECT_NO_THROW(load_manifest(dir / "m.json", opts));
}

TEST(Manifest, MissingFileIsAnError) {
  EXPECT_THROW(load_manifest("/nonexistent/m.json"), std::runtime_error);
}

}  // namespace
}  // namespace metaug::data
