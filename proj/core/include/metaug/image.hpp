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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metaug/tensor.hpp"

namespace metaug::data {

/// Height x width x channels, stored row-major (HWC).
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, std::size_t c, double fill = 0.0)
      : height(h), width(w), channels(c), pixels(h * w * c, fill) {}

  double& at(std::size_t y, std::size_t x, std::size_t c) {
    return pixels[(y * width + x) * channels + c];
  }
  double at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }

  /// The image as a single 1 x (H*W*C) row.
  Tensor flatten() const;

  friend bool operator==(const Image&, const Image&) = default;
};

// ---- colour space -----------------------------------------------------------

struct LabSplit {
  Image lightness;  // H x W x 1, L/50 - 1
  Image ab;         // H x W x 2, a/128 and b/128
};

/// sRGB (D65) -> CIELAB, split into the L channel and the ab channels, each
/// rescaled into [-1, 1]. Throws std::invalid_argument for values outside [0, 1]
/// or for images without exactly three channels.
LabSplit rgb_to_lab_split(const Image& rgb);

/// Inverse of rgb_to_lab_split (values are not clamped).
Image lab_split_to_rgb(const LabSplit& lab);

struct Lab {
  double l, a, b;
};
Lab srgb_to_lab(double r, double g, double b);

// ---- pixel augmentations ----------------------------------------------------

enum class AugKind { HorizontalFlip, Rotate90, RandomCrop, RandomGrey, ColorJitter, Mixup };

struct AugOp {
  AugKind kind;
  /// Flip probability, crop padding, grey probability, jitter strength or mixup weight.
  double param = 0.0;
  const Image* partner = nullptr;  // mixup only
};

AugOp horizontal_flip(double probability = 1.0);
AugOp rotate90();
AugOp random_crop(std::size_t pad);
AugOp random_grey(double probability = 0.2);
AugOp color_jitter(double strength);
AugOp mixup(double lambda, const Image* partner = nullptr);

/// Parses "horizontal_flip", "horizontal_flip(0.5)", "random_crop(4)",
/// "color_jitter(0.4)", "mixup(0.7)", ... Throws std::invalid_argument.
AugOp parse_aug_op(const std::string& text);
std::string to_string(const AugOp& op);

/// Applies `ops` in order with a generator seeded by `seed`. Each random op
/// consumes draws from that single stream in list order.
Image augment_view(const Image& view, std::span<const AugOp> ops, std::uint64_t seed);

}  // namespace metaug::data
