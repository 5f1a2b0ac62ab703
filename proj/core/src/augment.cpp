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

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "metaug/image.hpp"
#include "metaug/random.hpp"

namespace metaug::data {
namespace {

void require_colour(const Image& view, const char* op) {
  if (view.channels != 3) {
    throw std::invalid_argument(std::string(op) + " requires a 3-channel view, got " +
                                std::to_string(view.channels));
  }
}

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Image flip(const Image& in) {
  Image out(in.height, in.width, in.channels);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x)
      for (std::size_t c = 0; c < in.channels; ++c)
        out.at(y, in.width - 1 - x, c) = in.at(y, x, c);
  return out;
}

Image rotate_clockwise(const Image& in) {
  if (in.height != in.width) {
    throw std::invalid_argument("rotate90 requires a square view");
  }
  Image out(in.width, in.height, in.channels);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x)
      for (std::size_t c = 0; c < in.channels; ++c)
        out.at(x, in.height - 1 - y, c) = in.at(y, x, c);
  return out;
}

// Reflection without repeating the edge pixel ("reflect" padding).
std::size_t reflect(std::ptrdiff_t i, std::size_t n) {
  if (n == 1) return 0;
  const auto period = static_cast<std::ptrdiff_t>(2 * (n - 1));
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<std::ptrdiff_t>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

Image crop(const Image& in, std::size_t pad, Rng& rng) {
  std::uniform_int_distribution<std::size_t> offset(0, 2 * pad);
  const std::size_t oy = offset(rng);
  const std::size_t ox = offset(rng);
  Image out(in.height, in.width, in.channels);
  const auto p = static_cast<std::ptrdiff_t>(pad);
  for (std::size_t y = 0; y < in.height; ++y) {
    const std::size_t sy = reflect(static_cast<std::ptrdiff_t>(y + oy) - p, in.height);
    for (std::size_t x = 0; x < in.width; ++x) {
      const std::size_t sx = reflect(static_cast<std::ptrdiff_t>(x + ox) - p, in.width);
      for (std::size_t c = 0; c < in.channels; ++c) out.at(y, x, c) = in.at(sy, sx, c);
    }
  }
  return out;
}

double luminance(const Image& img, std::size_t y, std::size_t x) {
  return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

Image to_grey(const Image& in) {
  Image out(in.height, in.width, 3);
  for (std::size_t y = 0; y < in.height; ++y)
    for (std::size_t x = 0; x < in.width; ++x) {
      const double g = luminance(in, y, x);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = g;
    }
  return out;
}

Image jitter(const Image& in, double strength, Rng& rng) {
  const double lo = std::max(0.0, 1.0 - strength);
  const double hi = 1.0 + strength;
  const double brightness = uniform(rng, lo, hi);
  const double contrast = uniform(rng, lo, hi);
  const double saturation = uniform(rng, lo, hi);

  Image out = in;
  for (double& v : out.pixels) v *= brightness;

  double mean_grey = 0.0;
  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) mean_grey += luminance(out, y, x);
  mean_grey /= static_cast<double>(out.height * out.width);
  for (double& v : out.pixels) v = (v - mean_grey) * contrast + mean_grey;

  for (std::size_t y = 0; y < out.height; ++y)
    for (std::size_t x = 0; x < out.width; ++x) {
      const double g = luminance(out, y, x);
      for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = g + (out.at(y, x, c) - g) * saturation;
    }
  for (double& v : out.pixels) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace

AugOp horizontal_flip(double probability) { return {AugKind::HorizontalFlip, probability}; }
AugOp rotate90() { return {AugKind::Rotate90, 0.0}; }
AugOp random_crop(std::size_t pad) { return {AugKind::RandomCrop, static_cast<double>(pad)}; }
AugOp random_grey(double probability) { return {AugKind::RandomGrey, probability}; }
AugOp color_jitter(double strength) { return {AugKind::ColorJitter, strength}; }
AugOp mixup(double lambda, const Image* partner) { return {AugKind::Mixup, lambda, partner}; }

AugOp parse_aug_op(const std::string& text) {
  std::string name = text;
  std::optional<double> arg;
  if (const auto open = text.find('('); open != std::string::npos) {
    if (text.back() != ')') throw std::invalid_argument("malformed augmentation: " + text);
    name = text.substr(0, open);
    const std::string inner = text.substr(open + 1, text.size() - open - 2);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), v);
    if (ec != std::errc() || ptr != inner.data() + inner.size()) {
      throw std::invalid_argument("malformed augmentation argument: " + text);
    }
    arg = v;
  }
  if (name == "horizontal_flip") return horizontal_flip(arg.value_or(1.0));
  if (name == "rotate90") return rotate90();
  if (name == "random_crop") return random_crop(static_cast<std::size_t>(arg.value_or(4.0)));
  if (name == "random_grey") return random_grey(arg.value_or(0.2));
  if (name == "color_jitter") return color_jitter(arg.value_or(0.4));
  if (name == "mixup") return mixup(arg.value_or(0.9));
  throw std::invalid_argument("unknown augmentation: " + name);
}

std::string to_string(const AugOp& op) {
  std::ostringstream os;
  switch (op.kind) {
    case AugKind::HorizontalFlip: os << "horizontal_flip(" << op.param << ")"; break;
    case AugKind::Rotate90: os << "rotate90"; break;
    case AugKind::RandomCrop: os << "random_crop(" << op.param << ")"; break;
    case AugKind::RandomGrey: os << "random_grey(" << op.param << ")"; break;
    case AugKind::ColorJitter: os << "color_jitter(" << op.param << ")"; break;
    case AugKind::Mixup: os << "mixup(" << op.param << ")"; break;
  }
  return os.str();
}

Image augment_view(const Image& view, std::span<const AugOp> ops, std::uint64_t seed) {
  for (const auto& op : ops) {
    if (op.kind == AugKind::ColorJitter) require_colour(view, "color_jitter");
    if (op.kind == AugKind::RandomGrey) require_colour(view, "random_grey");
  }
  Rng rng(seed);
  Image out = view;
  for (const auto& op : ops) {
    switch (op.kind) {
      case AugKind::HorizontalFlip:
        if (op.param >= 1.0 || uniform(rng, 0.0, 1.0) < op.param) out = flip(out);
        break;
      case AugKind::Rotate90:
        out = rotate_clockwise(out);
        break;
      case AugKind::RandomCrop:
        out = crop(out, static_cast<std::size_t>(op.param), rng);
        break;
      case AugKind::RandomGrey:
        if (uniform(rng, 0.0, 1.0) < op.param) out = to_grey(out);
        break;
      case AugKind::ColorJitter:
        out = jitter(out, op.param, rng);
        break;
      case AugKind::Mixup: {
        if (op.partner == nullptr) throw std::invalid_argument("mixup requires a partner view");
        const Image& partner = *op.partner;
        if (partner.height != out.height || partner.width != out.width ||
            partner.channels != out.channels) {
          throw std::invalid_argument("mixup partner shape differs from the view");
        }
        for (std::size_t i = 0; i < out.pixels.size(); ++i) {
          out.pixels[i] = op.param * out.pixels[i] + (1.0 - op.param) * partner.pixels[i];
        }
        break;
      }
    }
  }
  return out;
}

}  // namespace metaug::data
