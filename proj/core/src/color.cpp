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

#include <array>
#include <cmath>
#include <stdexcept>

#include "metaug/image.hpp"

namespace metaug::data {
namespace {

using Mat3 = std::array<std::array<double, 3>, 3>;

// Linear sRGB -> XYZ, D65.
constexpr Mat3 kRgbToXyz = {{
    {0.4124564, 0.3575761, 0.1804375},
    {0.2126729, 0.7151522, 0.0721750},
    {0.0193339, 0.1191920, 0.9503041},
}};

constexpr double kDelta = 6.0 / 29.0;

// The reference white is the image of RGB (1, 1, 1), so neutral greys map to a = b = 0.
std::array<double, 3> white_point() {
  std::array<double, 3> w{};
  for (int i = 0; i < 3; ++i) w[i] = kRgbToXyz[i][0] + kRgbToXyz[i][1] + kRgbToXyz[i][2];
  return w;
}

Mat3 inverse(const Mat3& m) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  Mat3 inv{};
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / det;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / det;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / det;
  inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / det;
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / det;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / det;
  inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / det;
  inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / det;
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / det;
  return inv;
}

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double linear_to_srgb(double c) {
  return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double u) {
  return u > kDelta ? u * u * u : 3.0 * kDelta * kDelta * (u - 4.0 / 29.0);
}

}  // namespace

Lab srgb_to_lab(double r, double g, double b) {
  const std::array<double, 3> lin = {srgb_to_linear(r), srgb_to_linear(g), srgb_to_linear(b)};
  const auto white = white_point();
  std::array<double, 3> f{};
  for (int i = 0; i < 3; ++i) {
    const double v = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] + kRgbToXyz[i][2] * lin[2];
    f[i] = lab_f(v / white[i]);
  }
  return {116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])};
}

LabSplit rgb_to_lab_split(const Image& rgb) {
  if (rgb.channels != 3) {
    throw std::invalid_argument("rgb_to_lab_split: expected 3 channels, got " +
                                std::to_string(rgb.channels));
  }
  for (double v : rgb.pixels) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("rgb_to_lab_split: pixel value outside [0, 1]");
    }
  }
  LabSplit out{Image(rgb.height, rgb.width, 1), Image(rgb.height, rgb.width, 2)};
  for (std::size_t y = 0; y < rgb.height; ++y) {
    for (std::size_t x = 0; x < rgb.width; ++x) {
      const Lab lab = srgb_to_lab(rgb.at(y, x, 0), rgb.at(y, x, 1), rgb.at(y, x, 2));
      out.lightness.at(y, x, 0) = lab.l / 50.0 - 1.0;
      out.ab.at(y, x, 0) = lab.a / 128.0;
      out.ab.at(y, x, 1) = lab.b / 128.0;
    }
  }
  return out;
}

Image lab_split_to_rgb(const LabSplit& lab) {
  const Image& l = lab.lightness;
  if (l.channels != 1 || lab.ab.channels != 2 || lab.ab.height != l.height ||
      lab.ab.width != l.width) {
    throw std::invalid_argument("lab_split_to_rgb: mismatched L / ab images");
  }
  static const Mat3 xyz_to_rgb = inverse(kRgbToXyz);
  const auto white = white_point();
  Image rgb(l.height, l.width, 3);
  for (std::size_t y = 0; y < l.height; ++y) {
    for (std::size_t x = 0; x < l.width; ++x) {
      const double big_l = (l.at(y, x, 0) + 1.0) * 50.0;
      const double a = lab.ab.at(y, x, 0) * 128.0;
      const double b = lab.ab.at(y, x, 1) * 128.0;
      const double fy = (big_l + 16.0) / 116.0;
      const std::array<double, 3> xyz = {white[0] * lab_f_inv(fy + a / 500.0),
                                         white[1] * lab_f_inv(fy),
                                         white[2] * lab_f_inv(fy - b / 200.0)};
      for (int c = 0; c < 3; ++c) {
        const double lin =
            xyz_to_rgb[c][0] * xyz[0] + xyz_to_rgb[c][1] * xyz[1] + xyz_to_rgb[c][2] * xyz[2];
        rgb.at(y, x, static_cast<std::size_t>(c)) = linear_to_srgb(lin);
      }
    }
  }
  return rgb;
}

Tensor Image::flatten() const { return Tensor(1, pixels.size(), pixels); }

}  // namespace metaug::data
