/*
 * Copyright 2026 The cmpdict Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

#include "cmpdict/core.hpp"

namespace cmpdict {

struct BoxFilterSpec {
  std::size_t side = 5;
};

inline ImageTensor to_grayscale(const ImageTensor& image) {
  if (image.channels() == 1) return image;
  if (image.channels() != 3) {
    throw config_error("grayscale conversion needs 1 or 3 channels, got " + std::to_string(image.channels()));
  }
  ImageTensor out(1, image.height(), image.width());
  for (std::size_t r = 0; r < image.height(); ++r) {
    for (std::size_t c = 0; c < image.width(); ++c) {
      out(0, r, c) = 0.299 * image(0, r, c) + 0.587 * image(1, r, c) + 0.114 * image(2, r, c);
    }
  }
  return out;
}

// Bilinear resampling with pixel-center alignment and edge clamping:
// output pixel i samples input coordinate (i + 0.5) * in / out - 0.5.
inline ImageTensor resize(const ImageTensor& image, std::size_t out_height, std::size_t out_width) {
  if (out_height == 0 || out_width == 0) throw config_error("resize target dimensions must be positive");
  if (out_height == image.height() && out_width == image.width()) return image;

  struct Tap {
    std::size_t lo, hi;
    double t;
  };
  auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> result(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double x = (static_cast<double>(i) + 0.5) * scale - 0.5;
      x = std::clamp(x, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(x));
      const std::size_t hi = std::min(lo + 1, in - 1);
      result[i] = {lo, hi, x - static_cast<double>(lo)};
    }
    return result;
  };
  const auto ry = taps(image.height(), out_height);
  const auto rx = taps(image.width(), out_width);
  ImageTensor out(image.channels(), out_height, out_width);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t i = 0; i < out_height; ++i) {
      for (std::size_t j = 0; j < out_width; ++j) {
        const Tap& y = ry[i];
        const Tap& x = rx[j];
        const double top = (1.0 - x.t) * image(c, y.lo, x.lo) + x.t * image(c, y.lo, x.hi);
        const double bottom = (1.0 - x.t) * image(c, y.hi, x.lo) + x.t * image(c, y.hi, x.hi);
        out(c, i, j) = (1.0 - y.t) * top + y.t * bottom;
      }
    }
  }
  return out;
}

// x - local mean, the mean taken over the part of the side x side window
// centered on each pixel that lies inside the image.
inline ImageTensor contrast_normalize(const ImageTensor& image, const BoxFilterSpec& spec = {}) {
  if (spec.side == 0 || spec.side % 2 == 0) throw config_error("box filter side must be odd and positive");
  if (image.channels() != 1) {
    throw config_error("contrast normalization expects a single-channel image, got " +
                       std::to_string(image.channels()));
  }
  const std::size_t h = image.height();
  const std::size_t w = image.width();
  const std::size_t half = spec.side / 2;

  // x - mean(window) is evaluated as -mean(window - x) so that constant
  // regions produce exact zeros.
  ImageTensor out(1, h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const std::size_t r0 = r >= half ? r - half : 0;
    const std::size_t r1 = std::min(h, r + half + 1);
    for (std::size_t c = 0; c < w; ++c) {
      const std::size_t c0 = c >= half ? c - half : 0;
      const std::size_t c1 = std::min(w, c + half + 1);
      const double center = image(0, r, c);
      double diff = 0.0;
      for (std::size_t u = r0; u < r1; ++u) {
        for (std::size_t v = c0; v < c1; ++v) diff += image(0, u, v) - center;
      }
      out(0, r, c) = -diff / static_cast<double>((r1 - r0) * (c1 - c0)) + 0.0;
    }
  }
  return out;
}

// factor x factor block means; any remainder rows/columns are dropped.
inline ImageTensor block_downsample(const ImageTensor& image, std::size_t factor) {
  if (factor == 0) throw config_error("downsampling factor must be positive");
  if (factor == 1) return image;
  const std::size_t h = image.height() / factor;
  const std::size_t w = image.width() / factor;
  if (h == 0 || w == 0) throw config_error("image too small for downsampling factor " + std::to_string(factor));
  ImageTensor out(image.channels(), h, w);
  const double inv = 1.0 / static_cast<double>(factor * factor);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t col = 0; col < w; ++col) {
        double s = 0.0;
        for (std::size_t u = 0; u < factor; ++u) {
          for (std::size_t v = 0; v < factor; ++v) s += image(c, r * factor + u, col * factor + v);
        }
        out(c, r, col) = s * inv;
      }
    }
  }
  return out;
}

inline ImageTensor crop(const ImageTensor& image, std::size_t row, std::size_t col, std::size_t height,
                        std::size_t width) {
  if (row + height > image.height() || col + width > image.width()) throw dimension_error("crop window out of bounds");
  ImageTensor out(image.channels(), height, width);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t v = 0; v < width; ++v) out(c, r, v) = image(c, row + r, col + v);
    }
  }
  return out;
}

// Random downsampling by a factor in {1..4} (restricted to factors that keep
// an out_height x out_width window), then a uniformly placed crop.
inline ImageTensor random_subsample_crop(const ImageTensor& image, std::mt19937_64& rng, std::size_t out_height = 64,
                                         std::size_t out_width = 64) {
  if (image.height() < out_height || image.width() < out_width) {
    throw data_error("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                     " is smaller than the " + std::to_string(out_height) + "x" + std::to_string(out_width) +
                     " crop");
  }
  std::vector<std::size_t> feasible;
  for (std::size_t f = 1; f <= 4; ++f) {
    if (image.height() / f >= out_height && image.width() / f >= out_width) feasible.push_back(f);
  }
  const std::size_t factor = feasible[std::uniform_int_distribution<std::size_t>(0, feasible.size() - 1)(rng)];
  const ImageTensor small = block_downsample(image, factor);
  const std::size_t row = std::uniform_int_distribution<std::size_t>(0, small.height() - out_height)(rng);
  const std::size_t col = std::uniform_int_distribution<std::size_t>(0, small.width() - out_width)(rng);
  return crop(small, row, col, out_height, out_width);
}

struct PreprocessOptions {
  std::size_t height = 64;
  std::size_t width = 64;
  bool random_crop = false;
  BoxFilterSpec box{};
};

// Standard corpus transform: grayscale, resize (or random subsample-crop),
// contrast normalization.
inline ImageTensor preprocess_image(const ImageTensor& raw, const PreprocessOptions& options, std::mt19937_64& rng) {
  ImageTensor gray = to_grayscale(raw);
  ImageTensor sized = options.random_crop ? random_subsample_crop(gray, rng, options.height, options.width)
                                          : resize(gray, options.height, options.width);
  return contrast_normalize(sized, options.box);
}

}  // namespace cmpdict
