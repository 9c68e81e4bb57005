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
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmpdict/error.hpp"

namespace cmpdict {

// A c-channel h x w grid of samples. Layout is channel-major, row-major
// within each channel: index = (channel * height + row) * width + col.
class ImageTensor {
 public:
  ImageTensor() = default;

  ImageTensor(std::size_t channels, std::size_t height, std::size_t width, double fill = 0.0)
      : channels_(channels), height_(height), width_(width) {
    check_dims();
    samples_.assign(channels * height * width, fill);
  }

  ImageTensor(std::size_t channels, std::size_t height, std::size_t width, std::vector<double> samples)
      : channels_(channels), height_(height), width_(width), samples_(std::move(samples)) {
    check_dims();
    detail::require_dim(samples_.size() == channels * height * width, "sample count",
                        channels * height * width, samples_.size());
    for (double v : samples_) {
      if (!std::isfinite(v)) throw data_error("image tensor contains a non-finite sample");
    }
  }

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }

  double& operator()(std::size_t c, std::size_t r, std::size_t col) noexcept {
    return samples_[(c * height_ + r) * width_ + col];
  }
  const double& operator()(std::size_t c, std::size_t r, std::size_t col) const noexcept {
    return samples_[(c * height_ + r) * width_ + col];
  }

  std::span<double> samples() noexcept { return samples_; }
  std::span<const double> samples() const noexcept { return samples_; }

  std::span<const double> channel(std::size_t c) const noexcept {
    return std::span<const double>(samples_).subspan(c * height_ * width_, height_ * width_);
  }

  double squared_norm() const noexcept {
    double s = 0.0;
    for (double v : samples_) s += v * v;
    return s;
  }

  bool same_shape(const ImageTensor& other) const noexcept {
    return channels_ == other.channels_ && height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  void check_dims() const {
    if (channels_ == 0 || height_ == 0 || width_ == 0) {
      throw config_error("image tensor dimensions must be positive (got " + std::to_string(channels_) +
                         "x" + std::to_string(height_) + "x" + std::to_string(width_) + ")");
    }
  }

  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<double> samples_;
};

// k filters of shape c x h_f x w_f, stored filter-major then in the
// ImageTensor layout. Unit norm is not enforced on construction (a bank is
// often built first and normalized afterwards); encoders check it.
class FilterBank {
 public:
  FilterBank() = default;

  FilterBank(std::size_t count, std::size_t channels, std::size_t filter_height, std::size_t filter_width)
      : count_(count), channels_(channels), filter_height_(filter_height), filter_width_(filter_width) {
    check_dims();
    values_.assign(count * filter_size(), 0.0);
  }

  FilterBank(std::size_t count, std::size_t channels, std::size_t filter_height, std::size_t filter_width,
             std::vector<double> values)
      : count_(count),
        channels_(channels),
        filter_height_(filter_height),
        filter_width_(filter_width),
        values_(std::move(values)) {
    check_dims();
    detail::require_dim(values_.size() == count * filter_size(), "filter bank value count",
                        count * filter_size(), values_.size());
    for (double v : values_) {
      if (!std::isfinite(v)) throw data_error("filter bank contains a non-finite value");
    }
  }

  std::size_t count() const noexcept { return count_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t filter_height() const noexcept { return filter_height_; }
  std::size_t filter_width() const noexcept { return filter_width_; }
  std::size_t filter_size() const noexcept { return channels_ * filter_height_ * filter_width_; }

  std::span<double> filter(std::size_t j) noexcept {
    return std::span<double>(values_).subspan(j * filter_size(), filter_size());
  }
  std::span<const double> filter(std::size_t j) const noexcept {
    return std::span<const double>(values_).subspan(j * filter_size(), filter_size());
  }

  double& operator()(std::size_t j, std::size_t c, std::size_t r, std::size_t col) noexcept {
    return values_[j * filter_size() + (c * filter_height_ + r) * filter_width_ + col];
  }
  const double& operator()(std::size_t j, std::size_t c, std::size_t r, std::size_t col) const noexcept {
    return values_[j * filter_size() + (c * filter_height_ + r) * filter_width_ + col];
  }

  std::span<const double> values() const noexcept { return values_; }

  double filter_norm(std::size_t j) const noexcept {
    double s = 0.0;
    for (double v : filter(j)) s += v * v;
    return std::sqrt(s);
  }

  // Largest |norm - 1| over all filters.
  double max_norm_deviation() const noexcept {
    double worst = 0.0;
    for (std::size_t j = 0; j < count_; ++j) worst = std::max(worst, std::abs(filter_norm(j) - 1.0));
    return worst;
  }

  void require_unit_norm(double tolerance) const {
    for (std::size_t j = 0; j < count_; ++j) {
      const double n = filter_norm(j);
      if (std::abs(n - 1.0) > tolerance) {
        throw data_error("filter " + std::to_string(j) + " has norm " + std::to_string(n) +
                         ", expected unit norm");
      }
    }
  }

  friend bool operator==(const FilterBank&, const FilterBank&) = default;

 private:
  void check_dims() const {
    if (count_ == 0 || channels_ == 0 || filter_height_ == 0 || filter_width_ == 0) {
      throw config_error("filter bank dimensions must be positive");
    }
  }

  std::size_t count_ = 0;
  std::size_t channels_ = 0;
  std::size_t filter_height_ = 0;
  std::size_t filter_width_ = 0;
  std::vector<double> values_;
};

// One nonzero of a convolutional code. (row, col) is the top-left corner of
// the filter in valid-correlation coordinates.
struct Activation {
  std::size_t filter = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double coefficient = 0.0;

  friend bool operator==(const Activation&, const Activation&) = default;
};

// Activations in selection order. Repeated (filter, position) entries are
// allowed; their coefficients add.
struct SparseCode {
  std::size_t channels = 0;
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  std::vector<Activation> activations;

  friend bool operator==(const SparseCode&, const SparseCode&) = default;
};

struct TrainConfig {
  std::size_t k = 8;
  std::size_t filter_height = 16;
  std::size_t filter_width = 16;
  std::size_t q = 40;
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  // Encoding stops early once the peak |correlation| drops to this value.
  double residual_tolerance = 0.0;
  // Filters used fewer times than this in an epoch are reinitialized.
  std::size_t min_activations = 1;

  void validate() const {
    if (k == 0) throw config_error("k must be positive");
    if (filter_height == 0 || filter_width == 0) throw config_error("filter dimensions must be positive");
    if (q == 0) throw config_error("q must be at least 1");
    if (!(residual_tolerance >= 0.0) || !std::isfinite(residual_tolerance)) {
      throw config_error("residual_tolerance must be a finite nonnegative number");
    }
  }
};

// ---------------------------------------------------------------------------
// Reconstruction and energy
// ---------------------------------------------------------------------------

// Checks that `code` can be interpreted against `bank`.
inline void check_code_compatible(const SparseCode& code, const FilterBank& bank) {
  detail::require_dim(code.channels == bank.channels(), "code channels", bank.channels(), code.channels);
  if (code.image_height < bank.filter_height() || code.image_width < bank.filter_width()) {
    throw dimension_error("code image dims " + std::to_string(code.image_height) + "x" +
                          std::to_string(code.image_width) + " smaller than filter dims " +
                          std::to_string(bank.filter_height()) + "x" + std::to_string(bank.filter_width()));
  }
  const std::size_t max_row = code.image_height - bank.filter_height();
  const std::size_t max_col = code.image_width - bank.filter_width();
  for (std::size_t n = 0; n < code.activations.size(); ++n) {
    const Activation& a = code.activations[n];
    if (a.filter >= bank.count()) {
      throw dimension_error("activation " + std::to_string(n) + " filter index " + std::to_string(a.filter) +
                            " out of range for " + std::to_string(bank.count()) + " filters");
    }
    if (a.row > max_row || a.col > max_col) {
      throw dimension_error("activation " + std::to_string(n) + " position (" + std::to_string(a.row) + "," +
                            std::to_string(a.col) + ") outside the valid grid");
    }
    if (!std::isfinite(a.coefficient)) {
      throw data_error("activation " + std::to_string(n) + " has a non-finite coefficient");
    }
  }
}

// canvas += scale * (filter j with its top-left corner at (row, col)).
inline void add_placed_filter(ImageTensor& canvas, const FilterBank& bank, std::size_t j, std::size_t row,
                              std::size_t col, double scale) noexcept {
  const std::size_t fh = bank.filter_height();
  const std::size_t fw = bank.filter_width();
  for (std::size_t c = 0; c < bank.channels(); ++c) {
    for (std::size_t u = 0; u < fh; ++u) {
      for (std::size_t v = 0; v < fw; ++v) canvas(c, row + u, col + v) += scale * bank(j, c, u, v);
    }
  }
}

// <filter j placed at (row, col), image>.
inline double placed_inner_product(const ImageTensor& image, const FilterBank& bank, std::size_t j,
                                   std::size_t row, std::size_t col) noexcept {
  double s = 0.0;
  for (std::size_t c = 0; c < bank.channels(); ++c) {
    for (std::size_t u = 0; u < bank.filter_height(); ++u) {
      for (std::size_t v = 0; v < bank.filter_width(); ++v) s += bank(j, c, u, v) * image(c, row + u, col + v);
    }
  }
  return s;
}

// Flattened c x h_f x w_f window of `image` at (row, col).
inline std::vector<double> extract_patch(const ImageTensor& image, std::size_t row, std::size_t col,
                                         std::size_t patch_height, std::size_t patch_width) {
  std::vector<double> patch;
  patch.reserve(image.channels() * patch_height * patch_width);
  for (std::size_t c = 0; c < image.channels(); ++c) {
    for (std::size_t u = 0; u < patch_height; ++u) {
      for (std::size_t v = 0; v < patch_width; ++v) patch.push_back(image(c, row + u, col + v));
    }
  }
  return patch;
}

// Sum over activations of coefficient x filter placed at its position.
inline ImageTensor reconstruct(const SparseCode& code, const FilterBank& bank) {
  check_code_compatible(code, bank);
  ImageTensor out(code.channels, code.image_height, code.image_width);
  for (const Activation& a : code.activations) add_placed_filter(out, bank, a.filter, a.row, a.col, a.coefficient);
  return out;
}

inline void check_image_matches_code(const ImageTensor& image, const SparseCode& code) {
  detail::require_dim(image.channels() == code.channels, "image channels", code.channels, image.channels());
  detail::require_dim(image.height() == code.image_height, "image height", code.image_height, image.height());
  detail::require_dim(image.width() == code.image_width, "image width", code.image_width, image.width());
}

// image - reconstruct(code, bank).
inline ImageTensor residual(const ImageTensor& image, const SparseCode& code, const FilterBank& bank) {
  check_image_matches_code(image, code);
  check_code_compatible(code, bank);
  ImageTensor e = image;
  for (const Activation& a : code.activations) add_placed_filter(e, bank, a.filter, a.row, a.col, -a.coefficient);
  return e;
}

inline double residual_energy(const ImageTensor& image, const SparseCode& code, const FilterBank& bank) {
  return residual(image, code, bank).squared_norm();
}

// Scales every filter to unit l2 norm. Rejects identically zero filters.
inline FilterBank normalize_filters(FilterBank bank) {
  for (std::size_t j = 0; j < bank.count(); ++j) {
    const double n = bank.filter_norm(j);
    if (n == 0.0) throw data_error("filter " + std::to_string(j) + " is identically zero and cannot be normalized");
    if (n == 1.0) continue;
    for (double& v : bank.filter(j)) v /= n;
  }
  return bank;
}

}  // namespace cmpdict
