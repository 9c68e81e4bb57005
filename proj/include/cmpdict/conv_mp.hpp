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
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmpdict/core.hpp"
#include "cmpdict/patch_mp.hpp"

namespace cmpdict {

// maps[j](r, c) = <filter j placed at (r, c), residual>, over the valid grid.
struct CorrelationMaps {
  std::size_t count = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double& operator()(std::size_t j, std::size_t r, std::size_t c) noexcept {
    return values[(j * height + r) * width + c];
  }
  const double& operator()(std::size_t j, std::size_t r, std::size_t c) const noexcept {
    return values[(j * height + r) * width + c];
  }
};

// table(i, j, dr, dc) = <filter i placed at p + s, filter j placed at p> with
// s = (dr - (h_f - 1), dc - (w_f - 1)), summed over channels. Entries are
// exactly the Gram entries of the Toeplitz dictionary for offset s, so MP
// correlation updates never touch the image.
struct ShiftGramTable {
  std::size_t count = 0;
  std::size_t filter_height = 0;
  std::size_t filter_width = 0;
  std::vector<double> values;

  std::size_t span_height() const noexcept { return 2 * filter_height - 1; }
  std::size_t span_width() const noexcept { return 2 * filter_width - 1; }

  const double& operator()(std::size_t i, std::size_t j, std::size_t dr, std::size_t dc) const noexcept {
    return values[((i * count + j) * span_height() + dr) * span_width() + dc];
  }
  double& operator()(std::size_t i, std::size_t j, std::size_t dr, std::size_t dc) noexcept {
    return values[((i * count + j) * span_height() + dr) * span_width() + dc];
  }
};

inline void check_bank_fits(const FilterBank& bank, const ImageTensor& image) {
  detail::require_dim(image.channels() == bank.channels(), "image channels", bank.channels(), image.channels());
  if (image.height() < bank.filter_height() || image.width() < bank.filter_width()) {
    throw dimension_error("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                          " smaller than filter " + std::to_string(bank.filter_height()) + "x" +
                          std::to_string(bank.filter_width()));
  }
}

// Valid cross-correlation of every filter with the image, summed over channels.
inline CorrelationMaps correlate(const FilterBank& bank, const ImageTensor& image) {
  check_bank_fits(bank, image);
  CorrelationMaps maps;
  maps.count = bank.count();
  maps.height = image.height() - bank.filter_height() + 1;
  maps.width = image.width() - bank.filter_width() + 1;
  maps.values.assign(maps.count * maps.height * maps.width, 0.0);
  for (std::size_t j = 0; j < bank.count(); ++j) {
    double* map = maps.values.data() + j * maps.height * maps.width;
    for (std::size_t c = 0; c < bank.channels(); ++c) {
      for (std::size_t u = 0; u < bank.filter_height(); ++u) {
        for (std::size_t v = 0; v < bank.filter_width(); ++v) {
          const double f = bank(j, c, u, v);
          if (f == 0.0) continue;
          for (std::size_t r = 0; r < maps.height; ++r) {
            const double* src = &image(c, r + u, v);
            double* dst = map + r * maps.width;
            for (std::size_t col = 0; col < maps.width; ++col) dst[col] += f * src[col];
          }
        }
      }
    }
  }
  return maps;
}

inline ShiftGramTable build_shift_gram(const FilterBank& bank) {
  const std::size_t k = bank.count();
  const std::size_t fh = bank.filter_height();
  const std::size_t fw = bank.filter_width();
  ShiftGramTable table{k, fh, fw, {}};
  const std::size_t sh = table.span_height();
  const std::size_t sw = table.span_width();
  table.values.assign(k * k * sh * sw, 0.0);

  const auto ifh = static_cast<std::ptrdiff_t>(fh);
  const auto ifw = static_cast<std::ptrdiff_t>(fw);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i; j < k; ++j) {
      for (std::size_t dr = 0; dr < sh; ++dr) {
        const std::ptrdiff_t sr = static_cast<std::ptrdiff_t>(dr) - (ifh - 1);
        // sum_x f_i(x) f_j(x + s) over x with both inside the filter support
        const std::ptrdiff_t u0 = std::max<std::ptrdiff_t>(0, -sr);
        const std::ptrdiff_t u1 = std::min<std::ptrdiff_t>(ifh, ifh - sr);
        for (std::size_t dc = 0; dc < sw; ++dc) {
          const std::ptrdiff_t sc = static_cast<std::ptrdiff_t>(dc) - (ifw - 1);
          const std::ptrdiff_t v0 = std::max<std::ptrdiff_t>(0, -sc);
          const std::ptrdiff_t v1 = std::min<std::ptrdiff_t>(ifw, ifw - sc);
          double s = 0.0;
          for (std::size_t c = 0; c < bank.channels(); ++c) {
            for (std::ptrdiff_t u = u0; u < u1; ++u) {
              for (std::ptrdiff_t v = v0; v < v1; ++v) {
                s += bank(i, c, static_cast<std::size_t>(u), static_cast<std::size_t>(v)) *
                     bank(j, c, static_cast<std::size_t>(u + sr), static_cast<std::size_t>(v + sc));
              }
            }
          }
          table(i, j, dr, dc) = s;
          table(j, i, sh - 1 - dr, sw - 1 - dc) = s;
        }
      }
    }
  }
  return table;
}

struct ConvMpOptions {
  std::size_t q = 40;
  double residual_tolerance = 0.0;
};

namespace detail {

inline void check_table_matches(const ShiftGramTable& table, const FilterBank& bank) {
  require_dim(table.count == bank.count(), "shift-gram filter count", bank.count(), table.count);
  require_dim(table.filter_height == bank.filter_height(), "shift-gram filter height", bank.filter_height(),
              table.filter_height);
  require_dim(table.filter_width == bank.filter_width(), "shift-gram filter width", bank.filter_width(),
              table.filter_width);
  require_dim(table.values.size() == bank.count() * bank.count() * table.span_height() * table.span_width(),
              "shift-gram entry count", bank.count() * bank.count() * table.span_height() * table.span_width(),
              table.values.size());
}

struct NoObserver {
  void operator()(std::size_t, const Activation&, const CorrelationMaps&) const noexcept {}
};

}  // namespace detail

// The greedy loop proper, starting from already-computed correlation maps
// (which it consumes). Each step scans all k maps for the peak |value|
// (ties: lowest filter, then row-major position), records it, and subtracts
// a * table(i, j, .) over the (2h_f-1) x (2w_f-1) window around the peak in
// every map. Cost per step is O(k * valid area). `observer(step, activation,
// maps)` runs after each update.
template <typename Observer = detail::NoObserver>
std::vector<Activation> conv_mp_pursue(CorrelationMaps& maps, const ShiftGramTable& table,
                                       const ConvMpOptions& options, Observer&& observer = {}) {
  if (options.q < 1) throw config_error("matching pursuit needs q >= 1");
  if (maps.count != table.count) throw dimension_error("correlation maps and shift-gram table disagree on k");

  const std::size_t k = maps.count;
  const std::size_t H = maps.height;
  const std::size_t W = maps.width;
  const std::size_t area = H * W;
  const std::size_t fh = table.filter_height;
  const std::size_t fw = table.filter_width;

  std::vector<Activation> out;
  out.reserve(options.q);
  for (std::size_t step = 0; step < options.q; ++step) {
    std::size_t best = 0;
    double best_abs = -1.0;
    const double* vals = maps.values.data();
    for (std::size_t n = 0; n < k * area; ++n) {
      const double v = std::abs(vals[n]);
      if (v > best_abs) {
        best_abs = v;
        best = n;
      }
    }
    if (best_abs <= options.residual_tolerance) break;

    const std::size_t j = best / area;
    const std::size_t r = (best % area) / W;
    const std::size_t c = best % W;
    const double a = maps.values[best];
    const Activation act{j, r, c, a};
    out.push_back(act);

    const std::size_t r0 = r >= fh - 1 ? r - (fh - 1) : 0;
    const std::size_t r1 = std::min(H - 1, r + fh - 1);
    const std::size_t c0 = c >= fw - 1 ? c - (fw - 1) : 0;
    const std::size_t c1 = std::min(W - 1, c + fw - 1);
    for (std::size_t i = 0; i < k; ++i) {
      double* map = maps.values.data() + i * area;
      for (std::size_t rr = r0; rr <= r1; ++rr) {
        // table row for offset rr - r
        const double* trow = &table(i, j, rr + (fh - 1) - r, 0);
        double* mrow = map + rr * W;
        for (std::size_t cc = c0; cc <= c1; ++cc) mrow[cc] -= a * trow[cc + (fw - 1) - c];
      }
    }
    observer(step, act, static_cast<const CorrelationMaps&>(maps));
  }
  return out;
}

// Convolutional matching pursuit: one application of the filter bank, then
// the table-driven greedy loop.
template <typename Observer = detail::NoObserver>
SparseCode conv_mp_encode(const FilterBank& bank, const ShiftGramTable& table, const ImageTensor& image,
                          const ConvMpOptions& options, Observer&& observer = {}) {
  detail::check_table_matches(table, bank);
  bank.require_unit_norm(1e-10);
  CorrelationMaps maps = correlate(bank, image);
  SparseCode code{image.channels(), image.height(), image.width(), {}};
  code.activations = conv_mp_pursue(maps, table, options, std::forward<Observer>(observer));
  return code;
}

inline SparseCode conv_mp_encode(const FilterBank& bank, const ImageTensor& image, const ConvMpOptions& options) {
  return conv_mp_encode(bank, build_shift_gram(bank), image, options);
}

// Explicit dictionary of all valid shifts of every filter on an h x w canvas.
// Column order is filter-major, then row-major position. Test oracle only.
inline Dictionary toeplitz_expand(const FilterBank& bank, std::size_t height, std::size_t width,
                                  std::size_t max_columns = 100000) {
  if (height < bank.filter_height() || width < bank.filter_width()) {
    throw dimension_error("canvas smaller than filter");
  }
  const std::size_t vh = height - bank.filter_height() + 1;
  const std::size_t vw = width - bank.filter_width() + 1;
  const std::size_t columns = bank.count() * vh * vw;
  if (columns > max_columns) {
    throw config_error("toeplitz dictionary would have " + std::to_string(columns) + " columns (limit " +
                       std::to_string(max_columns) + ")");
  }
  const std::size_t d = bank.channels() * height * width;
  std::vector<double> atoms(columns * d, 0.0);
  std::size_t col_index = 0;
  for (std::size_t j = 0; j < bank.count(); ++j) {
    for (std::size_t r = 0; r < vh; ++r) {
      for (std::size_t c = 0; c < vw; ++c, ++col_index) {
        double* atom = atoms.data() + col_index * d;
        for (std::size_t ch = 0; ch < bank.channels(); ++ch) {
          for (std::size_t u = 0; u < bank.filter_height(); ++u) {
            for (std::size_t v = 0; v < bank.filter_width(); ++v) {
              atom[(ch * height + r + u) * width + c + v] = bank(j, ch, u, v);
            }
          }
        }
      }
    }
  }
  return Dictionary(d, columns, std::move(atoms));
}

}  // namespace cmpdict
