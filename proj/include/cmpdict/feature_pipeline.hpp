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

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cmpdict/core.hpp"
#include "cmpdict/dict_learn.hpp"
#include "cmpdict/preprocess.hpp"

namespace cmpdict {

// Dense k-channel map over the valid grid holding the accumulated
// coefficient of every (filter, position).
inline ImageTensor code_to_feature_maps(const SparseCode& code, const FilterBank& bank) {
  check_code_compatible(code, bank);
  ImageTensor maps(bank.count(), code.image_height - bank.filter_height() + 1,
                   code.image_width - bank.filter_width() + 1);
  for (const Activation& a : code.activations) maps(a.filter, a.row, a.col) += a.coefficient;
  return maps;
}

inline ImageTensor abs_rectify(ImageTensor maps) {
  for (double& v : maps.samples()) v = std::abs(v);
  return maps;
}

// Non-overlapping pool x pool block means per channel. Ragged blocks at the
// right and bottom edges average over the samples they actually cover.
inline ImageTensor avg_pool(const ImageTensor& maps, std::size_t pool) {
  if (pool == 0) throw config_error("pool size must be positive");
  if (pool == 1) return maps;
  const std::size_t h = (maps.height() + pool - 1) / pool;
  const std::size_t w = (maps.width() + pool - 1) / pool;
  ImageTensor out(maps.channels(), h, w);
  for (std::size_t c = 0; c < maps.channels(); ++c) {
    for (std::size_t r = 0; r < h; ++r) {
      const std::size_t r0 = r * pool;
      const std::size_t r1 = std::min(maps.height(), r0 + pool);
      for (std::size_t col = 0; col < w; ++col) {
        const std::size_t c0 = col * pool;
        const std::size_t c1 = std::min(maps.width(), c0 + pool);
        double s = 0.0;
        for (std::size_t u = r0; u < r1; ++u) {
          for (std::size_t v = c0; v < c1; ++v) s += maps(c, u, v);
        }
        out(c, r, col) = s / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
  }
  return out;
}

struct PipelineConfig {
  TrainConfig layer1;
  TrainConfig layer2;
  std::size_t pool_size = 8;
  PreprocessOptions preprocess;
  std::uint64_t seed = 0;

  std::size_t pooled_height() const noexcept {
    return (preprocess.height - layer1.filter_height + 1 + pool_size - 1) / pool_size;
  }
  std::size_t pooled_width() const noexcept {
    return (preprocess.width - layer1.filter_width + 1 + pool_size - 1) / pool_size;
  }

  void validate() const {
    layer1.validate();
    layer2.validate();
    if (pool_size == 0) throw config_error("pool size must be positive");
    if (preprocess.height < layer1.filter_height || preprocess.width < layer1.filter_width) {
      throw config_error("layer-1 filters do not fit the preprocessed image size");
    }
    if (pooled_height() < layer2.filter_height || pooled_width() < layer2.filter_width) {
      throw config_error("pooled feature maps (" + std::to_string(pooled_height()) + "x" +
                         std::to_string(pooled_width()) + ") are smaller than the layer-2 filters");
    }
  }
};

// First and second layer of the face experiment: 8 16x16 filters, 8x8
// pooling, 16 second-layer filters.
inline PipelineConfig faces_pipeline_config() {
  PipelineConfig cfg;
  cfg.layer1 = TrainConfig{.k = 8, .filter_height = 16, .filter_width = 16, .q = 40, .epochs = 10};
  cfg.layer2 = TrainConfig{.k = 16, .filter_height = 4, .filter_width = 4, .q = 40, .epochs = 10};
  cfg.pool_size = 8;
  return cfg;
}

// Natural-image variant: random subsample-crop, 8 8x8 filters, 64 4x4
// second-layer filters.
inline PipelineConfig natural_pipeline_config() {
  PipelineConfig cfg;
  cfg.layer1 = TrainConfig{.k = 8, .filter_height = 8, .filter_width = 8, .q = 40, .epochs = 10};
  cfg.layer2 = TrainConfig{.k = 64, .filter_height = 4, .filter_width = 4, .q = 40, .epochs = 10};
  cfg.pool_size = 8;
  cfg.preprocess.random_crop = true;
  return cfg;
}

// Per-image preprocessing stream, independent of scheduling.
inline std::mt19937_64 image_rng(std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(std::uint64_t(index) >> 32)};
  return std::mt19937_64(seq);
}

inline std::vector<ImageTensor> preprocess_corpus(std::span<const ImageTensor> raw, const PreprocessOptions& options,
                                                  std::uint64_t seed, std::size_t threads) {
  std::vector<ImageTensor> out(raw.size());
  parallel_for(raw.size(), threads, [&](std::size_t i) {
    auto rng = image_rng(seed, i);
    out[i] = preprocess_image(raw[i], options, rng);
  });
  return out;
}

// Rectified, pooled layer-1 feature maps of every image.
inline std::vector<ImageTensor> layer_features(std::span<const ImageTensor> images, const FilterBank& bank,
                                               const TrainConfig& cfg, std::size_t pool, std::size_t threads) {
  const ShiftGramTable table = build_shift_gram(bank);
  const ConvMpOptions mp{cfg.q, cfg.residual_tolerance};
  std::vector<ImageTensor> out(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    const SparseCode code = conv_mp_encode(bank, table, images[i], mp);
    out[i] = avg_pool(abs_rectify(code_to_feature_maps(code, bank)), pool);
  });
  return out;
}

struct PipelineResult {
  FilterBank layer1;
  FilterBank layer2;
  TrainStats layer1_stats;
  TrainStats layer2_stats;
  std::vector<ImageTensor> layer2_inputs;
};

struct PipelineOptions {
  std::size_t threads = 1;
  std::function<void(std::size_t layer, const EpochStats&)> on_epoch;
};

// preprocess -> train layer 1 -> encode -> feature maps -> |.| -> pool ->
// train layer 2. Pooled maps go to layer 2 without further normalization.
inline PipelineResult run_two_layer(std::span<const ImageTensor> raw, const PipelineConfig& cfg,
                                    const PipelineOptions& options = {}) {
  cfg.validate();
  if (raw.empty()) throw data_error("pipeline corpus is empty");
  const std::vector<ImageTensor> images = preprocess_corpus(raw, cfg.preprocess, cfg.seed, options.threads);

  TrainConfig l1 = cfg.layer1;
  l1.seed = cfg.seed;
  TrainOptions o1{options.threads, {}};
  if (options.on_epoch) o1.on_epoch = [&](const EpochStats& s) { options.on_epoch(1, s); };
  TrainResult first = train(images, l1, o1);

  PipelineResult result;
  result.layer2_inputs = layer_features(images, first.bank, l1, cfg.pool_size, options.threads);

  TrainConfig l2 = cfg.layer2;
  l2.seed = cfg.seed + 1;
  TrainOptions o2{options.threads, {}};
  if (options.on_epoch) o2.on_epoch = [&](const EpochStats& s) { options.on_epoch(2, s); };
  TrainResult second = train(result.layer2_inputs, l2, o2);

  result.layer1 = std::move(first.bank);
  result.layer1_stats = std::move(first.stats);
  result.layer2 = std::move(second.bank);
  result.layer2_stats = std::move(second.stats);
  return result;
}

}  // namespace cmpdict
