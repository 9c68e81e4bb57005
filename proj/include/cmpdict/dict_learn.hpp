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
#include <cstdint>
#include <functional>
#include <iterator>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cmpdict/conv_mp.hpp"
#include "cmpdict/core.hpp"
#include "cmpdict/parallel.hpp"

namespace cmpdict {

struct ActivatedPatch {
  std::size_t image = 0;
  std::size_t row = 0;
  std::size_t col = 0;
  double coefficient = 0.0;    // accumulated code value at (filter, row, col)
  std::vector<double> patch;   // E_p = residual window + coefficient * w_j
};

struct ActivatedPatchSet {
  std::size_t filter = 0;
  std::vector<ActivatedPatch> entries;
};

struct EpochStats {
  std::size_t epoch = 0;
  double energy = 0.0;          // total residual energy right after encoding
  double updated_energy = 0.0;  // after all filter updates of the epoch
  std::vector<std::size_t> activation_counts;
  std::size_t reinit_count = 0;
};

struct ReinitEvent {
  std::size_t epoch = 0;
  std::size_t filter = 0;
  std::size_t uses = 0;
};

struct TrainStats {
  std::vector<EpochStats> epochs;
  std::vector<ReinitEvent> reinit_events;
};

// Codes and residuals of every corpus image against the current bank.
struct CorpusCoding {
  std::vector<SparseCode> codes;
  std::vector<ImageTensor> residuals;
};

enum class FilterUpdateOutcome { updated, reinitialized };

inline std::string format_epoch_line(const EpochStats& s) {
  std::size_t lo = 0;
  std::size_t hi = 0;
  if (!s.activation_counts.empty()) {
    const auto [mn, mx] = std::minmax_element(s.activation_counts.begin(), s.activation_counts.end());
    lo = *mn;
    hi = *mx;
  }
  std::ostringstream os;
  os.precision(17);
  os << "epoch=" << s.epoch << " energy=" << s.energy << " updated_energy=" << s.updated_energy
     << " min_count=" << lo << " max_count=" << hi << " reinit=" << s.reinit_count;
  return os.str();
}

namespace detail {

inline std::size_t uniform_below(std::mt19937_64& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

inline constexpr std::size_t max_patch_draws = 1000;

inline void check_corpus(std::span<const ImageTensor> images, const TrainConfig& cfg) {
  cfg.validate();
  if (images.empty()) throw data_error("training corpus is empty");
  const std::size_t c = images.front().channels();
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_dim(images[i].channels() == c, "image " + std::to_string(i) + " channels", c, images[i].channels());
    if (images[i].height() < cfg.filter_height || images[i].width() < cfg.filter_width) {
      throw dimension_error("image " + std::to_string(i) + " is smaller than the " +
                            std::to_string(cfg.filter_height) + "x" + std::to_string(cfg.filter_width) + " filters");
    }
  }
}

// A random nonzero data patch, unit-normalized.
inline std::vector<double> draw_unit_patch(std::span<const ImageTensor> images, std::size_t fh, std::size_t fw,
                                           std::mt19937_64& rng) {
  for (std::size_t attempt = 0; attempt < max_patch_draws; ++attempt) {
    const ImageTensor& img = images[uniform_below(rng, images.size())];
    const std::size_t r = uniform_below(rng, img.height() - fh + 1);
    const std::size_t c = uniform_below(rng, img.width() - fw + 1);
    std::vector<double> patch = extract_patch(img, r, c, fh, fw);
    const double n2 = squared_norm(patch);
    if (n2 > 0.0) {
      const double n = std::sqrt(n2);
      for (double& v : patch) v /= n;
      return patch;
    }
  }
  throw data_error("no nonzero patch found after " + std::to_string(max_patch_draws) + " draws");
}

}  // namespace detail

// k random data patches, normalized. Shares `rng` with the caller so a
// training run can continue the same stream.
inline FilterBank init_filters(std::span<const ImageTensor> images, const TrainConfig& cfg, std::mt19937_64& rng) {
  detail::check_corpus(images, cfg);
  const bool all_zero = std::all_of(images.begin(), images.end(),
                                    [](const ImageTensor& img) { return img.squared_norm() == 0.0; });
  if (all_zero) throw data_error("corpus is identically zero");
  FilterBank bank(cfg.k, images.front().channels(), cfg.filter_height, cfg.filter_width);
  for (std::size_t j = 0; j < cfg.k; ++j) {
    const auto patch = detail::draw_unit_patch(images, cfg.filter_height, cfg.filter_width, rng);
    std::copy(patch.begin(), patch.end(), bank.filter(j).begin());
  }
  return bank;
}

inline FilterBank init_filters(std::span<const ImageTensor> images, const TrainConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return init_filters(images, cfg, rng);
}

// For each distinct position where filter j is active, the patch of the data
// with every other activation removed: residual window + c * w_j.
inline ActivatedPatchSet collect_activated_patches(std::size_t image_index, const ImageTensor& residual,
                                                   const SparseCode& code, std::size_t j, const FilterBank& bank) {
  check_image_matches_code(residual, code);
  ActivatedPatchSet set{j, {}};
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> slot;
  for (const Activation& a : code.activations) {
    if (a.filter != j) continue;
    const auto [it, inserted] = slot.try_emplace({a.row, a.col}, set.entries.size());
    if (inserted) {
      set.entries.push_back({image_index, a.row, a.col, a.coefficient, {}});
    } else {
      set.entries[it->second].coefficient += a.coefficient;
    }
  }
  const auto w = bank.filter(j);
  for (ActivatedPatch& e : set.entries) {
    e.patch = extract_patch(residual, e.row, e.col, bank.filter_height(), bank.filter_width());
    for (std::size_t n = 0; n < e.patch.size(); ++n) e.patch[n] += e.coefficient * w[n];
  }
  return set;
}

struct PowerIterationSettings {
  double tolerance = 1e-10;
  std::size_t max_iterations = 10000;
};

// Top left singular direction of the uncentered patch matrix, found by power
// iteration on whichever of E E^T (dim x dim) or E^T E (n x n) is smaller.
// Sign: <result, previous> >= 0 when previous is given and not orthogonal,
// otherwise the first nonzero component is positive. Returns nullopt when
// every patch is zero.
inline std::optional<std::vector<double>> pca_top_component(std::span<const std::vector<double>> patches,
                                                            std::span<const double> previous = {},
                                                            std::uint64_t seed = 0,
                                                            const PowerIterationSettings& settings = {}) {
  if (patches.empty()) return std::nullopt;
  const std::size_t dim = patches.front().size();
  const std::size_t n = patches.size();
  double total = 0.0;
  for (const auto& p : patches) {
    detail::require_dim(p.size() == dim, "patch length", dim, p.size());
    total += detail::squared_norm(p);
  }
  if (total == 0.0) return std::nullopt;

  const bool use_gram = n < dim;
  const std::size_t m = use_gram ? n : dim;
  std::vector<double> M(m * m, 0.0);
  if (use_gram) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a; b < n; ++b) {
        const double v = detail::dot(patches[a], patches[b]);
        M[a * m + b] = v;
        M[b * m + a] = v;
      }
    }
  } else {
    for (const auto& p : patches) {
      for (std::size_t a = 0; a < dim; ++a) {
        const double pa = p[a];
        if (pa == 0.0) continue;
        double* row = M.data() + a * m;
        for (std::size_t b = 0; b < dim; ++b) row[b] += pa * p[b];
      }
    }
  }

  auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t a = 0; a < m; ++a) {
      const double* row = M.data() + a * m;
      double s = 0.0;
      for (std::size_t b = 0; b < m; ++b) s += row[b] * x[b];
      y[a] = s;
    }
  };

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> x(m);
  for (double& v : x) v = normal(rng);
  std::vector<double> y(m);
  apply(x, y);
  if (detail::squared_norm(y) == 0.0) {
    // start happened to be orthogonal to the range; use the strongest patch
    std::fill(x.begin(), x.end(), 0.0);
    std::size_t strongest = 0;
    for (std::size_t a = 1; a < n; ++a) {
      if (detail::squared_norm(patches[a]) > detail::squared_norm(patches[strongest])) strongest = a;
    }
    if (use_gram) {
      x[strongest] = 1.0;
    } else {
      x = patches[strongest];
    }
    apply(x, y);
  }
  {
    const double norm = std::sqrt(detail::squared_norm(y));
    for (std::size_t a = 0; a < m; ++a) x[a] = y[a] / norm;
  }
  for (std::size_t it = 0; it < settings.max_iterations; ++it) {
    apply(x, y);
    const double norm = std::sqrt(detail::squared_norm(y));
    if (norm == 0.0) break;
    double delta = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      const double next = y[a] / norm;
      delta += (next - x[a]) * (next - x[a]);
      x[a] = next;
    }
    if (std::sqrt(delta) <= settings.tolerance) break;
  }

  std::vector<double> dir(dim, 0.0);
  if (use_gram) {
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < dim; ++b) dir[b] += x[a] * patches[a][b];
    }
  } else {
    dir = std::move(x);
  }
  const double dn = std::sqrt(detail::squared_norm(dir));
  if (dn == 0.0) return std::nullopt;
  for (double& v : dir) v /= dn;

  bool flip = false;
  const double ip = previous.size() == dim ? detail::dot(dir, previous) : 0.0;
  if (std::abs(ip) > 1e-12) {
    flip = ip < 0.0;
  } else {
    for (double v : dir) {
      if (std::abs(v) > 1e-12) {
        flip = v < 0.0;
        break;
      }
    }
  }
  if (flip) {
    for (double& v : dir) v = -v;
  }
  return dir;
}

namespace detail {

// Drops every activation of filter j (adding its contribution back into the
// residuals) and replaces w_j by a fresh random data patch.
inline void reinitialize_filter(FilterBank& bank, std::size_t j, CorpusCoding& coding,
                                std::span<const ImageTensor> images, std::mt19937_64& rng) {
  for (std::size_t i = 0; i < coding.codes.size(); ++i) {
    for (Activation& a : coding.codes[i].activations) {
      if (a.filter != j || a.coefficient == 0.0) continue;
      add_placed_filter(coding.residuals[i], bank, j, a.row, a.col, a.coefficient);
      a.coefficient = 0.0;
    }
  }
  const auto patch = draw_unit_patch(images, bank.filter_height(), bank.filter_width(), rng);
  std::copy(patch.begin(), patch.end(), bank.filter(j).begin());
}

}  // namespace detail

// K-SVD style update of filter j: w_j <- PCA(E_p), coefficients refreshed to
// <w_j, E_p>, residuals kept equal to image - reconstruction. Repeated
// (j, p) records collapse onto the first record; later duplicates become 0.
// Falls back to reinitialization when j has fewer than cfg.min_activations
// distinct positions or all its patches are zero.
inline FilterUpdateOutcome update_filter(FilterBank& bank, std::size_t j, const ActivatedPatchSet& set,
                                         CorpusCoding& coding, std::span<const ImageTensor> images,
                                         std::mt19937_64& rng, const TrainConfig& cfg) {
  detail::require_dim(coding.codes.size() == coding.residuals.size(), "residual count", coding.codes.size(),
                      coding.residuals.size());
  const std::uint64_t pca_seed = rng();
  if (set.entries.empty() || set.entries.size() < cfg.min_activations) {
    detail::reinitialize_filter(bank, j, coding, images, rng);
    return FilterUpdateOutcome::reinitialized;
  }

  std::vector<std::vector<double>> patches;
  patches.reserve(set.entries.size());
  for (const ActivatedPatch& e : set.entries) patches.push_back(e.patch);
  const std::vector<double> old(bank.filter(j).begin(), bank.filter(j).end());
  auto fresh = pca_top_component(patches, old, pca_seed);
  if (!fresh) {
    detail::reinitialize_filter(bank, j, coding, images, rng);
    return FilterUpdateOutcome::reinitialized;
  }
  std::copy(fresh->begin(), fresh->end(), bank.filter(j).begin());

  const std::size_t fh = bank.filter_height();
  const std::size_t fw = bank.filter_width();
  std::map<std::size_t, std::map<std::pair<std::size_t, std::size_t>, double>> refreshed;
  for (const ActivatedPatch& e : set.entries) {
    const double c_new = detail::dot(*fresh, e.patch);
    refreshed[e.image][{e.row, e.col}] = c_new;
    ImageTensor& res = coding.residuals.at(e.image);
    std::size_t n = 0;
    for (std::size_t c = 0; c < bank.channels(); ++c) {
      for (std::size_t u = 0; u < fh; ++u) {
        for (std::size_t v = 0; v < fw; ++v, ++n) {
          res(c, e.row + u, e.col + v) += e.coefficient * old[n] - c_new * (*fresh)[n];
        }
      }
    }
  }
  for (auto& [image, positions] : refreshed) {
    std::map<std::pair<std::size_t, std::size_t>, bool> seen;
    for (Activation& a : coding.codes.at(image).activations) {
      if (a.filter != j) continue;
      const auto it = positions.find({a.row, a.col});
      if (it == positions.end()) continue;
      if (seen.try_emplace(it->first, true).second) {
        a.coefficient = it->second;
      } else {
        a.coefficient = 0.0;
      }
    }
  }
  return FilterUpdateOutcome::updated;
}

struct TrainOptions {
  std::size_t threads = 1;
  std::function<void(const EpochStats&)> on_epoch;
};

struct TrainResult {
  FilterBank bank;
  TrainStats stats;
};

// Encodes every image against `bank` in parallel.
inline CorpusCoding encode_corpus(std::span<const ImageTensor> images, const FilterBank& bank,
                                  const ConvMpOptions& options, std::size_t threads) {
  const ShiftGramTable table = build_shift_gram(bank);
  CorpusCoding coding;
  coding.codes.resize(images.size());
  coding.residuals.resize(images.size());
  parallel_for(images.size(), threads, [&](std::size_t i) {
    coding.codes[i] = conv_mp_encode(bank, table, images[i], options);
    coding.residuals[i] = residual(images[i], coding.codes[i], bank);
  });
  return coding;
}

inline double total_energy(const CorpusCoding& coding) {
  double s = 0.0;
  for (const ImageTensor& r : coding.residuals) s += r.squared_norm();
  return s;
}

// Alternates convolutional MP over the corpus with sequential per-filter
// PCA updates (ascending index, each seeing earlier updates).
inline TrainResult train(std::span<const ImageTensor> images, const TrainConfig& cfg,
                         const TrainOptions& options = {}) {
  std::mt19937_64 rng(cfg.seed);
  TrainResult result{init_filters(images, cfg, rng), {}};
  FilterBank& bank = result.bank;
  const ConvMpOptions mp{cfg.q, cfg.residual_tolerance};

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    CorpusCoding coding = encode_corpus(images, bank, mp, options.threads);
    EpochStats es;
    es.epoch = epoch;
    es.energy = total_energy(coding);
    es.activation_counts.assign(cfg.k, 0);
    for (const SparseCode& code : coding.codes) {
      for (const Activation& a : code.activations) ++es.activation_counts[a.filter];
    }

    std::vector<ActivatedPatchSet> per_image(images.size());
    for (std::size_t j = 0; j < cfg.k; ++j) {
      parallel_for(images.size(), options.threads, [&](std::size_t i) {
        per_image[i] = collect_activated_patches(i, coding.residuals[i], coding.codes[i], j, bank);
      });
      ActivatedPatchSet set{j, {}};
      for (auto& s : per_image) {
        std::move(s.entries.begin(), s.entries.end(), std::back_inserter(set.entries));
      }
      const std::size_t uses = set.entries.size();
      if (update_filter(bank, j, set, coding, images, rng, cfg) == FilterUpdateOutcome::reinitialized) {
        ++es.reinit_count;
        result.stats.reinit_events.push_back({epoch, j, uses});
      }
    }
    if (es.reinit_count == cfg.k) {
      throw data_error("every filter was unused in epoch " + std::to_string(epoch) +
                       "; the corpus cannot support this configuration");
    }
    es.updated_energy = total_energy(coding);
    if (options.on_epoch) options.on_epoch(es);
    result.stats.epochs.push_back(std::move(es));
  }
  return result;
}

}  // namespace cmpdict
