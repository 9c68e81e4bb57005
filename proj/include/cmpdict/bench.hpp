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
#include <chrono>
#include <cstdint>
#include <random>
#include <vector>

#include "cmpdict/conv_mp.hpp"

namespace cmpdict {

struct BenchSpec {
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t k = 8;
  std::size_t filter_height = 16;
  std::size_t filter_width = 16;
  std::vector<std::size_t> qs{50, 100, 200};
  std::size_t repeat = 20;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::size_t q = 0;
  std::size_t steps = 0;
  double median_ns = 0.0;
  double per_step_ns = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::vector<double> ratios;  // median time of row i+1 over row i
};

inline FilterBank random_unit_bank(std::size_t k, std::size_t c, std::size_t fh, std::size_t fw, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  FilterBank bank(k, c, fh, fw);
  for (std::size_t j = 0; j < k; ++j) {
    for (double& v : bank.filter(j)) v = normal(rng);
  }
  return normalize_filters(std::move(bank));
}

inline ImageTensor random_image(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  ImageTensor img(c, h, w);
  for (double& v : img.samples()) v = normal(rng);
  return img;
}

// Times only the greedy loop that follows the single correlation pass, on a
// random image and random unit filters.
inline BenchReport bench_greedy_loop(const BenchSpec& spec) {
  if (spec.qs.empty() || spec.repeat == 0) throw config_error("bench needs at least one q and one repeat");
  std::mt19937_64 rng(spec.seed);
  const FilterBank bank = random_unit_bank(spec.k, 1, spec.filter_height, spec.filter_width, rng);
  const ImageTensor image = random_image(1, spec.height, spec.width, rng);
  const ShiftGramTable table = build_shift_gram(bank);
  const CorrelationMaps initial = correlate(bank, image);

  BenchReport report;
  for (std::size_t q : spec.qs) {
    std::vector<double> times;
    std::size_t steps = 0;
    for (std::size_t rep = 0; rep < spec.repeat; ++rep) {
      CorrelationMaps maps = initial;
      const auto t0 = std::chrono::steady_clock::now();
      const auto acts = conv_mp_pursue(maps, table, ConvMpOptions{q, 0.0});
      const auto t1 = std::chrono::steady_clock::now();
      steps = acts.size();
      times.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    double median = times[times.size() / 2];
    if (times.size() % 2 == 0) {
      const double lower = *std::max_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2));
      median = 0.5 * (median + lower);
    }
    report.rows.push_back({q, steps, median, steps ? median / static_cast<double>(steps) : 0.0});
  }
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    report.ratios.push_back(report.rows[i].median_ns / report.rows[i - 1].median_ns);
  }
  return report;
}

}  // namespace cmpdict
