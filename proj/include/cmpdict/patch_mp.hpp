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
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmpdict/error.hpp"

namespace cmpdict {

// Explicit d x K dictionary with unit-norm columns, stored column by column.
class Dictionary {
 public:
  static constexpr double unit_norm_tolerance = 1e-10;

  Dictionary(std::size_t dim, std::size_t count, std::vector<double> atoms)
      : dim_(dim), count_(count), atoms_(std::move(atoms)) {
    if (dim_ == 0 || count_ == 0) throw config_error("dictionary dimensions must be positive");
    detail::require_dim(atoms_.size() == dim_ * count_, "dictionary value count", dim_ * count_, atoms_.size());
    for (std::size_t i = 0; i < count_; ++i) {
      double s = 0.0;
      for (double v : atom(i)) s += v * v;
      if (std::abs(std::sqrt(s) - 1.0) > unit_norm_tolerance) {
        throw data_error("dictionary atom " + std::to_string(i) + " is not unit norm");
      }
    }
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t count() const noexcept { return count_; }

  std::span<const double> atom(std::size_t i) const noexcept {
    return std::span<const double>(atoms_).subspan(i * dim_, dim_);
  }

 private:
  std::size_t dim_;
  std::size_t count_;
  std::vector<double> atoms_;
};

// K x K matrix of atom inner products, row-major.
struct GramMatrix {
  std::size_t count = 0;
  std::vector<double> entries;

  double operator()(std::size_t i, std::size_t j) const noexcept { return entries[i * count + j]; }
  std::span<const double> row(std::size_t i) const noexcept {
    return std::span<const double>(entries).subspan(i * count, count);
  }
};

struct PatchStep {
  std::size_t atom = 0;
  double increment = 0.0;

  friend bool operator==(const PatchStep&, const PatchStep&) = default;
};

struct PatchCode {
  std::vector<double> coefficients;  // length K, sum of increments per atom
  std::vector<PatchStep> steps;      // selection order
  std::vector<double> residual;      // final residual e_q
  std::vector<double> energies;      // ||e_r||^2 for r = 0..q
  // Number of full W^T v products evaluated (one per step for the plain
  // variant, one in total for the Gram variant).
  std::size_t full_products = 0;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) noexcept { return dot(a, a); }

// argmax_i |values[i]|, lowest index on ties.
inline std::size_t argmax_abs(std::span<const double> values) noexcept {
  std::size_t best = 0;
  double best_abs = std::abs(values[0]);
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double v = std::abs(values[i]);
    if (v > best_abs) {
      best_abs = v;
      best = i;
    }
  }
  return best;
}

inline void check_mp_args(const Dictionary& dict, std::span<const double> signal, std::size_t q) {
  if (q < 1) throw config_error("matching pursuit needs q >= 1");
  require_dim(signal.size() == dict.dim(), "signal length", dict.dim(), signal.size());
}

}  // namespace detail

// Plain matching pursuit: q greedy steps, each recomputing W^T e.
inline PatchCode mp_encode(const Dictionary& dict, std::span<const double> signal, std::size_t q) {
  detail::check_mp_args(dict, signal, q);
  PatchCode code;
  code.coefficients.assign(dict.count(), 0.0);
  code.residual.assign(signal.begin(), signal.end());
  code.energies.push_back(detail::squared_norm(code.residual));

  std::vector<double> corr(dict.count());
  for (std::size_t step = 0; step < q; ++step) {
    for (std::size_t i = 0; i < dict.count(); ++i) corr[i] = detail::dot(dict.atom(i), code.residual);
    ++code.full_products;
    const std::size_t j = detail::argmax_abs(corr);
    const double a = corr[j];
    const auto atom = dict.atom(j);
    for (std::size_t n = 0; n < dict.dim(); ++n) code.residual[n] -= a * atom[n];
    code.coefficients[j] += a;
    code.steps.push_back({j, a});
    code.energies.push_back(detail::squared_norm(code.residual));
  }
  return code;
}

inline GramMatrix gram_matrix(const Dictionary& dict) {
  GramMatrix g{dict.count(), std::vector<double>(dict.count() * dict.count())};
  for (std::size_t i = 0; i < dict.count(); ++i) {
    for (std::size_t j = i; j < dict.count(); ++j) {
      const double v = detail::dot(dict.atom(i), dict.atom(j));
      g.entries[i * g.count + j] = v;
      g.entries[j * g.count + i] = v;
    }
  }
  return g;
}

// Matching pursuit with Gram bookkeeping: W^T x is formed once and the
// correlation vector is then updated by W^T e_{r+1} = W^T e_r - a_r G[j_r].
// The residual itself is still carried (O(d) per step) so it can be exposed.
inline PatchCode mp_encode_gram(const Dictionary& dict, const GramMatrix& gram, std::span<const double> signal,
                                std::size_t q) {
  detail::check_mp_args(dict, signal, q);
  detail::require_dim(gram.count == dict.count(), "gram matrix size", dict.count(), gram.count);
  detail::require_dim(gram.entries.size() == dict.count() * dict.count(), "gram matrix entry count",
                      dict.count() * dict.count(), gram.entries.size());

  PatchCode code;
  code.coefficients.assign(dict.count(), 0.0);
  code.residual.assign(signal.begin(), signal.end());
  code.energies.push_back(detail::squared_norm(code.residual));

  std::vector<double> corr(dict.count());
  for (std::size_t i = 0; i < dict.count(); ++i) corr[i] = detail::dot(dict.atom(i), signal);
  code.full_products = 1;

  for (std::size_t step = 0; step < q; ++step) {
    const std::size_t j = detail::argmax_abs(corr);
    const double a = corr[j];
    const auto g = gram.row(j);
    for (std::size_t i = 0; i < dict.count(); ++i) corr[i] -= a * g[i];
    const auto atom = dict.atom(j);
    for (std::size_t n = 0; n < dict.dim(); ++n) code.residual[n] -= a * atom[n];
    code.coefficients[j] += a;
    code.steps.push_back({j, a});
    code.energies.push_back(detail::squared_norm(code.residual));
  }
  return code;
}

}  // namespace cmpdict
