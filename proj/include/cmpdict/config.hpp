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
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "cmpdict/core.hpp"
#include "cmpdict/feature_pipeline.hpp"

namespace cmpdict {

// Line-based `key=value` text; '#' starts a comment, blank lines are ignored.
using KeyValues = std::vector<std::pair<std::string, std::string>>;

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string_view::npos) return {};
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline KeyValues parse_key_values(const std::string& text, const std::string& name = "config") {
  KeyValues out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find('\n', start), text.size());
    ++line_no;
    std::string_view line(text.data() + start, end - start);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw config_error(name + ":" + std::to_string(line_no) + ": expected key=value");
      }
      const auto key = detail::trim(line.substr(0, eq));
      if (key.empty()) throw config_error(name + ":" + std::to_string(line_no) + ": empty key");
      out.emplace_back(std::string(key), std::string(detail::trim(line.substr(eq + 1))));
    }
    if (end == text.size()) break;
    start = end + 1;
  }
  return out;
}

inline std::size_t parse_count(std::string_view s, std::string_view what) {
  std::size_t v = 0;
  s = detail::trim(s);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw config_error(std::string(what) + ": expected an unsigned integer, got '" + std::string(s) + "'");
  }
  return v;
}

inline double parse_real(std::string_view s, std::string_view what) {
  double v = 0.0;
  s = detail::trim(s);
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || p != s.data() + s.size()) {
    throw config_error(std::string(what) + ": expected a number, got '" + std::string(s) + "'");
  }
  return v;
}

inline bool parse_flag(std::string_view s, std::string_view what) {
  s = detail::trim(s);
  if (s == "1" || s == "true" || s == "yes" || s == "on") return true;
  if (s == "0" || s == "false" || s == "no" || s == "off") return false;
  throw config_error(std::string(what) + ": expected a boolean, got '" + std::string(s) + "'");
}

// "HxW" or a single "N" meaning NxN.
inline std::pair<std::size_t, std::size_t> parse_dims(std::string_view s, std::string_view what) {
  s = detail::trim(s);
  const auto x = s.find_first_of("xX");
  if (x == std::string_view::npos) {
    const std::size_t n = parse_count(s, what);
    return {n, n};
  }
  return {parse_count(s.substr(0, x), what), parse_count(s.substr(x + 1), what)};
}

inline std::vector<std::size_t> parse_count_list(std::string_view s, std::string_view what) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(parse_count(s.substr(0, comma), what));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

// Applies one training key (without any "layerN." prefix). Returns false if
// the key is not a training parameter.
inline bool apply_train_key(TrainConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "k") {
    cfg.k = parse_count(value, key);
  } else if (key == "filter") {
    std::tie(cfg.filter_height, cfg.filter_width) = parse_dims(value, key);
  } else if (key == "q") {
    cfg.q = parse_count(value, key);
  } else if (key == "epochs") {
    cfg.epochs = parse_count(value, key);
  } else if (key == "seed") {
    cfg.seed = parse_count(value, key);
  } else if (key == "residual_tolerance") {
    cfg.residual_tolerance = parse_real(value, key);
  } else if (key == "min_activations") {
    cfg.min_activations = parse_count(value, key);
  } else {
    return false;
  }
  return true;
}

// Keys a manifest records for provenance only.
inline bool is_manifest_key(std::string_view key) {
  return key == "tool_version" || key == "command" || key == "corpus" || key == "out" || key == "threads" ||
         key == "preprocessed";
}

inline void apply_train_config(TrainConfig& cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    if (apply_train_key(cfg, key, value) || is_manifest_key(key)) continue;
    throw config_error("unknown training key '" + key + "'");
  }
}

inline void apply_pipeline_config(PipelineConfig& cfg, const KeyValues& kv) {
  for (const auto& [key, value] : kv) {
    const std::string_view k(key);
    if (k.starts_with("layer1.")) {
      if (k.substr(7) != "seed" && apply_train_key(cfg.layer1, k.substr(7), value)) continue;
    } else if (k.starts_with("layer2.")) {
      if (k.substr(7) != "seed" && apply_train_key(cfg.layer2, k.substr(7), value)) continue;
    } else if (k == "seed") {
      cfg.seed = parse_count(value, k);
      continue;
    } else if (k == "pool") {
      cfg.pool_size = parse_count(value, k);
      continue;
    } else if (k == "size") {
      std::tie(cfg.preprocess.height, cfg.preprocess.width) = parse_dims(value, k);
      continue;
    } else if (k == "pascal_crop") {
      cfg.preprocess.random_crop = parse_flag(value, k);
      continue;
    } else if (k == "box") {
      cfg.preprocess.box.side = parse_count(value, k);
      continue;
    } else if (is_manifest_key(k)) {
      continue;
    }
    throw config_error("unknown pipeline key '" + key + "'");
  }
}

inline std::string describe_train_config(const TrainConfig& cfg, std::string_view prefix = "", bool with_seed = true) {
  const std::string p(prefix);
  std::string out;
  out += p + "k=" + std::to_string(cfg.k) + "\n";
  out += p + "filter=" + std::to_string(cfg.filter_height) + "x" + std::to_string(cfg.filter_width) + "\n";
  out += p + "q=" + std::to_string(cfg.q) + "\n";
  out += p + "epochs=" + std::to_string(cfg.epochs) + "\n";
  if (with_seed) out += p + "seed=" + std::to_string(cfg.seed) + "\n";
  out += p + "residual_tolerance=" + detail::format_double(cfg.residual_tolerance) + "\n";
  out += p + "min_activations=" + std::to_string(cfg.min_activations) + "\n";
  return out;
}

inline std::string describe_pipeline_config(const PipelineConfig& cfg) {
  std::string out;
  out += "seed=" + std::to_string(cfg.seed) + "\n";
  out += "size=" + std::to_string(cfg.preprocess.height) + "x" + std::to_string(cfg.preprocess.width) + "\n";
  out += std::string("pascal_crop=") + (cfg.preprocess.random_crop ? "true" : "false") + "\n";
  out += "box=" + std::to_string(cfg.preprocess.box.side) + "\n";
  out += "pool=" + std::to_string(cfg.pool_size) + "\n";
  out += describe_train_config(cfg.layer1, "layer1.", false);
  out += describe_train_config(cfg.layer2, "layer2.", false);
  return out;
}

}  // namespace cmpdict
