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

#include <stdexcept>
#include <string>

namespace cmpdict {

// Error hierarchy. The CLI maps each family onto a distinct exit code.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad parameters, incompatible shapes, malformed configuration.
class config_error : public error {
 public:
  using error::error;
};

// Shape disagreement between two objects; names the offending field.
class dimension_error : public config_error {
 public:
  using config_error::config_error;
};

// Unreadable, corrupt or degenerate input data.
class data_error : public error {
 public:
  using error::error;
};

// A numeric invariant that should hold by construction was violated.
class invariant_error : public error {
 public:
  using error::error;
};

namespace detail {

inline void require_dim(bool ok, const std::string& field, std::size_t expected, std::size_t actual) {
  if (!ok) {
    throw dimension_error(field + ": expected " + std::to_string(expected) + ", got " +
                          std::to_string(actual));
  }
}

}  // namespace detail
}  // namespace cmpdict
