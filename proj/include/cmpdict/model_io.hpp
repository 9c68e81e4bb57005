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
#include <bit>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cmpdict/core.hpp"

namespace cmpdict {

// ---------------------------------------------------------------------------
// Binary bank / tensor files
//
//   magic   "CMPD1"                5 bytes
//   version uint32 LE (= 1)
//   k, c, h, w uint32 LE each
//   payload k*c*h*w float64 LE, filter-major, channel-major, row-major
//
// A signed image sidecar is the same layout with k = 1.
// ---------------------------------------------------------------------------

inline constexpr std::string_view bank_magic = "CMPD1";
inline constexpr std::uint32_t bank_version = 1;
inline constexpr std::size_t bank_header_size = 5 + 5 * 4;

struct BankFileHeader {
  std::uint32_t version = bank_version;
  std::uint32_t k = 0;
  std::uint32_t c = 0;
  std::uint32_t h = 0;
  std::uint32_t w = 0;

  std::size_t payload_bytes() const noexcept { return std::size_t(k) * c * h * w * 8; }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xffu));
}

inline std::uint32_t get_u32(const unsigned char* p) noexcept {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
}

inline double get_f64(const unsigned char* p) noexcept {
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) bits = (bits << 8) | p[b];
  return std::bit_cast<double>(bits);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), {});
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw data_error("write failed for " + path.string());
}

inline std::uint32_t checked_u32(std::size_t v, const char* what) {
  if (v > 0xffffffffu) throw config_error(std::string(what) + " does not fit in 32 bits");
  return static_cast<std::uint32_t>(v);
}

inline std::string encode_block(const BankFileHeader& h, std::span<const double> values) {
  std::string out(bank_magic);
  put_u32(out, h.version);
  put_u32(out, h.k);
  put_u32(out, h.c);
  put_u32(out, h.h);
  put_u32(out, h.w);
  out.reserve(out.size() + values.size() * 8);
  for (double v : values) put_f64(out, v);
  return out;
}

inline std::pair<BankFileHeader, std::vector<double>> decode_block(const std::string& bytes, const std::string& name) {
  if (bytes.size() < bank_header_size) throw data_error(name + ": file too short for header");
  if (std::string_view(bytes).substr(0, 5) != bank_magic) throw data_error(name + ": bad magic");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + 5;
  BankFileHeader h{get_u32(p), get_u32(p + 4), get_u32(p + 8), get_u32(p + 12), get_u32(p + 16)};
  if (h.version != bank_version) throw data_error(name + ": unsupported version " + std::to_string(h.version));
  if (h.k == 0 || h.c == 0 || h.h == 0 || h.w == 0) throw data_error(name + ": zero dimension in header");
  const std::size_t payload = bytes.size() - bank_header_size;
  if (payload != h.payload_bytes()) {
    throw data_error(name + ": payload length " + std::to_string(payload) + " bytes, header implies " +
                     std::to_string(h.payload_bytes()));
  }
  std::vector<double> values(payload / 8);
  const auto* q = reinterpret_cast<const unsigned char*>(bytes.data()) + bank_header_size;
  for (std::size_t n = 0; n < values.size(); ++n) values[n] = get_f64(q + 8 * n);
  return {h, std::move(values)};
}

}  // namespace detail

inline std::string encode_bank(const FilterBank& bank) {
  const BankFileHeader h{bank_version, detail::checked_u32(bank.count(), "k"), detail::checked_u32(bank.channels(), "c"),
                         detail::checked_u32(bank.filter_height(), "h_f"),
                         detail::checked_u32(bank.filter_width(), "w_f")};
  return detail::encode_block(h, bank.values());
}

inline FilterBank decode_bank(const std::string& bytes, const std::string& name = "bank") {
  auto [h, values] = detail::decode_block(bytes, name);
  FilterBank bank(h.k, h.c, h.h, h.w, std::move(values));
  for (std::size_t j = 0; j < bank.count(); ++j) {
    if (std::abs(bank.filter_norm(j) - 1.0) > 1e-6) {
      throw data_error(name + ": filter " + std::to_string(j) + " is not unit norm (corrupt model)");
    }
  }
  return bank;
}

inline void save_bank(const FilterBank& bank, const std::filesystem::path& path) {
  detail::write_file(path, encode_bank(bank));
}

inline FilterBank load_bank(const std::filesystem::path& path) {
  return decode_bank(detail::read_file(path), path.string());
}

inline void save_tensor(const ImageTensor& t, const std::filesystem::path& path) {
  const BankFileHeader h{bank_version, 1, detail::checked_u32(t.channels(), "c"), detail::checked_u32(t.height(), "h"),
                         detail::checked_u32(t.width(), "w")};
  detail::write_file(path, detail::encode_block(h, t.samples()));
}

inline ImageTensor load_tensor(const std::filesystem::path& path) {
  auto [h, values] = detail::decode_block(detail::read_file(path), path.string());
  if (h.k != 1) throw data_error(path.string() + ": tensor file must have k = 1, found " + std::to_string(h.k));
  return ImageTensor(h.c, h.h, h.w, std::move(values));
}

// ---------------------------------------------------------------------------
// Binary PGM (P5) / PPM (P6), 8-bit
// ---------------------------------------------------------------------------

namespace detail {

struct NetpbmCursor {
  const std::string& bytes;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      const char ch = bytes[pos];
      if (ch == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r' || ch == '\v' || ch == '\f') {
        ++pos;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const std::string& name) {
    skip_space_and_comments();
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(bytes.data() + pos, bytes.data() + bytes.size(), v);
    if (ec != std::errc() || ptr == bytes.data() + pos) throw data_error(name + ": malformed netpbm header");
    pos = static_cast<std::size_t>(ptr - bytes.data());
    return v;
  }
};

}  // namespace detail

inline ImageTensor decode_netpbm(const std::string& bytes, const std::string& name = "image") {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw data_error(name + ": unsupported image format (need binary P5 or P6)");
  }
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  detail::NetpbmCursor cur{bytes, 2};
  const std::size_t width = cur.read_uint(name);
  const std::size_t height = cur.read_uint(name);
  const std::size_t maxval = cur.read_uint(name);
  if (maxval == 0 || maxval > 255) throw data_error(name + ": unsupported bit depth (maxval " + std::to_string(maxval) + ")");
  if (width == 0 || height == 0) throw data_error(name + ": zero image dimension");
  if (cur.pos >= bytes.size()) throw data_error(name + ": missing raster");
  ++cur.pos;  // single whitespace byte after maxval
  const std::size_t n = width * height * channels;
  if (bytes.size() - cur.pos < n) throw data_error(name + ": truncated raster");

  ImageTensor img(channels, height, width);
  const auto* raster = reinterpret_cast<const unsigned char*>(bytes.data()) + cur.pos;
  const auto maxv = static_cast<double>(maxval);
  for (std::size_t r = 0; r < height; ++r) {
    for (std::size_t c = 0; c < width; ++c) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        img(ch, r, c) = static_cast<double>(raster[(r * width + c) * channels + ch]) / maxv;
      }
    }
  }
  return img;
}

inline ImageTensor load_image(const std::filesystem::path& path) {
  return decode_netpbm(detail::read_file(path), path.string());
}

inline std::uint8_t quantize_unit(double v) noexcept {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

// Samples are clamped to [0, 1] and quantized to 8 bits. 1 channel -> P5,
// 3 channels -> P6.
inline std::string encode_netpbm(const ImageTensor& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw config_error("netpbm output needs 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  std::string out = (img.channels() == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  out.reserve(out.size() + img.size());
  for (std::size_t r = 0; r < img.height(); ++r) {
    for (std::size_t c = 0; c < img.width(); ++c) {
      for (std::size_t ch = 0; ch < img.channels(); ++ch) out.push_back(static_cast<char>(quantize_unit(img(ch, r, c))));
    }
  }
  return out;
}

inline void save_image(const ImageTensor& img, const std::filesystem::path& path) {
  detail::write_file(path, encode_netpbm(img));
}

// (x - min) / (max - min) over all samples; constant input maps to 0.5.
inline ImageTensor rescale_to_unit(ImageTensor t) {
  const auto [mn, mx] = std::minmax_element(t.samples().begin(), t.samples().end());
  const double lo = *mn;
  const double hi = *mx;
  for (double& v : t.samples()) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
  return t;
}

inline void save_signed_image(const ImageTensor& img, const std::filesystem::path& path) {
  save_image(rescale_to_unit(img), path);
}

// ---------------------------------------------------------------------------
// Filter grid
// ---------------------------------------------------------------------------

struct GridLayout {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t cell_height = 0;
  std::size_t cell_width = 0;
  std::size_t height = 0;  // before scaling
  std::size_t width = 0;
};

inline GridLayout filter_grid_layout(const FilterBank& bank) {
  GridLayout g;
  g.cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(bank.count()))));
  while (g.cols * g.cols < bank.count()) ++g.cols;
  while (g.cols > 1 && (g.cols - 1) * (g.cols - 1) >= bank.count()) --g.cols;
  g.rows = (bank.count() + g.cols - 1) / g.cols;
  g.cell_height = bank.filter_height();
  // channels side by side, separated by one pixel
  g.cell_width = bank.channels() * (bank.filter_width() + 1) - 1;
  g.height = g.rows * (g.cell_height + 1) + 1;
  g.width = g.cols * (g.cell_width + 1) + 1;
  return g;
}

// Tiles the filters row by row with 1-pixel black separators. Each filter is
// independently mapped to [0, 1]; unused cells are mid-gray. Every pixel is
// then replicated `scale` x `scale` times.
inline ImageTensor render_filter_grid(const FilterBank& bank, std::size_t scale = 1) {
  if (scale == 0) throw config_error("grid scale must be positive");
  const GridLayout g = filter_grid_layout(bank);
  ImageTensor grid(1, g.height, g.width, 0.0);
  for (std::size_t cell = 0; cell < g.rows * g.cols; ++cell) {
    const std::size_t top = (cell / g.cols) * (g.cell_height + 1) + 1;
    const std::size_t left = (cell % g.cols) * (g.cell_width + 1) + 1;
    if (cell >= bank.count()) {
      for (std::size_t r = 0; r < g.cell_height; ++r) {
        for (std::size_t c = 0; c < g.cell_width; ++c) grid(0, top + r, left + c) = 0.5;
      }
      continue;
    }
    const auto f = bank.filter(cell);
    const auto [mn, mx] = std::minmax_element(f.begin(), f.end());
    const double lo = *mn;
    const double hi = *mx;
    for (std::size_t ch = 0; ch < bank.channels(); ++ch) {
      const std::size_t x0 = left + ch * (bank.filter_width() + 1);
      for (std::size_t r = 0; r < bank.filter_height(); ++r) {
        for (std::size_t c = 0; c < bank.filter_width(); ++c) {
          const double v = bank(cell, ch, r, c);
          grid(0, top + r, x0 + c) = hi > lo ? (v - lo) / (hi - lo) : 0.5;
        }
      }
    }
  }
  if (scale == 1) return grid;
  ImageTensor big(1, g.height * scale, g.width * scale);
  for (std::size_t r = 0; r < big.height(); ++r) {
    for (std::size_t c = 0; c < big.width(); ++c) big(0, r, c) = grid(0, r / scale, c / scale);
  }
  return big;
}

inline void save_filter_grid(const FilterBank& bank, std::size_t scale, const std::filesystem::path& path) {
  save_image(render_filter_grid(bank, scale), path);
}

// ---------------------------------------------------------------------------
// Sparse code text format
//
//   cmpcode 1 <channels> <height> <width> <count>
//   <filter> <row> <col> <coefficient>      (count lines, selection order)
// ---------------------------------------------------------------------------

inline std::string encode_code(const SparseCode& code) {
  std::string out = "cmpcode 1 " + std::to_string(code.channels) + " " + std::to_string(code.image_height) + " " +
                    std::to_string(code.image_width) + " " + std::to_string(code.activations.size()) + "\n";
  char buf[64];
  for (const Activation& a : code.activations) {
    std::snprintf(buf, sizeof buf, "%.17g", a.coefficient);
    out += std::to_string(a.filter) + " " + std::to_string(a.row) + " " + std::to_string(a.col) + " " + buf + "\n";
  }
  return out;
}

inline SparseCode decode_code(const std::string& text, const std::string& name = "code") {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw data_error(name + ":" + std::to_string(line_no) + ": " + why);
  };
  auto parse_fields = [&](const std::string& s) {
    std::vector<std::string_view> fields;
    std::string_view sv(s);
    while (!sv.empty()) {
      const std::size_t a = sv.find_first_not_of(" \t\r");
      if (a == std::string_view::npos) break;
      sv.remove_prefix(a);
      const std::size_t b = sv.find_first_of(" \t\r");
      fields.push_back(sv.substr(0, b));
      if (b == std::string_view::npos) break;
      sv.remove_prefix(b);
    }
    return fields;
  };
  auto to_size = [&](std::string_view f) {
    std::size_t v = 0;
    const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size()) fail("expected an unsigned integer, got '" + std::string(f) + "'");
    return v;
  };
  auto to_double = [&](std::string_view f) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (ec != std::errc() || p != f.data() + f.size() || !std::isfinite(v)) {
      fail("expected a finite number, got '" + std::string(f) + "'");
    }
    return v;
  };

  ++line_no;
  if (!std::getline(in, line)) fail("missing header");
  const auto head = parse_fields(line);
  if (head.size() != 6 || head[0] != "cmpcode" || head[1] != "1") fail("bad header");
  SparseCode code{to_size(head[2]), to_size(head[3]), to_size(head[4]), {}};
  const std::size_t count = to_size(head[5]);
  code.activations.reserve(count);
  while (std::getline(in, line)) {
    ++line_no;
    const auto f = parse_fields(line);
    if (f.empty()) continue;
    if (f.size() != 4) fail("expected 'filter row col coefficient'");
    code.activations.push_back({to_size(f[0]), to_size(f[1]), to_size(f[2]), to_double(f[3])});
  }
  if (code.activations.size() != count) {
    throw data_error(name + ": header declares " + std::to_string(count) + " records, found " +
                     std::to_string(code.activations.size()));
  }
  return code;
}

inline void save_code(const SparseCode& code, const std::filesystem::path& path) {
  detail::write_file(path, encode_code(code));
}

inline SparseCode load_code(const std::filesystem::path& path) {
  return decode_code(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Corpus directories
// ---------------------------------------------------------------------------

// Regular files in `dir` with one of the given extensions, sorted by name.
inline std::vector<std::filesystem::path> list_files(const std::filesystem::path& dir,
                                                     std::initializer_list<std::string_view> extensions) {
  if (!std::filesystem::is_directory(dir)) throw data_error(dir.string() + " is not a directory");
  std::vector<std::filesystem::path> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (std::find(extensions.begin(), extensions.end(), ext) != extensions.end()) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

inline constexpr std::string_view tensor_extension = ".cmpt";

}  // namespace cmpdict
