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
#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>

#include "cmpdict/model_io.hpp"
#include "support/oracles.hpp"

namespace cmpdict {
namespace {

namespace fs = std::filesystem;
using testing::gaussian_unit_bank;
using testing::make_rng;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("cmpdict_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                         "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

TEST(BankIo, RoundTripIsBitExact) {
  TempDir dir;
  auto rng = make_rng(81);
  for (int trial = 0; trial < 10; ++trial) {
    const FilterBank bank = gaussian_unit_bank(1 + trial % 4, 1 + trial % 3, 2 + trial, 3 + trial % 2, rng);
    save_bank(bank, dir.path() / "b.bank");
    const FilterBank back = load_bank(dir.path() / "b.bank");
    ASSERT_EQ(back.count(), bank.count());
    ASSERT_EQ(back.channels(), bank.channels());
    ASSERT_EQ(back.filter_height(), bank.filter_height());
    ASSERT_EQ(back.filter_width(), bank.filter_width());
    for (std::size_t n = 0; n < bank.values().size(); ++n) {
      EXPECT_EQ(std::bit_cast<std::uint64_t>(back.values()[n]), std::bit_cast<std::uint64_t>(bank.values()[n]));
    }
  }
}

TEST(BankIo, HeaderLayoutAndPayloadSize) {
  auto rng = make_rng(82);
  const FilterBank bank = gaussian_unit_bank(8, 1, 16, 16, rng);
  const std::string bytes = encode_bank(bank);
  EXPECT_EQ(bytes.size() - bank_header_size, 16384u);
  EXPECT_EQ(bytes.substr(0, 5), "CMPD1");
  const unsigned char expect[20] = {1, 0, 0, 0, 8, 0, 0, 0, 1, 0, 0, 0, 16, 0, 0, 0, 16, 0, 0, 0};
  EXPECT_EQ(std::memcmp(bytes.data() + 5, expect, 20), 0);
  // first payload value, little-endian
  const auto bits = std::bit_cast<std::uint64_t>(bank.values()[0]);
  for (int b = 0; b < 8; ++b) {
    EXPECT_EQ(static_cast<unsigned char>(bytes[25 + b]), static_cast<unsigned char>(bits >> (8 * b)));
  }
}

TEST(BankIo, RejectsCorruption) {
  auto rng = make_rng(83);
  const std::string good = encode_bank(gaussian_unit_bank(2, 1, 3, 3, rng));
  EXPECT_THROW(decode_bank(good.substr(0, good.size() - 1)), data_error);
  EXPECT_THROW(decode_bank(good.substr(0, 10)), data_error);
  EXPECT_THROW(decode_bank(good + "x"), data_error);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(decode_bank(magic), data_error);
  std::string version = good;
  version[5] = 2;
  EXPECT_THROW(decode_bank(version), data_error);
  try {
    decode_bank(good.substr(0, good.size() - 8));
    ADD_FAILURE() << "truncated bank accepted";
  } catch (const data_error& e) {
    EXPECT_NE(std::string(e.what()).find("payload length"), std::string::npos);
  }
}

TEST(BankIo, RejectsNonUnitFilters) {
  FilterBank bank(2, 1, 1, 2, std::vector<double>{0.6, 0.8, 1.0, 0.1});
  EXPECT_THROW(decode_bank(encode_bank(bank)), data_error);
  FilterBank near(1, 1, 1, 2, std::vector<double>{0.6, 0.8 + 1e-9});
  EXPECT_NO_THROW(decode_bank(encode_bank(near)));
}

TEST(TensorIo, SidecarRoundTrip) {
  TempDir dir;
  auto rng = make_rng(84);
  const ImageTensor t = testing::gaussian_image(3, 5, 7, rng);
  save_tensor(t, dir.path() / "t.cmpt");
  EXPECT_EQ(load_tensor(dir.path() / "t.cmpt"), t);
  auto bank = gaussian_unit_bank(2, 1, 2, 2, rng);
  save_bank(bank, dir.path() / "two.bank");
  EXPECT_THROW(load_tensor(dir.path() / "two.bank"), data_error);
}

TEST(NetpbmIo, AllWhiteLoadsAsOne) {
  const std::string p5 = "P5\n# comment\n3 2\n255\n" + std::string(6, static_cast<char>(255));
  const ImageTensor img = decode_netpbm(p5);
  EXPECT_EQ(img.channels(), 1u);
  EXPECT_EQ(img.height(), 2u);
  EXPECT_EQ(img.width(), 3u);
  for (double v : img.samples()) EXPECT_EQ(v, 1.0);
}

TEST(NetpbmIo, P5RoundTripIsByteIdentical) {
  TempDir dir;
  auto rng = make_rng(85);
  std::uniform_int_distribution<int> byte(0, 255);
  std::string raster;
  for (int i = 0; i < 13 * 9; ++i) raster.push_back(static_cast<char>(byte(rng)));
  const std::string file = "P5\n13 9\n255\n" + raster;
  std::ofstream(dir.path() / "in.pgm", std::ios::binary) << file;
  save_image(load_image(dir.path() / "in.pgm"), dir.path() / "out.pgm");
  EXPECT_EQ(detail::read_file(dir.path() / "out.pgm"), file);
}

TEST(NetpbmIo, P6MatchesByteDecoder) {
  auto rng = make_rng(86);
  std::uniform_int_distribution<int> byte(0, 255);
  const std::size_t w = 5, h = 4;
  std::vector<unsigned char> raw(w * h * 3);
  for (auto& b : raw) b = static_cast<unsigned char>(byte(rng));
  const std::string file = "P6 5 4 255\n" + std::string(raw.begin(), raw.end());
  const ImageTensor img = decode_netpbm(file);
  ASSERT_EQ(img.channels(), 3u);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::size_t pixel = i / 3, ch = i % 3;
    EXPECT_EQ(img(ch, pixel / w, pixel % w), raw[i] / 255.0);
  }
  EXPECT_EQ(encode_netpbm(img).substr(encode_netpbm(img).size() - raw.size()), std::string(raw.begin(), raw.end()));
}

TEST(NetpbmIo, RejectsUnsupported) {
  EXPECT_THROW(decode_netpbm("P2\n1 1\n255\n0"), data_error);
  EXPECT_THROW(decode_netpbm("P5\n1 1\n65535\n\0\0"), data_error);
  EXPECT_THROW(decode_netpbm("P5\n2 2\n255\n\1"), data_error);
  EXPECT_THROW(decode_netpbm("P5\nxx"), data_error);
  EXPECT_THROW(encode_netpbm(ImageTensor(2, 1, 1)), config_error);
}

TEST(NetpbmIo, SignedImagesAreRescaled) {
  const ImageTensor t(1, 1, 3, std::vector<double>{-2.0, 0.0, 2.0});
  const ImageTensor u = rescale_to_unit(t);
  EXPECT_EQ(u.samples()[0], 0.0);
  EXPECT_EQ(u.samples()[1], 0.5);
  EXPECT_EQ(u.samples()[2], 1.0);
  const ImageTensor flat = rescale_to_unit(ImageTensor(1, 2, 2, -3.0));
  for (double v : flat.samples()) EXPECT_EQ(v, 0.5);
  EXPECT_EQ(quantize_unit(0.5), 128);
  EXPECT_EQ(quantize_unit(-1.0), 0);
  EXPECT_EQ(quantize_unit(7.0), 255);
}

TEST(FilterGrid, SingleFilterIsRescaledFilter) {
  FilterBank bank(1, 1, 2, 2, std::vector<double>{0.5, -0.5, 0.5, 0.5});
  const ImageTensor g = render_filter_grid(bank);
  ASSERT_EQ(g.height(), 4u);
  ASSERT_EQ(g.width(), 4u);
  EXPECT_EQ(g(0, 0, 0), 0.0);
  EXPECT_EQ(g(0, 1, 1), 1.0);
  EXPECT_EQ(g(0, 1, 2), 0.0);
  EXPECT_EQ(g(0, 2, 1), 1.0);
  EXPECT_EQ(g(0, 3, 3), 0.0);
}

TEST(FilterGrid, EightFiltersLeaveOneGrayCell) {
  auto rng = make_rng(87);
  const FilterBank bank = gaussian_unit_bank(8, 1, 16, 16, rng);
  const GridLayout layout = filter_grid_layout(bank);
  EXPECT_EQ(layout.rows, 3u);
  EXPECT_EQ(layout.cols, 3u);
  const ImageTensor g = render_filter_grid(bank);
  EXPECT_EQ(g.height(), layout.rows * (16 + 1) + 1);
  EXPECT_EQ(g.width(), layout.cols * (16 + 1) + 1);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) EXPECT_EQ(g(0, 2 * 17 + 1 + r, 2 * 17 + 1 + c), 0.5);
  for (std::size_t c = 0; c < g.width(); ++c) EXPECT_EQ(g(0, 17, c), 0.0);
  const ImageTensor big = render_filter_grid(bank, 3);
  EXPECT_EQ(big.height(), 3 * g.height());
  EXPECT_EQ(big(0, 3 * 5 + 2, 3 * 7 + 1), g(0, 5, 7));
}

TEST(FilterGrid, DimensionFormula) {
  auto rng = make_rng(88);
  for (std::size_t k = 1; k <= 20; ++k) {
    const FilterBank bank = gaussian_unit_bank(k, 1, 3, 5, rng);
    const GridLayout g = filter_grid_layout(bank);
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
    EXPECT_EQ(g.cols, cols) << k;
    EXPECT_EQ(g.rows, (k + cols - 1) / cols) << k;
    const ImageTensor img = render_filter_grid(bank);
    EXPECT_EQ(img.height(), g.rows * 4 + 1);
    EXPECT_EQ(img.width(), g.cols * 6 + 1);
  }
  const FilterBank multi = gaussian_unit_bank(2, 3, 4, 4, rng);
  EXPECT_EQ(filter_grid_layout(multi).cell_width, 3u * 5u - 1u);
}

TEST(CodeIo, EmptyCodeIsHeaderOnly) {
  const SparseCode code{1, 64, 64, {}};
  EXPECT_EQ(encode_code(code), "cmpcode 1 1 64 64 0\n");
  EXPECT_EQ(decode_code(encode_code(code)), code);
}

TEST(CodeIo, RandomRoundTripIsExact) {
  TempDir dir;
  auto rng = make_rng(89);
  std::uniform_int_distribution<std::size_t> idx(0, 40);
  std::normal_distribution<double> coef(0.0, 10.0);
  for (int trial = 0; trial < 20; ++trial) {
    SparseCode code{2, 50, 60, {}};
    for (int n = 0; n < 30; ++n) code.activations.push_back({idx(rng) % 5, idx(rng), idx(rng), coef(rng) * 1e-3 * trial});
    save_code(code, dir.path() / "c.txt");
    EXPECT_EQ(load_code(dir.path() / "c.txt"), code);
  }
}

TEST(CodeIo, MalformedLinesCarryLineNumbers) {
  auto message = [](const std::string& text) {
    try {
      decode_code(text);
    } catch (const data_error& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  EXPECT_NE(message("cmpcode 1 1 8 8 2\n0 1 1 0.5\n0 1 x 0.5\n").find(":3:"), std::string::npos);
  EXPECT_NE(message("cmpcode 1 1 8 8 1\n0 1 1\n").find(":2:"), std::string::npos);
  EXPECT_NE(message("cmpcode 2 1 8 8 0\n").find(":1:"), std::string::npos);
  EXPECT_NE(message("cmpcode 1 1 8 8 2\n0 1 1 0.5\n").find("declares 2"), std::string::npos);
  EXPECT_NE(message("cmpcode 1 1 8 8 1\n0 1 1 nan\n").find(":2:"), std::string::npos);
}

TEST(Corpus, ListFilesSortedAndFiltered) {
  TempDir dir;
  for (const char* n : {"b.pgm", "a.PPM", "c.txt", "d.pgm"}) std::ofstream(dir.path() / n) << "x";
  const auto files = list_files(dir.path(), {".pgm", ".ppm"});
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0].filename(), "a.PPM");
  EXPECT_EQ(files[2].filename(), "d.pgm");
  EXPECT_THROW(list_files(dir.path() / "missing", {".pgm"}), data_error);
}

}  // namespace
}  // namespace cmpdict
