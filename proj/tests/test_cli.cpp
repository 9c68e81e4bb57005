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
// End-to-end checks of the cmpdict executable.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "cmpdict/cmpdict.hpp"
#include "support/oracles.hpp"

#ifndef CMPDICT_CLI_PATH
#error "CMPDICT_CLI_PATH must point at the cmpdict executable"
#endif

namespace cmpdict {
namespace {

namespace fs = std::filesystem;

struct RunResult {
  int status = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(CMPDICT_CLI_PATH) + " " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

double field(const std::string& out, const std::string& key) {
  const auto p = out.find(key + "=");
  if (p == std::string::npos) return std::nan("");
  return std::strtod(out.c_str() + p + key.size() + 1, nullptr);
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / (std::string("cmpdict_cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "raw");
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

  // Smooth random P5 images so that preprocessing leaves structure behind.
  void write_raw_corpus(std::size_t n, std::size_t h, std::size_t w, std::uint64_t seed) {
    auto rng = testing::make_rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      ImageTensor img(1, h, w);
      const double fx = 0.1 + 0.4 * u(rng), fy = 0.1 + 0.4 * u(rng), ph = 6.0 * u(rng);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c)
          img(0, r, c) = 0.5 + 0.3 * std::sin(fx * double(c) + fy * double(r) + ph) + 0.1 * u(rng);
      char name[32];
      std::snprintf(name, sizeof name, "img%03zu.pgm", i);
      save_image(img, dir_ / "raw" / name);
    }
  }

  fs::path dir_;
};

TEST_F(Cli, UsageErrorsAreConfigErrors) {
  EXPECT_EQ(run("").status, 2);
  EXPECT_EQ(run("train --corpus x").status, 2);
  EXPECT_EQ(run("bench --q 50,abc --repeat 1").status, 2);
  EXPECT_EQ(run("render-filters --model " + p("missing.bank") + " --out " + p("g.pgm")).status, 3);
}

TEST_F(Cli, PreprocessConstantAndDeterminism) {
  save_image(ImageTensor(1, 40, 50, 0.25), dir_ / "raw" / "flat.pgm");
  write_raw_corpus(3, 90, 100, 1);
  std::ofstream(dir_ / "raw" / "broken.pgm") << "P5\n2 2\n";
  ASSERT_EQ(run("preprocess --in " + p("raw") + " --out " + p("pre") + " --size 64").status, 0);
  const ImageTensor flat = load_tensor(dir_ / "pre" / "flat.cmpt");
  EXPECT_EQ(flat.height(), 64u);
  for (double v : flat.samples()) EXPECT_EQ(v, 0.0);
  for (const auto& f : list_files(dir_ / "pre", {".cmpt"})) {
    const ImageTensor t = load_tensor(f);
    EXPECT_EQ(t.height(), 64u);
    EXPECT_EQ(t.width(), 64u);
  }
  EXPECT_FALSE(fs::exists(dir_ / "pre" / "broken.cmpt"));
  EXPECT_TRUE(fs::exists(dir_ / "pre" / "manifest.txt"));

  ASSERT_EQ(run("preprocess --in " + p("raw") + " --out " + p("a") + " --size 32 --pascal-crop --seed 5").status, 0);
  ASSERT_EQ(run("preprocess --in " + p("raw") + " --out " + p("b") + " --size 32 --pascal-crop --seed 5 --threads 3").status, 0);
  for (const auto& f : list_files(dir_ / "a", {".cmpt", ".pgm"})) {
    EXPECT_EQ(detail::read_file(f), detail::read_file(dir_ / "b" / f.filename())) << f;
  }

  fs::create_directories(dir_ / "bad");
  std::ofstream(dir_ / "bad" / "x.pgm") << "junk";
  EXPECT_EQ(run("preprocess --in " + p("bad") + " --out " + p("bad_out")).status, 3);
}

TEST_F(Cli, TrainEncodeReconstructRender) {
  write_raw_corpus(4, 24, 24, 2);
  ASSERT_EQ(run("preprocess --in " + p("raw") + " --out " + p("pre") + " --size 24").status, 0);

  ASSERT_EQ(run("train --corpus " + p("pre") + " --out " + p("m0.bank") + " --k 3 --filter 5x5 --epochs 0 --seed 4").status, 0);
  std::vector<ImageTensor> corpus;
  for (const auto& f : list_files(dir_ / "pre", {".cmpt"})) corpus.push_back(load_tensor(f));
  TrainConfig cfg{.k = 3, .filter_height = 5, .filter_width = 5, .epochs = 0, .seed = 4};
  EXPECT_EQ(load_bank(dir_ / "m0.bank").values()[0], init_filters(corpus, cfg).values()[0]);
  const FilterBank init = init_filters(corpus, cfg);
  const FilterBank saved = load_bank(dir_ / "m0.bank");
  EXPECT_TRUE(std::equal(init.values().begin(), init.values().end(), saved.values().begin()));

  const std::string cfg_file = p("train.cfg");
  std::ofstream(cfg_file) << "k=2\nfilter=4x4\nq=8\nepochs=2\n";
  ASSERT_EQ(run("train --corpus " + p("pre") + " --out " + p("m.bank") + " --config " + cfg_file + " --k 3").status, 0);
  const FilterBank bank = load_bank(dir_ / "m.bank");
  EXPECT_EQ(bank.count(), 3u);
  EXPECT_EQ(bank.filter_height(), 4u);
  EXPECT_TRUE(fs::exists(p("m.bank.manifest.txt")));
  EXPECT_TRUE(fs::exists(p("m.bank.stats.txt")));
  EXPECT_EQ(run("train --corpus " + p("pre") + " --out " + p("x.bank") + " --filter 30x30").status, 2);
  EXPECT_EQ(run("train --corpus " + p("pre") + " --out " + p("x.bank") + " --q 0").status, 2);

  const auto tensor = list_files(dir_ / "pre", {".cmpt"}).front();
  const RunResult enc = run("encode --model " + p("m.bank") + " --image " + tensor.string() + " --out " + p("c.txt") + " --q 12");
  ASSERT_EQ(enc.status, 0);
  const SparseCode code = load_code(dir_ / "c.txt");
  const ImageTensor image = load_tensor(tensor);
  EXPECT_EQ(field(enc.out, "steps"), static_cast<double>(code.activations.size()));
  EXPECT_EQ(field(enc.out, "initial_energy"), image.squared_norm());
  EXPECT_EQ(field(enc.out, "final_energy"), residual_energy(image, code, bank));
  EXPECT_LT(field(enc.out, "final_energy"), field(enc.out, "initial_energy"));

  save_tensor(ImageTensor(1, 24, 24), dir_ / "zero.cmpt");
  const RunResult zero = run("encode --model " + p("m.bank") + " --image " + p("zero.cmpt") + " --out " + p("z.txt"));
  ASSERT_EQ(zero.status, 0);
  EXPECT_EQ(field(zero.out, "final_energy"), 0.0);
  EXPECT_TRUE(load_code(dir_ / "z.txt").activations.empty());
  save_tensor(ImageTensor(1, 3, 3), dir_ / "tiny.cmpt");
  EXPECT_EQ(run("encode --model " + p("m.bank") + " --image " + p("tiny.cmpt") + " --out " + p("t.txt")).status, 2);

  ASSERT_EQ(run("reconstruct --model " + p("m.bank") + " --code " + p("c.txt") + " --out " + p("r.pgm") +
                " --tensor-out " + p("r.cmpt")).status, 0);
  EXPECT_EQ(load_tensor(dir_ / "r.cmpt"), reconstruct(code, bank));
  EXPECT_EQ(detail::read_file(dir_ / "r.pgm"), encode_netpbm(rescale_to_unit(reconstruct(code, bank))));
  ASSERT_EQ(run("reconstruct --model " + p("m.bank") + " --code " + p("z.txt") + " --out " + p("rz.pgm")).status, 0);
  const ImageTensor gray = load_image(dir_ / "rz.pgm");
  for (double v : gray.samples()) EXPECT_EQ(v, 128.0 / 255.0);

  ASSERT_EQ(run("render-filters --model " + p("m.bank") + " --out " + p("g.pgm") + " --scale 2").status, 0);
  const ImageTensor grid = load_image(dir_ / "g.pgm");
  EXPECT_EQ(grid.height(), 2u * (2 * 5 + 1));
  EXPECT_EQ(grid.width(), 2u * (2 * 5 + 1));
}

TEST_F(Cli, BenchReportsTwoRatios) {
  const RunResult r = run("bench --image 32x32 --k 2 --filter 4x4 --q 10,20,40 --repeat 3");
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("ratio q=20/q=10 "), std::string::npos);
  EXPECT_NE(r.out.find("ratio q=40/q=20 "), std::string::npos);
  EXPECT_NE(r.out.find("q=40 steps=40 "), std::string::npos);
}

TEST_F(Cli, PipelineWritesAllArtifacts) {
  write_raw_corpus(3, 40, 40, 3);
  const std::string cfg_file = p("pipe.cfg");
  std::ofstream(cfg_file) << "size=32\nlayer1.k=2\nlayer1.filter=6x6\nlayer1.q=6\nlayer1.epochs=1\n"
                             "layer2.k=3\nlayer2.filter=2x2\nlayer2.q=4\nlayer2.epochs=1\npool=4\n";
  const std::string args = "pipeline --corpus " + p("raw") + " --config " + cfg_file + " --seed 9 --out ";
  ASSERT_EQ(run(args + p("o1")).status, 0);
  ASSERT_EQ(run(args + p("o2") + " --threads 2").status, 0);
  for (const char* f : {"layer1.bank", "layer2.bank", "layer1_filters.pgm", "layer2_filters.pgm", "layer1.stats.txt",
                        "layer2.stats.txt"}) {
    ASSERT_TRUE(fs::exists(dir_ / "o1" / f)) << f;
    EXPECT_EQ(detail::read_file(dir_ / "o1" / f), detail::read_file(dir_ / "o2" / f)) << f;
  }
  const FilterBank l2 = load_bank(dir_ / "o1" / "layer2.bank");
  EXPECT_EQ(l2.channels(), 2u);
  EXPECT_EQ(l2.count(), 3u);
  const std::string manifest = detail::read_file(dir_ / "o1" / "manifest.txt");
  EXPECT_NE(manifest.find("seed=9"), std::string::npos);
  EXPECT_NE(manifest.find("layer2.k=3"), std::string::npos);
  EXPECT_EQ(run("pipeline --corpus " + p("raw") + " --out " + p("o3") + " --preset other").status, 2);
}

}  // namespace
}  // namespace cmpdict
