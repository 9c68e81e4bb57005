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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#if __has_include(<CLI11.hpp>)
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "cmpdict/cmpdict.hpp"

namespace fs = std::filesystem;
using namespace cmpdict;

namespace {

constexpr int exit_config = 2;
constexpr int exit_data = 3;
constexpr int exit_internal = 4;

std::string tool_version() { return std::string("cmpdict ") + CMPDICT_VERSION; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw data_error("cannot write " + path.string());
  out << text;
}

std::string manifest_header(const std::string& command, const std::string& corpus, const std::string& out,
                            std::size_t threads) {
  std::string m = "# cmpdict run manifest\n";
  m += "tool_version=" + tool_version() + "\n";
  m += "command=" + command + "\n";
  if (!corpus.empty()) m += "corpus=" + corpus + "\n";
  m += "out=" + out + "\n";
  m += "threads=" + std::to_string(threads) + "\n";
  return m;
}

std::string stats_text(const TrainStats& stats) {
  std::string s;
  for (const EpochStats& e : stats.epochs) s += format_epoch_line(e) + "\n";
  for (const ReinitEvent& r : stats.reinit_events) {
    s += "reinit epoch=" + std::to_string(r.epoch) + " filter=" + std::to_string(r.filter) +
         " uses=" + std::to_string(r.uses) + "\n";
  }
  return s;
}

std::vector<ImageTensor> load_tensor_corpus(const fs::path& dir) {
  const auto files = list_files(dir, {tensor_extension});
  if (files.empty()) {
    throw data_error("no preprocessed tensors (*.cmpt) in " + dir.string() + "; run `cmpdict preprocess` first");
  }
  std::vector<ImageTensor> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(load_tensor(f));
  return images;
}

std::vector<ImageTensor> load_raw_corpus(const fs::path& dir) {
  const auto files = list_files(dir, {".pgm", ".ppm"});
  std::vector<ImageTensor> images;
  for (const auto& f : files) {
    try {
      images.push_back(load_image(f));
    } catch (const data_error& e) {
      std::cerr << "warning: skipping " << f.string() << ": " << e.what() << "\n";
    }
  }
  if (images.empty()) throw data_error("no readable images in " + dir.string());
  return images;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string in, out, size = "64";
  bool pascal_crop = false;
  std::uint64_t seed = 0;
  std::size_t box = 5;
  std::size_t threads = 0;
};

int run_preprocess(const PreprocessArgs& a) {
  PreprocessOptions opt;
  std::tie(opt.height, opt.width) = parse_dims(a.size, "--size");
  opt.random_crop = a.pascal_crop;
  opt.box.side = a.box;
  fs::create_directories(a.out);
  const std::size_t threads = a.threads == 0 ? default_thread_count() : a.threads;
  write_text(fs::path(a.out) / "manifest.txt",
             manifest_header("preprocess", a.in, a.out, threads) + "size=" + std::to_string(opt.height) + "x" +
                 std::to_string(opt.width) + "\npascal_crop=" + (opt.random_crop ? "true" : "false") +
                 "\nbox=" + std::to_string(opt.box.side) + "\nseed=" + std::to_string(a.seed) + "\n");

  const auto files = list_files(a.in, {".pgm", ".ppm"});
  std::vector<int> ok(files.size(), 0);
  std::vector<std::string> warnings(files.size());
  parallel_for(files.size(), threads, [&](std::size_t i) {
    try {
      auto rng = image_rng(a.seed, i);
      const ImageTensor img = preprocess_image(load_image(files[i]), opt, rng);
      const fs::path stem = fs::path(a.out) / files[i].stem();
      save_signed_image(img, stem.string() + ".pgm");
      save_tensor(img, stem.string() + std::string(tensor_extension));
      ok[i] = 1;
    } catch (const error& e) {
      warnings[i] = e.what();
    }
  });
  std::size_t written = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (ok[i]) {
      ++written;
    } else {
      std::cerr << "warning: skipping " << files[i].string() << ": " << warnings[i] << "\n";
    }
  }
  std::cout << "preprocessed " << written << " of " << files.size() << " images\n";
  return written == 0 ? exit_data : 0;
}

struct TrainArgs {
  std::string corpus, out, config;
  TrainConfig cfg;
  std::string filter = "16x16";
  std::size_t threads = 0;
};

int run_train(const TrainArgs& a, const CLI::App& cmd) {
  TrainConfig cfg;
  if (!a.config.empty()) apply_train_config(cfg, parse_key_values(detail::read_file(a.config), a.config));
  if (cmd.count("--k")) cfg.k = a.cfg.k;
  if (cmd.count("--filter")) std::tie(cfg.filter_height, cfg.filter_width) = parse_dims(a.filter, "--filter");
  if (cmd.count("--q")) cfg.q = a.cfg.q;
  if (cmd.count("--epochs")) cfg.epochs = a.cfg.epochs;
  if (cmd.count("--seed")) cfg.seed = a.cfg.seed;
  if (cmd.count("--residual-tolerance")) cfg.residual_tolerance = a.cfg.residual_tolerance;
  if (cmd.count("--min-activations")) cfg.min_activations = a.cfg.min_activations;
  cfg.validate();

  const std::size_t threads = a.threads == 0 ? default_thread_count() : a.threads;
  const fs::path out(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out.string() + ".manifest.txt",
             manifest_header("train", a.corpus, a.out, threads) + describe_train_config(cfg));

  const auto images = load_tensor_corpus(a.corpus);
  TrainOptions opt{threads, [](const EpochStats& s) { std::cerr << format_epoch_line(s) << "\n"; }};
  const TrainResult result = train(images, cfg, opt);
  save_bank(result.bank, out);
  write_text(out.string() + ".stats.txt", stats_text(result.stats));
  std::cout << "trained " << cfg.k << " filters of " << cfg.filter_height << "x" << cfg.filter_width << " on "
            << images.size() << " images; wrote " << out.string() << "\n";
  return 0;
}

struct EncodeArgs {
  std::string model, image, out;
  std::size_t q = 40;
  double residual_tolerance = 0.0;
  bool no_normalize = false;
};

ImageTensor load_encode_input(const fs::path& path, const FilterBank& bank, bool normalize) {
  if (path.extension() == tensor_extension) return load_tensor(path);
  ImageTensor img = load_image(path);
  if (bank.channels() == 1) img = to_grayscale(img);
  if (normalize) img = contrast_normalize(img);
  return img;
}

int run_encode(const EncodeArgs& a) {
  const FilterBank bank = load_bank(a.model);
  const ImageTensor image = load_encode_input(a.image, bank, !a.no_normalize);
  const SparseCode code = conv_mp_encode(bank, image, ConvMpOptions{a.q, a.residual_tolerance});
  save_code(code, a.out);
  std::printf("steps=%zu\ninitial_energy=%.17g\nfinal_energy=%.17g\n", code.activations.size(), image.squared_norm(),
              residual_energy(image, code, bank));
  return 0;
}

struct ReconstructArgs {
  std::string model, code, out, tensor_out;
};

int run_reconstruct(const ReconstructArgs& a) {
  const FilterBank bank = load_bank(a.model);
  const ImageTensor img = reconstruct(load_code(a.code), bank);
  if (img.channels() == 1 || img.channels() == 3) {
    save_signed_image(img, a.out);
  } else {
    // multi-channel reconstructions are written channel by channel side by side
    ImageTensor strip(1, img.height(), img.channels() * img.width());
    for (std::size_t c = 0; c < img.channels(); ++c) {
      for (std::size_t r = 0; r < img.height(); ++r) {
        for (std::size_t v = 0; v < img.width(); ++v) strip(0, r, c * img.width() + v) = img(c, r, v);
      }
    }
    save_signed_image(strip, a.out);
  }
  if (!a.tensor_out.empty()) save_tensor(img, a.tensor_out);
  return 0;
}

struct RenderArgs {
  std::string model, out;
  std::size_t scale = 4;
};

int run_render(const RenderArgs& a) {
  save_filter_grid(load_bank(a.model), a.scale, a.out);
  return 0;
}

struct PipelineArgs {
  std::string corpus, config, out, preset = "faces";
  std::uint64_t seed = 0;
  std::size_t threads = 0;
  std::size_t scale = 4;
};

int run_pipeline(const PipelineArgs& a, const CLI::App& cmd) {
  PipelineConfig cfg;
  if (a.preset == "faces") {
    cfg = faces_pipeline_config();
  } else if (a.preset == "natural") {
    cfg = natural_pipeline_config();
  } else {
    throw config_error("unknown preset '" + a.preset + "' (use faces or natural)");
  }
  if (!a.config.empty()) apply_pipeline_config(cfg, parse_key_values(detail::read_file(a.config), a.config));
  if (cmd.count("--seed")) cfg.seed = a.seed;
  cfg.validate();

  const std::size_t threads = a.threads == 0 ? default_thread_count() : a.threads;
  const fs::path out(a.out);
  fs::create_directories(out);
  write_text(out / "manifest.txt", manifest_header("pipeline", a.corpus, a.out, threads) + describe_pipeline_config(cfg));

  const auto raw = load_raw_corpus(a.corpus);
  PipelineOptions opt{threads, [](std::size_t layer, const EpochStats& s) {
                        std::cerr << "layer" << layer << " " << format_epoch_line(s) << "\n";
                      }};
  const PipelineResult r = run_two_layer(raw, cfg, opt);
  save_bank(r.layer1, out / "layer1.bank");
  save_bank(r.layer2, out / "layer2.bank");
  save_filter_grid(r.layer1, a.scale, out / "layer1_filters.pgm");
  save_filter_grid(r.layer2, a.scale, out / "layer2_filters.pgm");
  write_text(out / "layer1.stats.txt", stats_text(r.layer1_stats));
  write_text(out / "layer2.stats.txt", stats_text(r.layer2_stats));
  std::cout << "layer1: " << r.layer1.count() << " filters " << r.layer1.channels() << "x" << r.layer1.filter_height()
            << "x" << r.layer1.filter_width() << "\n"
            << "layer2: " << r.layer2.count() << " filters " << r.layer2.channels() << "x" << r.layer2.filter_height()
            << "x" << r.layer2.filter_width() << "\n";
  return 0;
}

struct BenchArgs {
  std::string image = "64x64", filter = "16x16", qs = "50,100,200";
  std::size_t k = 8, repeat = 20;
  std::uint64_t seed = 0;
};

int run_bench(const BenchArgs& a) {
  BenchSpec spec;
  std::tie(spec.height, spec.width) = parse_dims(a.image, "--image");
  std::tie(spec.filter_height, spec.filter_width) = parse_dims(a.filter, "--filter");
  spec.k = a.k;
  spec.qs = parse_count_list(a.qs, "--q");
  spec.repeat = a.repeat;
  spec.seed = a.seed;
  const BenchReport report = bench_greedy_loop(spec);
  std::printf("image=%zux%zu k=%zu filter=%zux%zu repeat=%zu\n", spec.height, spec.width, spec.k, spec.filter_height,
              spec.filter_width, spec.repeat);
  for (const BenchRow& row : report.rows) {
    std::printf("q=%zu steps=%zu median_ns=%.0f per_step_ns=%.1f\n", row.q, row.steps, row.median_ns,
                row.per_step_ns);
  }
  for (std::size_t i = 0; i < report.ratios.size(); ++i) {
    std::printf("ratio q=%zu/q=%zu %.3f\n", report.rows[i + 1].q, report.rows[i].q, report.ratios[i]);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convolutional matching pursuit and dictionary training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version());

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "Grayscale, resize/crop and contrast-normalize a corpus");
  c_pre->add_option("--in", pre.in, "Input directory of P5/P6 images")->required();
  c_pre->add_option("--out", pre.out, "Output directory")->required();
  c_pre->add_option("--size", pre.size, "Output size, N or HxW")->capture_default_str();
  c_pre->add_flag("--pascal-crop", pre.pascal_crop, "Random 1-4x subsample then random crop instead of resize");
  c_pre->add_option("--seed", pre.seed, "RNG seed")->capture_default_str();
  c_pre->add_option("--box", pre.box, "Box filter side (odd)")->capture_default_str();
  c_pre->add_option("--threads", pre.threads, "Worker threads (0 = all cores)");

  TrainArgs tr;
  auto* c_train = app.add_subcommand("train", "Learn a filter bank from a preprocessed corpus");
  c_train->add_option("--corpus", tr.corpus, "Directory of .cmpt tensors")->required();
  c_train->add_option("--out", tr.out, "Output bank file")->required();
  c_train->add_option("--config", tr.config, "key=value config file (flags override)");
  c_train->add_option("--k", tr.cfg.k, "Number of filters")->capture_default_str();
  c_train->add_option("--filter", tr.filter, "Filter size HxW")->capture_default_str();
  c_train->add_option("--q", tr.cfg.q, "MP steps per image")->capture_default_str();
  c_train->add_option("--epochs", tr.cfg.epochs, "Alternation count")->capture_default_str();
  c_train->add_option("--seed", tr.cfg.seed, "RNG seed")->capture_default_str();
  c_train->add_option("--residual-tolerance", tr.cfg.residual_tolerance, "Early-stop peak correlation");
  c_train->add_option("--min-activations", tr.cfg.min_activations, "Dead-filter threshold");
  c_train->add_option("--threads", tr.threads, "Worker threads (0 = all cores)");

  EncodeArgs en;
  auto* c_enc = app.add_subcommand("encode", "Sparse-code one image with a trained bank");
  c_enc->add_option("--model", en.model, "Bank file")->required();
  c_enc->add_option("--image", en.image, "Image (.cmpt tensor or P5/P6)")->required();
  c_enc->add_option("--out", en.out, "Output code file")->required();
  c_enc->add_option("--q", en.q, "MP steps")->capture_default_str();
  c_enc->add_option("--residual-tolerance", en.residual_tolerance, "Early-stop peak correlation");
  c_enc->add_flag("--no-normalize", en.no_normalize, "Skip contrast normalization of P5/P6 input");

  ReconstructArgs re;
  auto* c_rec = app.add_subcommand("reconstruct", "Render the reconstruction of a code");
  c_rec->add_option("--model", re.model, "Bank file")->required();
  c_rec->add_option("--code", re.code, "Code file")->required();
  c_rec->add_option("--out", re.out, "Output image (P5)")->required();
  c_rec->add_option("--tensor-out", re.tensor_out, "Also write the unquantized reconstruction");

  RenderArgs rf;
  auto* c_ren = app.add_subcommand("render-filters", "Tile a bank's filters into one image");
  c_ren->add_option("--model", rf.model, "Bank file")->required();
  c_ren->add_option("--out", rf.out, "Output image (P5)")->required();
  c_ren->add_option("--scale", rf.scale, "Pixel replication factor")->capture_default_str();

  PipelineArgs pl;
  auto* c_pipe = app.add_subcommand("pipeline", "Two-layer feature learning on a raw image directory");
  c_pipe->add_option("--corpus", pl.corpus, "Directory of P5/P6 images")->required();
  c_pipe->add_option("--out", pl.out, "Output directory")->required();
  c_pipe->add_option("--config", pl.config, "key=value config file");
  c_pipe->add_option("--preset", pl.preset, "Base configuration: faces or natural")->capture_default_str();
  c_pipe->add_option("--seed", pl.seed, "RNG seed (overrides config)");
  c_pipe->add_option("--threads", pl.threads, "Worker threads (0 = all cores)");
  c_pipe->add_option("--scale", pl.scale, "Filter grid pixel replication")->capture_default_str();

  BenchArgs be;
  auto* c_bench = app.add_subcommand("bench", "Time the greedy loop for several q");
  c_bench->add_option("--image", be.image, "Image size HxW")->capture_default_str();
  c_bench->add_option("--k", be.k, "Number of filters")->capture_default_str();
  c_bench->add_option("--filter", be.filter, "Filter size HxW")->capture_default_str();
  c_bench->add_option("--q", be.qs, "Comma-separated q list")->capture_default_str();
  c_bench->add_option("--repeat", be.repeat, "Repeats per q (median reported)")->capture_default_str();
  c_bench->add_option("--seed", be.seed, "RNG seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_config;
  }

  try {
    if (*c_pre) return run_preprocess(pre);
    if (*c_train) return run_train(tr, *c_train);
    if (*c_enc) return run_encode(en);
    if (*c_rec) return run_reconstruct(re);
    if (*c_ren) return run_render(rf);
    if (*c_pipe) return run_pipeline(pl, *c_pipe);
    if (*c_bench) return run_bench(be);
  } catch (const config_error& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return exit_config;
  } catch (const data_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const invariant_error& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_internal;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return exit_data;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return exit_internal;
  }
  return exit_internal;
}
