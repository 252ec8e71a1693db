/* Copyright 2026 The rareseg Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
// rareseg: synth | stats | train | infer | eval | selftest

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rareseg/checkpoint.hpp"
#include "rareseg/config.hpp"
#include "rareseg/dataset.hpp"
#include "rareseg/error.hpp"
#include "rareseg/kernels.hpp"
#include "rareseg/metrics.hpp"
#include "rareseg/selftest.hpp"
#include "rareseg/synth.hpp"
#include "rareseg/tiler.hpp"
#include "rareseg/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace rareseg {
namespace {

// 0 quiet, 1 normal (default), 2 verbose. Set with RARESEG_VERBOSITY.
int Verbosity() {
  static const int level = [] {
    const char* v = std::getenv("RARESEG_VERBOSITY");
    return v ? std::atoi(v) : 1;
  }();
  return level;
}

void Info(const std::string& msg) {
  if (Verbosity() >= 1) std::cerr << msg << '\n';
}

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool deterministic = false;
  std::string run_dir;
};

void AddCommon(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Master seed (overrides config)");
  cmd->add_option("--workers", c.workers,
                  "Parallel workers for sampling/tiling (overrides config)")
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--deterministic", c.deterministic,
                "Pin one worker and single-threaded reductions");
  cmd->add_option("--run-dir", c.run_dir,
                  "Artifact directory (default <run_root>/<timestamp>)");
}

RunConfig LoadConfig(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig::Defaults()
                                        : RunConfig::Load(c.config_path);
  if (c.seed) {
    cfg.seed = *c.seed;
    cfg.train.seed = *c.seed;
  }
  if (c.workers) {
    cfg.train.workers = *c.workers;
    cfg.inference.workers = *c.workers;
  }
  if (c.deterministic) {
    cfg.train.workers = 1;
    cfg.inference.workers = 1;
    kernels::SetThreads(1);
  }
  return cfg;
}

std::string Timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return os.str();
}

fs::path RunDir(const Common& c, const RunConfig& cfg) {
  if (!c.run_dir.empty()) return c.run_dir;
  const fs::path base = fs::path(cfg.paths.run_root) / Timestamp();
  fs::path dir = base;
  for (int i = 1; fs::exists(dir); ++i) dir = base.string() + "-" + std::to_string(i);
  return dir;
}

fs::path Subdir(const fs::path& run, const char* name) {
  fs::path p = run / name;
  fs::create_directories(p);
  return p;
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cli", "cannot write " + path.string());
  out << text;
}

std::uint64_t SceneSeed(std::uint64_t base, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base),
                    static_cast<std::uint32_t>(base >> 32),
                    static_cast<std::uint32_t>(index)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[1]) << 32) | words[0];
}

struct SynthArgs {
  Common common;
  int count = 64;
  std::string split = "train";
  std::string out;
  std::optional<int> height, width;
};

int CmdSynth(const SynthArgs& a) {
  RunConfig cfg = LoadConfig(a.common);
  if (a.height) cfg.synth.height = *a.height;
  if (a.width) cfg.synth.width = *a.width;
  cfg.synth.Validate();
  const fs::path dir = a.out.empty() ? fs::path(cfg.paths.data_root) / a.split
                                     : fs::path(a.out);
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (int i = 0; i < a.count; ++i) {
    char stem[32];
    std::snprintf(stem, sizeof(stem), "scene_%05d", i);
    auto [image, mask] = generate_synthetic_scene(SceneSeed(cfg.seed, i), cfg.synth);
    WriteImagePng(dir / "images" / (std::string(stem) + ".png"), image);
    WriteMaskPng(dir / "masks" / (std::string(stem) + ".png"), mask);
  }
  Info("wrote " + std::to_string(a.count) + " scenes to " + dir.string());
  return 0;
}

struct StatsArgs {
  Common common;
  std::string split;
  std::string data;
  std::string csv;
};

int CmdStats(const StatsArgs& a) {
  const RunConfig cfg = LoadConfig(a.common);
  const std::string split = a.split.empty() ? cfg.paths.train_split : a.split;
  const fs::path root = a.data.empty() ? fs::path(cfg.paths.data_root) : fs::path(a.data);
  const DatasetIndex index = load_dataset(root, split);
  const FrequencyTable table = compute_class_frequencies(index, cfg.classes);
  std::cout << std::left << std::setw(4) << "id" << std::setw(30) << "class"
            << std::right << std::setw(14) << "pixels" << std::setw(10) << "percent"
            << '\n';
  for (std::size_t c = 0; c < table.names.size(); ++c) {
    std::cout << std::left << std::setw(4) << c << std::setw(30) << table.names[c]
              << std::right << std::setw(14) << table.counts[c] << std::setw(10)
              << std::fixed << std::setprecision(2) << table.percent[c] << '\n';
  }
  std::cout << "images=" << index.size() << " pixels=" << table.total() << '\n';
  if (!a.csv.empty()) WriteText(a.csv, table.ToCsv());
  return 0;
}

struct TrainArgs {
  Common common;
  std::optional<int> epochs, steps_per_epoch, batch_size, crop_size, checkpoint_every;
  std::optional<double> lr;
  std::string data;
  std::string split;
  std::string resume;
};

std::vector<TrainSample> LoadSamples(const fs::path& root, const std::string& split,
                                     const ClassTable& table) {
  const DatasetIndex index = load_dataset(root, split);
  if (index.size() == 0) {
    throw IoError("cli", "no training pairs under " + (root / split).string());
  }
  std::vector<Image> images;
  std::vector<LabelMask> masks;
  for (const auto& e : index.entries) {
    auto [image, mask] = LoadPair(e, table);
    images.push_back(std::move(image));
    masks.push_back(std::move(mask));
  }
  return MakeTrainSamples(std::move(images), std::move(masks), table.rare_set());
}

int CmdTrain(const TrainArgs& a) {
  RunConfig cfg = LoadConfig(a.common);
  if (a.epochs) cfg.train.epochs = *a.epochs;
  if (a.steps_per_epoch) cfg.train.steps_per_epoch = *a.steps_per_epoch;
  if (a.batch_size) cfg.train.batch_size = *a.batch_size;
  if (a.checkpoint_every) cfg.train.checkpoint_every = *a.checkpoint_every;
  if (a.lr) cfg.train.lr0 = *a.lr;
  if (a.crop_size) cfg.sampler.crop_size = *a.crop_size;
  cfg.Validate();

  const fs::path root = a.data.empty() ? fs::path(cfg.paths.data_root) : fs::path(a.data);
  const std::string split = a.split.empty() ? cfg.paths.train_split : a.split;
  auto samples = LoadSamples(root, split, cfg.classes);

  const fs::path run = RunDir(a.common, cfg);
  TrainHooks hooks;
  hooks.checkpoint_dir = Subdir(run, "checkpoints");
  hooks.log_path = Subdir(run, "logs") / "train_log.csv";
  const auto start = std::chrono::steady_clock::now();
  hooks.on_step = [&](const StepRecord& r) {
    if (Verbosity() >= 2 || (Verbosity() >= 1 && (r.step + 1) % 50 == 0)) {
      const double secs = std::chrono::duration<double>(
                              std::chrono::steady_clock::now() - start).count();
      std::ostringstream os;
      os << "step " << r.step + 1 << " epoch " << r.epoch << " lr " << r.lr
         << " loss " << r.loss.loss_total << " (" << secs << "s)";
      Info(os.str());
    }
  };

  std::optional<Trainer> trainer;
  if (!a.resume.empty()) {
    trainer.emplace(cfg.MakeTrainSetup(), std::move(samples), LoadCheckpoint(a.resume));
  } else {
    trainer.emplace(cfg.MakeTrainSetup(), std::move(samples));
  }
  Info("training " + std::to_string(trainer->total_steps()) + " steps into " +
       run.string());
  train(*trainer, hooks);
  std::cout << "checkpoint=" << (hooks.checkpoint_dir / "final.ckpt").string() << '\n';
  return 0;
}

struct InferArgs {
  Common common;
  std::string checkpoint;
  std::string input;
  std::string out;
  std::optional<int> tile_size, stride;
  std::string accumulator;
  bool plan_only = false;
};

std::vector<fs::path> ListImages(const fs::path& input) {
  std::vector<fs::path> out;
  if (fs::is_directory(input)) {
    for (const auto& e : fs::directory_iterator(input)) {
      if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
  } else if (fs::is_regular_file(input)) {
    out.push_back(input);
  } else {
    throw IoError("cli", "no such input: " + input.string());
  }
  return out;
}

int CmdInfer(const InferArgs& a) {
  RunConfig cfg = LoadConfig(a.common);
  if (a.tile_size) cfg.tiler.tile_size = *a.tile_size;
  if (a.stride) cfg.tiler.stride = *a.stride;
  cfg.tiler.Validate();
  if (a.accumulator == "float32") {
    cfg.inference.accumulator = Accumulator::kFloat32;
  } else if (a.accumulator == "float64") {
    cfg.inference.accumulator = Accumulator::kFloat64;
  } else if (!a.accumulator.empty()) {
    throw ConfigError("inference.accumulator", "expected float32 or float64");
  }

  std::optional<Checkpoint> ckpt;
  if (!a.plan_only) {
    if (a.checkpoint.empty()) throw ConfigError("checkpoint", "required unless --plan-only");
    ckpt = LoadCheckpoint(a.checkpoint);
  }
  const fs::path run = RunDir(a.common, cfg);
  const fs::path out = a.out.empty() ? Subdir(run, "preds") : fs::path(a.out);
  fs::create_directories(out);

  json manifest;
  manifest["tile_size"] = cfg.tiler.tile_size;
  manifest["stride"] = cfg.tiler.stride;
  manifest["workers"] = cfg.inference.workers;
  manifest["accumulator"] =
      cfg.inference.accumulator == Accumulator::kFloat32 ? "float32" : "float64";
  manifest["images"] = json::array();
  for (const fs::path& path : ListImages(a.input)) {
    const auto start = std::chrono::steady_clock::now();
    Image image = ReadImagePng(path);
    const int h = image.height, w = image.width;
    const Image padded = PadTo(image, cfg.tiler.tile_size);
    TileGrid grid;
    if (a.plan_only) {
      grid = plan_tiles(padded.height, padded.width, cfg.tiler);
    } else {
      LabelMask mask(h, w);
      const int nc = ckpt->model.num_classes;
      TileModel model = [&](const Image& tile) {
        return model_forward(tile, ckpt->model, ckpt->params);
      };
      grid = tiled_predict_rows(
          model, padded, cfg.tiler, cfg.inference,
          [&](int row, std::span<const double> probs) {
            if (row >= h) return;
            for (int x = 0; x < w; ++x) {
              const double* p = probs.data() + static_cast<std::size_t>(x) * nc;
              int best = 0;
              for (int c = 1; c < nc; ++c) {
                if (p[c] > p[best]) best = c;
              }
              mask.at(row, x) = static_cast<std::uint8_t>(best);
            }
          });
      WriteMaskPng(out / path.filename(), mask);
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    manifest["images"].push_back({{"image", path.filename().string()},
                                  {"height", h},
                                  {"width", w},
                                  {"grid_rows", grid.row_origins.size()},
                                  {"grid_cols", grid.col_origins.size()},
                                  {"row_origins", grid.row_origins},
                                  {"col_origins", grid.col_origins},
                                  {"tile_count", grid.size()},
                                  {"wall_seconds", secs}});
    Info(path.filename().string() + ": " + std::to_string(grid.size()) + " tiles");
  }
  WriteText(out / "manifest.json", manifest.dump(2) + "\n");
  std::cout << "manifest=" << (out / "manifest.json").string() << '\n';
  return 0;
}

struct EvalArgs {
  Common common;
  std::string pred;
  std::string truth;
  std::string out;
  std::string undefined;
};

int CmdEval(const EvalArgs& a) {
  RunConfig cfg = LoadConfig(a.common);
  if (a.undefined == "zero") {
    cfg.undefined_policy = UndefinedClassPolicy::kAsZero;
  } else if (a.undefined == "exclude") {
    cfg.undefined_policy = UndefinedClassPolicy::kExclude;
  } else if (!a.undefined.empty()) {
    throw ConfigError("metrics.undefined_class", "expected exclude or zero");
  }
  ConfusionMatrix cm(cfg.classes.size());
  std::size_t pairs = 0;
  for (const fs::path& truth_path : ListImages(a.truth)) {
    const fs::path pred_path = fs::path(a.pred) / truth_path.filename();
    if (!fs::exists(pred_path)) {
      throw IoError("cli", "missing prediction for " + truth_path.filename().string());
    }
    const LabelMask truth = ReadMaskPng(truth_path);
    const LabelMask pred = ReadMaskPng(pred_path);
    if (truth.height != pred.height || truth.width != pred.width) {
      throw ShapeError("cli", pred_path.string() + ": size differs from ground truth");
    }
    ValidateMask(truth, cfg.classes, truth_path.string());
    accumulate(cm, pred, truth, cfg.classes.ignore_id());
    ++pairs;
  }
  const MetricsReport rep = report(cm, cfg.classes, cfg.undefined_policy);
  const fs::path out = a.out.empty()
                           ? Subdir(RunDir(a.common, cfg), "metrics") / "metrics.csv"
                           : fs::path(a.out);
  WriteText(out, rep.ToCsv());
  if (Verbosity() >= 1) std::cout << rep.ToTableRow();
  std::cout << "pairs=" << pairs << '\n';
  std::cout << "mIoU=" << std::fixed << std::setprecision(4) << rep.miou << '\n';
  Info("metrics written to " + out.string());
  return 0;
}

struct SelftestArgs {
  Common common;
  bool quick = false;
};

int CmdSelftest(const SelftestArgs& a) {
  const RunConfig cfg = LoadConfig(a.common);
  SelftestOptions opt;
  opt.seed = cfg.seed == 0 ? opt.seed : cfg.seed;
  if (a.quick) opt.model_parameters = 0;
  bool ok = true;
  for (const auto& c : run_selftest(opt)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << std::left << std::setw(20)
              << c.name << std::right << std::fixed << std::setprecision(2)
              << std::setw(7) << c.seconds << "s  " << c.detail << '\n';
    ok = ok && c.passed;
  }
  return ok ? 0 : 1;
}

}  // namespace
}  // namespace rareseg

int main(int argc, char** argv) {
  using namespace rareseg;
  CLI::App app{"rareseg: rare-class aware semantic segmentation pipeline"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset split");
  AddCommon(s, synth.common);
  s->add_option("--count", synth.count, "Number of scenes")->check(CLI::PositiveNumber);
  s->add_option("--split", synth.split, "Split name under the data root");
  s->add_option("--out", synth.out, "Output directory (default <data_root>/<split>)");
  s->add_option("--height", synth.height, "Scene height (overrides config)");
  s->add_option("--width", synth.width, "Scene width (overrides config)");

  StatsArgs stats;
  auto* st = app.add_subcommand("stats", "Print per-class pixel frequencies");
  AddCommon(st, stats.common);
  st->add_option("--split", stats.split, "Split name (default paths.train_split)");
  st->add_option("--data", stats.data, "Data root (default paths.data_root)");
  st->add_option("--csv", stats.csv, "Also write the table as CSV");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model; writes checkpoints and a log");
  AddCommon(t, tr.common);
  t->add_option("--epochs", tr.epochs, "Epochs (overrides config)");
  t->add_option("--steps-per-epoch", tr.steps_per_epoch,
                "Steps per epoch, 0 = one crop per image (overrides config)");
  t->add_option("--batch-size", tr.batch_size, "Crops per step (overrides config)");
  t->add_option("--lr", tr.lr, "Initial learning rate (overrides config)");
  t->add_option("--crop-size", tr.crop_size, "Crop side in pixels (overrides config)");
  t->add_option("--checkpoint-every", tr.checkpoint_every,
                "Checkpoint every N epochs (overrides config)");
  t->add_option("--data", tr.data, "Data root (default paths.data_root)");
  t->add_option("--split", tr.split, "Training split (default paths.train_split)");
  t->add_option("--resume", tr.resume, "Continue from a checkpoint")
      ->check(CLI::ExistingFile);

  InferArgs inf;
  auto* in = app.add_subcommand("infer", "Sliding-window inference at native resolution");
  AddCommon(in, inf.common);
  in->add_option("--checkpoint", inf.checkpoint, "Model checkpoint");
  in->add_option("--input", inf.input, "Image file or directory of PNGs")->required();
  in->add_option("--out", inf.out, "Output directory (default <run>/preds)");
  in->add_option("--tile-size", inf.tile_size, "Window side (overrides config)");
  in->add_option("--stride", inf.stride, "Window stride (overrides config)");
  in->add_option("--accumulator", inf.accumulator, "float32 or float64");
  in->add_flag("--plan-only", inf.plan_only, "Plan windows and write the manifest only");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Confusion matrix and IoU metrics");
  AddCommon(e, ev.common);
  e->add_option("--pred", ev.pred, "Directory of predicted masks")->required();
  e->add_option("--truth", ev.truth, "Directory of ground-truth masks")->required();
  e->add_option("--out", ev.out, "metrics.csv path (default <run>/metrics/metrics.csv)");
  e->add_option("--undefined", ev.undefined,
                "Classes absent from truth and prediction: exclude or zero");

  SelftestArgs self;
  auto* sf = app.add_subcommand("selftest", "Run the built-in oracle checks");
  AddCommon(sf, self.common);
  sf->add_flag("--quick", self.quick, "Skip the full-model gradient check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*s) return CmdSynth(synth);
    if (*st) return CmdStats(stats);
    if (*t) return CmdTrain(tr);
    if (*in) return CmdInfer(inf);
    if (*e) return CmdEval(ev);
    if (*sf) return CmdSelftest(self);
  } catch (const ConfigError& err) {
    std::cerr << "config error: " << err.field() << ": " << err.message() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 0;
}
