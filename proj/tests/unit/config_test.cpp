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
#include <fstream>

#include <gtest/gtest.h>

#include "rareseg/config.hpp"
#include "rareseg/error.hpp"
#include "support/temp_dir.hpp"

namespace rareseg {
namespace {

using nlohmann::json;

std::string FieldOf(const json& doc) {
  try {
    RunConfig::FromJson(doc);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

TEST(RunConfig, DefaultsAreConsistent) {
  const RunConfig cfg = RunConfig::Defaults();
  EXPECT_NO_THROW(cfg.Validate());
  EXPECT_EQ(cfg.model.num_classes, 11);
  EXPECT_EQ(cfg.sampler.rare_set, (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(cfg.loss.ignore_id, 255);
  EXPECT_EQ(cfg.tiler.tile_size, 1024);
  EXPECT_EQ(cfg.tiler.stride, 768);
}

TEST(RunConfig, EmptyDocumentEqualsDefaults) {
  const RunConfig cfg = RunConfig::FromJson(json::object());
  EXPECT_EQ(cfg.model.Fingerprint(), RunConfig::Defaults().model.Fingerprint());
  EXPECT_EQ(cfg.train.lr0, TrainConfig{}.lr0);
}

TEST(RunConfig, SectionsOverrideDefaults) {
  const RunConfig cfg = RunConfig::FromJson(json::parse(R"({
    "seed": 9,
    "sampler": {"crop_size": 64, "rare_fraction": 0.25},
    "train": {"epochs": 3, "lr0": 0.001},
    "ohem": {"enabled": false},
    "tiler": {"tile_size": 128, "stride": 96},
    "inference": {"workers": 2, "accumulator": "float32"},
    "metrics": {"undefined_class": "zero"},
    "paths": {"data_root": "d", "run_root": "r"}
  })"));
  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.train.seed, 9u);
  EXPECT_EQ(cfg.sampler.crop_size, 64);
  EXPECT_DOUBLE_EQ(cfg.sampler.rare_fraction, 0.25);
  EXPECT_EQ(cfg.sampler.rare_set, (std::vector<int>{3, 4, 5}));
  EXPECT_EQ(cfg.train.epochs, 3);
  EXPECT_FALSE(cfg.loss.use_ohem);
  EXPECT_TRUE(cfg.loss.use_dice);
  EXPECT_EQ(cfg.tiler.tile_size, 128);
  EXPECT_EQ(cfg.inference.workers, 2);
  EXPECT_EQ(cfg.inference.accumulator, Accumulator::kFloat32);
  EXPECT_EQ(cfg.undefined_policy, UndefinedClassPolicy::kAsZero);
  EXPECT_EQ(cfg.paths.data_root, "d");
  EXPECT_EQ(cfg.paths.train_split, "train");
  const TrainSetup setup = cfg.MakeTrainSetup();
  EXPECT_EQ(setup.sampler.crop_size, 64);
  EXPECT_EQ(setup.train.epochs, 3);
}

TEST(RunConfig, UnknownKeysNameTheirPath) {
  EXPECT_EQ(FieldOf(json::parse(R"({"sed": 1})")), "config.sed");
  EXPECT_EQ(FieldOf(json::parse(R"({"train": {"epoch": 1}})")), "train.epoch");
  EXPECT_EQ(FieldOf(json::parse(R"({"ohem": {"top_k": 1}})")), "ohem.top_k");
  EXPECT_EQ(FieldOf(json::parse(R"({"inference": {"threads": 1}})")), "inference.threads");
}

TEST(RunConfig, BadValuesNameTheirField) {
  EXPECT_EQ(FieldOf(json::parse(R"({"model": {"num_classes": 5}})")), "model.num_classes");
  EXPECT_EQ(FieldOf(json::parse(R"({"sampler": {"crop_size": 100}})")), "sampler.crop_size");
  EXPECT_EQ(FieldOf(json::parse(R"({"tiler": {"stride": 0}})")), "tiler.stride");
  EXPECT_EQ(FieldOf(json::parse(R"({"train": {"lr0": "fast"}})")), "train.lr0");
  EXPECT_EQ(FieldOf(json::parse(R"({"inference": {"accumulator": "half"}})")),
            "inference.accumulator");
  EXPECT_EQ(FieldOf(json::parse(R"({"metrics": {"undefined_class": "nan"}})")),
            "metrics.undefined_class");
}

TEST(RunConfig, CustomClassTableRewiresDependents) {
  const RunConfig cfg = RunConfig::FromJson(json::parse(R"({
    "classes": {"ignore_id": 9, "classes": [
      {"id": 0, "name": "ground"}, {"id": 1, "name": "crack", "rare": true},
      {"id": 2, "name": "roof"}]},
    "synth": {"frequencies": [0.7, 0.05, 0.25], "host_class": "roof",
              "textures": [{"color": [0.2, 0.5, 0.2]}, {"color": [0.6, 0.3, 0.3]},
                           {"color": [0.8, 0.8, 0.8]}]}
  })"));
  EXPECT_EQ(cfg.model.num_classes, 3);
  EXPECT_EQ(cfg.sampler.rare_set, (std::vector<int>{1}));
  EXPECT_EQ(cfg.loss.ignore_id, 9);
  EXPECT_EQ(cfg.sampler.ignore_id, 9);
}

TEST(RunConfig, LoadReportsIoAndParseErrors) {
  testing::TempDir dir;
  EXPECT_THROW(RunConfig::Load(dir.path() / "missing.json"), IoError);
  const auto bad = dir.path() / "bad.json";
  std::ofstream(bad) << "{ not json";
  EXPECT_THROW(RunConfig::Load(bad), ConfigError);
  const auto good = dir.path() / "good.json";
  std::ofstream(good) << R"({"seed": 4})";
  EXPECT_EQ(RunConfig::Load(good).seed, 4u);
}

TEST(RunConfig, BundledSyntheticConfigLoads) {
  const RunConfig cfg = RunConfig::Load(std::string(RARESEG_SOURCE_DIR) + "/configs/synthetic.json");
  EXPECT_EQ(cfg.sampler.crop_size, 64);
  EXPECT_EQ(cfg.tiler.tile_size, 128);
  EXPECT_DOUBLE_EQ(cfg.train.lr0, 1e-3);
}

}  // namespace
}  // namespace rareseg
