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
#ifndef RARESEG_CONFIG_HPP_
#define RARESEG_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "rareseg/class_table.hpp"
#include "rareseg/losses.hpp"
#include "rareseg/metrics.hpp"
#include "rareseg/model.hpp"
#include "rareseg/optim.hpp"
#include "rareseg/sampler.hpp"
#include "rareseg/synth.hpp"
#include "rareseg/tiler.hpp"
#include "rareseg/trainer.hpp"

namespace rareseg {

struct PathsConfig {
  std::string data_root = "data";  // holds <split>/images and <split>/masks
  std::string run_root = "run";    // run/<timestamp>/...
  std::string train_split = "train";
  std::string eval_split = "val";
};

// Whole-pipeline configuration document:
//   { "seed", "classes", "synth", "sampler", "augment", "model", "train",
//     "ohem", "dice", "tiler", "inference", "metrics", "paths" }
// Every section is optional and falls back to library defaults. Unknown
// keys anywhere are ConfigErrors carrying the dotted path.
struct RunConfig {
  std::uint64_t seed = 0;
  ClassTable classes = ClassTable::Default();
  SynthSpec synth = SynthSpec::Default();
  SamplePolicy sampler;
  AugConfig augment;
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  TileSpec tiler;
  TileOptions inference;
  UndefinedClassPolicy undefined_policy = UndefinedClassPolicy::kExclude;
  PathsConfig paths;

  // Library defaults wired to the default class table.
  static RunConfig Defaults();
  static RunConfig FromJson(const nlohmann::json& doc);
  static RunConfig Load(const std::filesystem::path& path);

  TrainSetup MakeTrainSetup() const;
  // Cross-section checks (class counts, ignore ids, crop vs. model stride).
  void Validate() const;
};

}  // namespace rareseg

#endif  // RARESEG_CONFIG_HPP_
