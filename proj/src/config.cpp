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
#include "rareseg/config.hpp"

#include <fstream>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {
namespace {

void WireClassTable(RunConfig& cfg) {
  const auto rare = cfg.classes.rare_set();
  cfg.sampler.rare_set = rare;
  cfg.sampler.ignore_id = cfg.classes.ignore_id();
  cfg.loss.ignore_id = cfg.classes.ignore_id();
  cfg.model.num_classes = cfg.classes.size();
  cfg.synth.rare_set = rare;
}

}  // namespace

RunConfig RunConfig::Defaults() {
  RunConfig cfg;
  WireClassTable(cfg);
  return cfg;
}

RunConfig RunConfig::FromJson(const nlohmann::json& doc) {
  using json_fields::Read;
  json_fields::CheckKeys(doc, "config",
                         {"seed", "classes", "synth", "sampler", "augment",
                          "model", "train", "ohem", "dice", "tiler",
                          "inference", "metrics", "paths"});
  RunConfig cfg = Defaults();
  Read(doc, "config", "seed", cfg.seed);
  cfg.train.seed = cfg.seed;

  if (auto it = doc.find("classes"); it != doc.end()) {
    cfg.classes = ClassTable::FromJson(*it, "classes");
  }
  WireClassTable(cfg);
  const nlohmann::json empty = nlohmann::json::object();
  auto section = [&](const char* key) -> const nlohmann::json& {
    auto it = doc.find(key);
    return it == doc.end() ? empty : *it;
  };

  cfg.synth = SynthSpec::FromJson(section("synth"), cfg.classes, "synth");
  cfg.sampler = SamplePolicy::FromJson(section("sampler"), cfg.sampler, "sampler");
  cfg.augment = AugConfig::FromJson(section("augment"), cfg.augment, "augment");

  if (auto it = doc.find("model"); it != doc.end()) {
    if (it->is_object() && it->contains("num_classes") &&
        (*it)["num_classes"] != cfg.classes.size()) {
      throw ConfigError("model.num_classes", "must equal the class table size");
    }
  }
  cfg.model = ModelConfig::FromJson(section("model"), cfg.model, "model");
  cfg.train = TrainConfig::FromJson(section("train"), cfg.train, "train");
  cfg.loss = LossConfig::FromJson(doc, cfg.loss);
  cfg.loss.dice.Validate(cfg.classes.size());
  cfg.tiler = TileSpec::FromJson(section("tiler"), cfg.tiler, "tiler");

  if (auto it = doc.find("inference"); it != doc.end()) {
    json_fields::CheckKeys(*it, "inference", {"workers", "accumulator"});
    Read(*it, "inference", "workers", cfg.inference.workers);
    if (cfg.inference.workers < 1) {
      throw ConfigError("inference.workers", "must be >= 1");
    }
    std::string acc = "float64";
    Read(*it, "inference", "accumulator", acc);
    if (acc == "float32") {
      cfg.inference.accumulator = Accumulator::kFloat32;
    } else if (acc == "float64") {
      cfg.inference.accumulator = Accumulator::kFloat64;
    } else {
      throw ConfigError("inference.accumulator", "expected float32 or float64");
    }
  }
  if (auto it = doc.find("metrics"); it != doc.end()) {
    json_fields::CheckKeys(*it, "metrics", {"undefined_class"});
    std::string policy = "exclude";
    Read(*it, "metrics", "undefined_class", policy);
    if (policy == "exclude") {
      cfg.undefined_policy = UndefinedClassPolicy::kExclude;
    } else if (policy == "zero") {
      cfg.undefined_policy = UndefinedClassPolicy::kAsZero;
    } else {
      throw ConfigError("metrics.undefined_class", "expected exclude or zero");
    }
  }
  if (auto it = doc.find("paths"); it != doc.end()) {
    json_fields::CheckKeys(*it, "paths",
                           {"data_root", "run_root", "train_split", "eval_split"});
    Read(*it, "paths", "data_root", cfg.paths.data_root);
    Read(*it, "paths", "run_root", cfg.paths.run_root);
    Read(*it, "paths", "train_split", cfg.paths.train_split);
    Read(*it, "paths", "eval_split", cfg.paths.eval_split);
  }
  cfg.Validate();
  return cfg;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config", "cannot open " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return FromJson(doc);
}

TrainSetup RunConfig::MakeTrainSetup() const {
  return TrainSetup{model, train, loss, sampler, augment};
}

void RunConfig::Validate() const {
  model.Validate();
  train.Validate();
  sampler.Validate();
  augment.Validate();
  loss.ohem.Validate();
  loss.dice.Validate(classes.size());
  tiler.Validate();
  if (model.num_classes != classes.size()) {
    throw ConfigError("model.num_classes", "must equal the class table size");
  }
  if (sampler.crop_size % 32 != 0) {
    throw ConfigError("sampler.crop_size", "must be a multiple of 32");
  }
  if (static_cast<int>(synth.frequencies.size()) != classes.size()) {
    throw ConfigError("synth.frequencies", "need one entry per class");
  }
}

}  // namespace rareseg
