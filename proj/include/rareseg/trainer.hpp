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
#ifndef RARESEG_TRAINER_HPP_
#define RARESEG_TRAINER_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "json.hpp"
#include "rareseg/checkpoint.hpp"
#include "rareseg/error.hpp"
#include "rareseg/losses.hpp"
#include "rareseg/model.hpp"
#include "rareseg/optim.hpp"
#include "rareseg/sampler.hpp"

namespace rareseg {

// Raised when a step produces a non-finite loss or gradient. Parameters are
// left at their value before the failing step.
class TrainingError : public Error {
 public:
  TrainingError(std::int64_t step, const std::string& what)
      : Error("trainer", "step " + std::to_string(step) + ": " + what),
        step_(step) {}
  std::int64_t step() const { return step_; }

 private:
  std::int64_t step_;
};

struct TrainSample {
  Image image;
  LabelMask mask;
  std::vector<PixelCoord> rare_pixels;
};

// Pairs images and masks and precomputes rare-pixel lists.
std::vector<TrainSample> MakeTrainSamples(std::vector<Image> images,
                                          std::vector<LabelMask> masks,
                                          std::span<const int> rare_set);

struct TrainSetup {
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  SamplePolicy sampler;
  AugConfig augment;
};

struct StepRecord {
  std::int64_t step = 0;  // 0-based index of the optimizer step
  int epoch = 0;
  double lr = 0.0;
  LossReport loss;
};

// `step,lr,loss_total,loss_ohem,loss_dice,kept_pixels`
std::string TrainLogHeader();
std::string TrainLogRow(const StepRecord& record);

class Trainer {
 public:
  // Fresh run: parameters from init_parameters(model, train.seed).
  Trainer(TrainSetup setup, std::vector<TrainSample> data);
  // Resumes from a checkpoint carrying optimizer state.
  Trainer(TrainSetup setup, std::vector<TrainSample> data,
          const Checkpoint& checkpoint);

  std::int64_t steps_per_epoch() const { return steps_per_epoch_; }
  std::int64_t total_steps() const {
    return steps_per_epoch_ * setup_.train.epochs;
  }
  std::int64_t step() const { return state_.step; }
  bool done() const { return step() >= total_steps(); }

  const TrainSetup& setup() const { return setup_; }
  const ParameterSet& params() const { return params_; }
  const OptimizerState& optimizer() const { return state_; }

  // Sample a batch, forward, loss, backward, AdamW with the cosine rate.
  StepRecord Step();

  void Save(const std::filesystem::path& path) const;

  // Crop drawn for element `b` of step `t`; exposed for inspection.
  Crop DrawCrop(std::int64_t t, int b) const;

 private:
  std::vector<std::size_t> EpochOrder(std::int64_t epoch) const;

  TrainSetup setup_;
  std::vector<TrainSample> data_;
  std::int64_t steps_per_epoch_ = 0;
  ParameterSet params_;
  OptimizerState state_;
};

struct TrainHooks {
  // Checkpoints go here as epoch_<n>.ckpt and final.ckpt; empty disables.
  std::filesystem::path checkpoint_dir;
  // CSV training log; empty disables.
  std::filesystem::path log_path;
  std::function<void(const StepRecord&)> on_step;
};

struct TrainResult {
  ParameterSet params;
  std::vector<StepRecord> log;
};

// Runs the trainer to completion. On a TrainingError the most recent
// checkpoint on disk is left untouched and the error propagates.
TrainResult train(Trainer& trainer, const TrainHooks& hooks = {});

}  // namespace rareseg

#endif  // RARESEG_TRAINER_HPP_
