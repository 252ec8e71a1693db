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
#include "rareseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <sstream>

#include <omp.h>

namespace rareseg {
namespace {

Rng DerivedRng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),
                    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),
                    static_cast<std::uint32_t>(b >> 32)};
  return Rng(seq);
}

constexpr std::uint64_t kOrderStream = 0xFFFFFFFFull;

double GlobalNorm(const ParameterSet& grads) {
  double sq = 0.0;
  for (const auto& e : grads.entries()) {
    for (double g : e.tensor.data) sq += g * g;
  }
  return std::sqrt(sq);
}

void Scale(ParameterSet& grads, double factor) {
  for (auto& e : grads.entries()) {
    for (double& g : e.tensor.data) g *= factor;
  }
}

}  // namespace

std::vector<TrainSample> MakeTrainSamples(std::vector<Image> images,
                                          std::vector<LabelMask> masks,
                                          std::span<const int> rare_set) {
  if (images.size() != masks.size()) {
    throw ShapeError("trainer", "image and mask counts differ");
  }
  std::vector<TrainSample> out(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].height != masks[i].height || images[i].width != masks[i].width) {
      throw ShapeError("trainer", "sample " + std::to_string(i) +
                                      ": image and mask sizes differ");
    }
    out[i].rare_pixels = find_rare_class_pixels(masks[i], rare_set);
    out[i].image = std::move(images[i]);
    out[i].mask = std::move(masks[i]);
  }
  return out;
}

std::string TrainLogHeader() {
  return "step,lr,loss_total,loss_ohem,loss_dice,kept_pixels";
}

std::string TrainLogRow(const StepRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.step << ',' << r.lr << ',' << r.loss.loss_total << ','
     << r.loss.loss_ohem << ',' << r.loss.loss_dice << ','
     << r.loss.kept_pixel_count;
  return os.str();
}

Trainer::Trainer(TrainSetup setup, std::vector<TrainSample> data)
    : setup_(std::move(setup)), data_(std::move(data)) {
  setup_.model.Validate();
  setup_.train.Validate();
  setup_.sampler.Validate();
  setup_.augment.Validate();
  setup_.loss.ohem.Validate();
  setup_.loss.dice.Validate(setup_.model.num_classes);
  if (data_.empty()) throw ValidationError("trainer", "empty training set");
  if (setup_.sampler.crop_size % 32 != 0) {
    throw ConfigError("sampler.crop_size", "must be a multiple of 32 for the model");
  }
  const auto n = static_cast<std::int64_t>(data_.size());
  const std::int64_t b = setup_.train.batch_size;
  steps_per_epoch_ = setup_.train.steps_per_epoch > 0
                         ? setup_.train.steps_per_epoch
                         : (n + b - 1) / b;
  params_ = init_parameters(setup_.model, setup_.train.seed);
  RoundToFloat(params_);
  state_ = OptimizerState::ZerosLike(params_);
}

Trainer::Trainer(TrainSetup setup, std::vector<TrainSample> data,
                 const Checkpoint& checkpoint)
    : Trainer(std::move(setup), std::move(data)) {
  if (checkpoint.model.Fingerprint() != setup_.model.Fingerprint()) {
    throw ValidationError("trainer", "checkpoint model config differs from run config");
  }
  if (!checkpoint.optimizer) {
    throw ValidationError("trainer", "checkpoint has no optimizer state");
  }
  params_ = checkpoint.params;
  state_ = *checkpoint.optimizer;
}

std::vector<std::size_t> Trainer::EpochOrder(std::int64_t epoch) const {
  std::vector<std::size_t> order(data_.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = DerivedRng(setup_.train.seed, kOrderStream,
                       static_cast<std::uint64_t>(epoch));
  // Fisher-Yates with explicit draws; std::shuffle's draw pattern is
  // implementation-defined.
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

Crop Trainer::DrawCrop(std::int64_t t, int b) const {
  const std::int64_t epoch = t / steps_per_epoch_;
  const std::int64_t within = t % steps_per_epoch_;
  const auto order = EpochOrder(epoch);
  const std::size_t slot =
      static_cast<std::size_t>(within * setup_.train.batch_size + b) % order.size();
  const TrainSample& s = data_[order[slot]];
  Rng rng = DerivedRng(setup_.train.seed, static_cast<std::uint64_t>(t),
                       static_cast<std::uint64_t>(b));
  Crop crop = sample_crop(s.image, s.mask, s.rare_pixels, setup_.sampler, rng);
  augment(crop.image, crop.mask, setup_.augment, rng);
  return crop;
}

StepRecord Trainer::Step() {
  if (done()) throw ValidationError("trainer", "training already complete");
  const std::int64_t t = state_.step;
  const int batch = setup_.train.batch_size;

  std::vector<Crop> crops(static_cast<std::size_t>(batch));
  std::exception_ptr failure;
#pragma omp parallel for num_threads(setup_.train.workers) schedule(static, 1)
  for (int b = 0; b < batch; ++b) {
    try {
      crops[static_cast<std::size_t>(b)] = DrawCrop(t, b);
    } catch (...) {
#pragma omp critical(rareseg_trainer_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<Network> nets;
  std::vector<LogitMap> logits;
  std::vector<LabelMask> masks;
  nets.reserve(crops.size());
  for (auto& crop : crops) {
    nets.emplace_back(setup_.model);
    logits.push_back(nets.back().Forward(crop.image, params_));
    masks.push_back(std::move(crop.mask));
  }

  TotalLoss loss;
  try {
    loss = total_loss(StackRows(logits), StackRows(masks), setup_.loss);
  } catch (const ValidationError& e) {
    throw TrainingError(t, e.what());
  }
  const auto dlogits = SplitRows(loss.grad, batch);

  ParameterSet grads = params_.ZerosLike();
  for (std::size_t b = 0; b < nets.size(); ++b) {
    nets[b].Backward(dlogits[b], params_, grads);
  }
  const double norm = GlobalNorm(grads);
  if (!std::isfinite(norm)) throw TrainingError(t, "non-finite gradient");
  if (setup_.train.clip_norm > 0.0 && norm > setup_.train.clip_norm) {
    Scale(grads, setup_.train.clip_norm / norm);
  }

  StepRecord record;
  record.step = t;
  record.epoch = static_cast<int>(t / steps_per_epoch_);
  record.lr = cosine_lr(t, total_steps(), setup_.train.lr0, setup_.train.lr_min);
  record.loss = std::move(loss.report);

  adamw_step(params_, grads, state_, record.lr, setup_.train);
  RoundToFloat(params_);
  RoundToFloat(state_.m);
  RoundToFloat(state_.v);
  return record;
}

void Trainer::Save(const std::filesystem::path& path) const {
  nlohmann::json meta;
  meta["seed"] = setup_.train.seed;
  meta["total_steps"] = total_steps();
  SaveCheckpoint(path, setup_.model, params_, &state_, std::move(meta));
}

TrainResult train(Trainer& trainer, const TrainHooks& hooks) {
  std::ofstream log;
  if (!hooks.log_path.empty()) {
    if (hooks.log_path.has_parent_path()) {
      std::filesystem::create_directories(hooks.log_path.parent_path());
    }
    const bool fresh = trainer.step() == 0 || !std::filesystem::exists(hooks.log_path);
    log.open(hooks.log_path, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError("trainer", "cannot write " + hooks.log_path.string());
    if (fresh) log << TrainLogHeader() << '\n';
  }

  const int every = trainer.setup().train.checkpoint_every;
  const std::int64_t spe = trainer.steps_per_epoch();
  TrainResult result;
  while (!trainer.done()) {
    StepRecord rec = trainer.Step();
    if (log.is_open()) log << TrainLogRow(rec) << '\n' << std::flush;
    if (hooks.on_step) hooks.on_step(rec);
    const std::int64_t completed = trainer.step();
    if (!hooks.checkpoint_dir.empty() && every > 0 && completed % spe == 0) {
      const std::int64_t epoch = completed / spe;
      if (epoch % every == 0 && !trainer.done()) {
        trainer.Save(hooks.checkpoint_dir /
                     ("epoch_" + std::to_string(epoch) + ".ckpt"));
      }
    }
    result.log.push_back(std::move(rec));
  }
  if (!hooks.checkpoint_dir.empty()) trainer.Save(hooks.checkpoint_dir / "final.ckpt");
  result.params = trainer.params();
  return result;
}

}  // namespace rareseg
