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
#ifndef RARESEG_OPTIM_HPP_
#define RARESEG_OPTIM_HPP_

#include <cstdint>
#include <string>

#include "json.hpp"
#include "rareseg/params.hpp"

namespace rareseg {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 2;
  double lr0 = 6e-5;
  double lr_min = 0.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  // 0 means one crop per training image per epoch: ceil(images / batch).
  int steps_per_epoch = 0;
  // Save a checkpoint every N epochs (0: only at the end).
  int checkpoint_every = 0;
  // Global gradient-norm clip; 0 disables.
  double clip_norm = 0.0;
  // Parallel crop sampling. Results do not depend on this value.
  int workers = 1;

  void Validate() const;
  static TrainConfig FromJson(const nlohmann::json& doc, TrainConfig base,
                              const std::string& path = "train");
};

struct OptimizerState {
  ParameterSet m;
  ParameterSet v;
  std::int64_t step = 0;

  static OptimizerState ZerosLike(const ParameterSet& params);
};

// lr(t) = lr_min + (lr0 - lr_min) * (1 + cos(pi * t / total)) / 2
double cosine_lr(std::int64_t t, std::int64_t total, double lr0, double lr_min);

// One AdamW update with decoupled weight decay:
//   m = b1 m + (1-b1) g;  v = b2 v + (1-b2) g^2
//   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta)
void adamw_step(ParameterSet& params, const ParameterSet& grads,
                OptimizerState& state, double lr, const TrainConfig& cfg);

// Rounds every value to the nearest 32-bit float, so the state survives a
// float32 checkpoint exactly.
void RoundToFloat(ParameterSet& params);

}  // namespace rareseg

#endif  // RARESEG_OPTIM_HPP_
