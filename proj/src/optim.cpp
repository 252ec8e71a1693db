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
#include "rareseg/optim.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {

void TrainConfig::Validate() const {
  if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
  if (!(lr0 > lr_min && lr_min >= 0.0)) {
    throw ConfigError("train.lr0", "need lr0 > lr_min >= 0");
  }
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay", "must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0,1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0,1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps", "must be > 0");
  if (steps_per_epoch < 0) throw ConfigError("train.steps_per_epoch", "must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every", "must be >= 0");
  if (clip_norm < 0.0) throw ConfigError("train.clip_norm", "must be >= 0");
  if (workers < 1) throw ConfigError("train.workers", "must be >= 1");
}

TrainConfig TrainConfig::FromJson(const nlohmann::json& doc, TrainConfig base,
                                  const std::string& path) {
  using json_fields::Read;
  json_fields::CheckKeys(doc, path,
                         {"epochs", "batch_size", "lr0", "lr_min",
                          "weight_decay", "betas", "eps", "seed",
                          "steps_per_epoch", "checkpoint_every", "clip_norm",
                          "workers"});
  Read(doc, path, "epochs", base.epochs);
  Read(doc, path, "batch_size", base.batch_size);
  Read(doc, path, "lr0", base.lr0);
  Read(doc, path, "lr_min", base.lr_min);
  Read(doc, path, "weight_decay", base.weight_decay);
  std::array<double, 2> betas{base.beta1, base.beta2};
  Read(doc, path, "betas", betas);
  base.beta1 = betas[0];
  base.beta2 = betas[1];
  Read(doc, path, "eps", base.eps);
  Read(doc, path, "seed", base.seed);
  Read(doc, path, "steps_per_epoch", base.steps_per_epoch);
  Read(doc, path, "checkpoint_every", base.checkpoint_every);
  Read(doc, path, "clip_norm", base.clip_norm);
  Read(doc, path, "workers", base.workers);
  base.Validate();
  return base;
}

OptimizerState OptimizerState::ZerosLike(const ParameterSet& params) {
  return {params.ZerosLike(), params.ZerosLike(), 0};
}

double cosine_lr(std::int64_t t, std::int64_t total, double lr0,
                 double lr_min) {
  if (total <= 0) return lr0;
  return lr_min + 0.5 * (lr0 - lr_min) *
                      (1.0 + std::cos(std::numbers::pi * static_cast<double>(t) /
                                      static_cast<double>(total)));
}

void adamw_step(ParameterSet& params, const ParameterSet& grads,
                OptimizerState& state, double lr, const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ShapeError("trainer", "optimizer state does not match parameters");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t e = 0; e < params.size(); ++e) {
    auto& theta = params.entries()[e].tensor.data;
    const auto& g = grads.entries()[e].tensor.data;
    auto& m = state.m.entries()[e].tensor.data;
    auto& v = state.v.entries()[e].tensor.data;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                        cfg.weight_decay * theta[i]);
    }
  }
}

void RoundToFloat(ParameterSet& params) {
  for (auto& e : params.entries()) {
    for (double& v : e.tensor.data) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace rareseg
