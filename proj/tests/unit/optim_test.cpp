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
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "rareseg/error.hpp"
#include "rareseg/optim.hpp"

namespace rareseg {
namespace {

ParameterSet Scalar(double v) {
  ParameterSet ps;
  ps.Add("theta", {1}).data[0] = v;
  return ps;
}

TEST(CosineLr, Endpoints) {
  EXPECT_EQ(cosine_lr(0, 100, 6e-5, 0.0), 6e-5);
  EXPECT_NEAR(cosine_lr(100, 100, 6e-5, 1e-6), 1e-6, 1e-20);
  EXPECT_NEAR(cosine_lr(50, 100, 6e-5, 1e-6), (6e-5 + 1e-6) / 2, 1e-18);
}

TEST(CosineLr, ClosedFormEverywhere) {
  for (int t = 0; t <= 37; ++t) {
    const double want = 1e-4 + 0.5 * (1e-3 - 1e-4) * (1 + std::cos(std::numbers::pi * t / 37.0));
    EXPECT_NEAR(cosine_lr(t, 37, 1e-3, 1e-4), want, 1e-15);
  }
}

TEST(AdamW, ZeroGradientIsPureDecay) {
  TrainConfig cfg;
  ParameterSet p = Scalar(2.0);
  OptimizerState st = OptimizerState::ZerosLike(p);
  adamw_step(p, Scalar(0.0), st, 0.1, cfg);
  EXPECT_NEAR(p.at("theta")[0], 2.0 * (1 - 0.1 * 0.01), 1e-15);
}

TEST(AdamW, FirstStepScalar) {
  TrainConfig cfg;
  const double lr = 6e-5;
  ParameterSet p = Scalar(1.0);
  OptimizerState st = OptimizerState::ZerosLike(p);
  adamw_step(p, Scalar(1.0), st, lr, cfg);
  // m_hat = v_hat = 1.
  EXPECT_NEAR(p.at("theta")[0], 1.0 - lr * (1.0 / (1.0 + 1e-8) + 0.01), 1e-16);
  EXPECT_EQ(st.step, 1);
  EXPECT_NEAR(st.m.at("theta")[0], 0.1, 1e-16);
  EXPECT_NEAR(st.v.at("theta")[0], 0.001, 1e-16);
}

TEST(AdamW, IdenticalStepsFromIdenticalStateAgree) {
  TrainConfig cfg;
  ParameterSet a = Scalar(0.3), b = Scalar(0.3);
  OptimizerState sa = OptimizerState::ZerosLike(a), sb = OptimizerState::ZerosLike(b);
  for (int i = 0; i < 5; ++i) {
    adamw_step(a, Scalar(0.1 * i - 0.2), sa, 1e-3, cfg);
    adamw_step(b, Scalar(0.1 * i - 0.2), sb, 1e-3, cfg);
  }
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(sa.m == sb.m);
  EXPECT_TRUE(sa.v == sb.v);
}

TEST(AdamW, MismatchedShapesThrow) {
  TrainConfig cfg;
  ParameterSet p = Scalar(1.0);
  OptimizerState st = OptimizerState::ZerosLike(p);
  EXPECT_THROW(adamw_step(p, ParameterSet{}, st, 1e-3, cfg), ShapeError);
}

TEST(TrainConfig, Invariants) {
  TrainConfig cfg;
  cfg.lr_min = cfg.lr0;
  EXPECT_THROW(cfg.Validate(), ConfigError);
  TrainConfig zero;
  zero.epochs = 0;
  EXPECT_THROW(zero.Validate(), ConfigError);
  const auto doc = nlohmann::json::parse(R"({"epochs":3,"betas":[0.8,0.99],"lr0":1e-3})");
  const TrainConfig read = TrainConfig::FromJson(doc, TrainConfig{});
  EXPECT_EQ(read.epochs, 3);
  EXPECT_EQ(read.beta1, 0.8);
  EXPECT_EQ(read.beta2, 0.99);
  try {
    TrainConfig::FromJson(nlohmann::json::parse(R"({"epoch":3})"), TrainConfig{});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "train.epoch");
  }
}

}  // namespace
}  // namespace rareseg
