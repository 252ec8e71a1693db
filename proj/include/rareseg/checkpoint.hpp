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
#ifndef RARESEG_CHECKPOINT_HPP_
#define RARESEG_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>

#include "json.hpp"
#include "rareseg/model.hpp"
#include "rareseg/optim.hpp"
#include "rareseg/params.hpp"

namespace rareseg {

// Binary layout, all integers little-endian:
//   "RSEGCKPT" | u32 version | u64 model fingerprint
//   u32 metadata length | metadata JSON
//   u32 tensor count | per tensor: u32 name length, name, u32 rank,
//                      rank x u32 dims, float32 payload
// Optimizer moments, when present, are stored as "optim.m/<name>" and
// "optim.v/<name>" tensors.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig model;
  ParameterSet params;
  std::optional<OptimizerState> optimizer;
  nlohmann::json metadata = nlohmann::json::object();
};

// Writes atomically (temporary file then rename). `metadata` receives the
// "model" and "step" keys.
void SaveCheckpoint(const std::filesystem::path& path, const ModelConfig& model,
                    const ParameterSet& params, const OptimizerState* optimizer,
                    nlohmann::json metadata = nlohmann::json::object());

// Throws IoError on a malformed file or a fingerprint mismatch between the
// stored config and the header.
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace rareseg

#endif  // RARESEG_CHECKPOINT_HPP_
