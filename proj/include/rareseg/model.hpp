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
#ifndef RARESEG_MODEL_HPP_
#define RARESEG_MODEL_HPP_

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rareseg/params.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

// Strided convolution used to downsample between stages. Kernel larger than
// stride gives overlapping receptive fields.
struct MergeSpec {
  int kernel = 3;
  int stride = 2;
  int padding = 1;
  bool operator==(const MergeSpec&) const = default;
};

// Four-stage hierarchical encoder plus all-MLP decoder.
struct ModelConfig {
  int num_classes = 11;
  int in_channels = 3;
  std::array<int, 4> depths{1, 1, 1, 1};
  std::array<int, 4> dims{16, 32, 64, 128};
  std::array<int, 4> heads{1, 2, 4, 8};
  // Keys/values are computed on a map downsampled by this factor.
  std::array<int, 4> sr_ratios{8, 4, 2, 1};
  std::array<MergeSpec, 4> merges{MergeSpec{7, 4, 3}, MergeSpec{3, 2, 1},
                                  MergeSpec{3, 2, 1}, MergeSpec{3, 2, 1}};
  int mlp_ratio = 4;
  int decoder_dim = 64;
  // Per-channel input standardization applied inside the forward pass.
  std::array<double, 3> input_mean{0.5, 0.5, 0.5};
  std::array<double, 3> input_std{0.25, 0.25, 0.25};

  static ModelConfig Nano() { return {}; }
  void Validate() const;
  static ModelConfig FromJson(const nlohmann::json& doc, ModelConfig base,
                              const std::string& path = "model");
  nlohmann::json ToJson() const;
  // Stable 64-bit hash of ToJson(); stored in checkpoints.
  std::uint64_t Fingerprint() const;
};

// Token-major (HWC) activation map.
struct FeatureMap {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(int h, int w, int c)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, 0.0) {}
  int tokens() const { return height * width; }
};

struct StageFeatures {
  std::array<FeatureMap, 4> maps;
};

// Truncated normal (sigma 0.02, cut at 2 sigma) weights, zero biases, unit
// layer-norm gains. Deterministic per seed.
ParameterSet init_parameters(const ModelConfig& cfg, std::uint64_t seed);

// Output spatial size of a strided convolution.
int MergedSize(int in, const MergeSpec& spec);

// Convolution only (no normalization). weight is [k*k*in_c, out_c].
FeatureMap overlapped_patch_merge(const FeatureMap& input,
                                  const MergeSpec& spec, const Tensor& weight,
                                  const Tensor& bias);

// One transformer block of `stage` (0-based):
//   x += Attn(LN1(x));  x += FC2(GELU(DWConv3x3(FC1(LN2(x)))))
FeatureMap transformer_block(const FeatureMap& x, const ModelConfig& cfg,
                             int stage, int block, const ParameterSet& params);
// All blocks of a stage; spatial size unchanged.
FeatureMap transformer_stage(const FeatureMap& x, const ModelConfig& cfg,
                             int stage, const ParameterSet& params);

// Requires height and width divisible by 32.
StageFeatures encoder_forward(const Image& image, const ModelConfig& cfg,
                              const ParameterSet& params);
// Logits at the first-stage resolution (H/4 x W/4).
LogitMap decoder_forward(const StageFeatures& features, const ModelConfig& cfg,
                         const ParameterSet& params);
// Decoder logits bilinearly upsampled to the input resolution.
LogitMap model_forward(const Image& image, const ModelConfig& cfg,
                       const ParameterSet& params);

// Forward pass that records what backward needs, and the matching
// reverse pass producing parameter gradients.
class Network {
 public:
  explicit Network(ModelConfig cfg);
  ~Network();
  Network(Network&&) noexcept;
  Network& operator=(Network&&) noexcept;

  const ModelConfig& config() const { return cfg_; }

  // Full-resolution logits; keeps activations for Backward.
  LogitMap Forward(const Image& image, const ParameterSet& params);
  // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(logits) for
  // the most recent Forward.
  void Backward(const LogitMap& dlogits, const ParameterSet& params,
                ParameterSet& grads);

 private:
  struct Tape;
  ModelConfig cfg_;
  std::unique_ptr<Tape> tape_;
};

}  // namespace rareseg

#endif  // RARESEG_MODEL_HPP_
