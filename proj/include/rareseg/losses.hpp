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
#ifndef RARESEG_LOSSES_HPP_
#define RARESEG_LOSSES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

// Hard-pixel mining. When `k` is 0 the kept count is derived from the batch
// as max(round(ratio * pixels), min_kept).
struct OhemConfig {
  std::size_t k = 0;
  double ratio = 0.1;
  std::size_t min_kept = 1;

  std::size_t KeptFor(std::size_t batch_pixels) const;
  void Validate() const;
};

struct DiceConfig {
  double epsilon = 1.0;
  std::vector<double> class_weights;  // empty = uniform
  void Validate(int num_classes) const;
};

// Which terms make up the objective. With both flags off the objective is
// plain mean cross-entropy (reported in the loss_ohem slot).
struct LossConfig {
  OhemConfig ohem;
  DiceConfig dice;
  bool use_ohem = true;
  bool use_dice = true;
  std::uint8_t ignore_id = 255;

  // Reads the optional "ohem" and "dice" sections of a config document.
  static LossConfig FromJson(const nlohmann::json& root, LossConfig base);
};

struct CeMap {
  std::vector<double> loss;        // per pixel; 0 where excluded
  std::vector<std::uint8_t> valid;  // 0 for ignore pixels
  std::size_t valid_count = 0;
};

// loss_p = -log softmax(z_p)[y_p]. Throws ValidationError on non-finite
// logits or labels outside [0, C) that are not the ignore id.
CeMap pixel_ce_map(const LogitMap& logits, const LabelMask& labels,
                   std::uint8_t ignore_id = 255);

// Valid pixel indices ranked by loss descending, ties by index ascending,
// truncated to min(k, valid count). Throws if there are no valid pixels.
std::vector<std::size_t> ohem_select(const CeMap& ce, std::size_t k);

struct OhemResult {
  double value = 0.0;
  std::size_t kept = 0;
  LogitMap grad;
};

// Mean cross-entropy over the k hardest valid pixels. The selection is held
// fixed when differentiating, so the gradient is exactly zero elsewhere.
OhemResult ohem_loss(const LogitMap& logits, const LabelMask& labels,
                     std::size_t k, std::uint8_t ignore_id = 255);

// Smoothed per-class Dice over valid pixels:
//   (2 sum p*g + eps) / (sum p + sum g + eps)
std::vector<double> dice_per_class(const ProbabilityMap& probs,
                                   const LabelMask& labels,
                                   const DiceConfig& cfg,
                                   std::uint8_t ignore_id = 255);

struct DiceResult {
  double value = 0.0;
  std::vector<double> per_class;
  LogitMap grad;  // w.r.t. the logits that produced `probs`
};

// 1 - weighted mean of Dice_c, gradient pushed back through the softmax.
DiceResult dice_loss(const ProbabilityMap& probs, const LabelMask& labels,
                     const DiceConfig& cfg, std::uint8_t ignore_id = 255);

struct LossReport {
  double loss_ohem = 0.0;
  double loss_dice = 0.0;
  double loss_total = 0.0;
  std::size_t kept_pixel_count = 0;
  std::vector<double> dice_per_class;
};

struct TotalLoss {
  LossReport report;
  LogitMap grad;
};

// L_total = L_dice + L_ohem with the summed gradient. A batch is passed as a
// single map (crops stacked along rows); every term is pixel-pooled.
TotalLoss total_loss(const LogitMap& logits, const LabelMask& labels,
                     const LossConfig& cfg);

// Stacks equally sized maps along the row axis.
LogitMap StackRows(std::span<const LogitMap> maps);
LabelMask StackRows(std::span<const LabelMask> masks);
// Inverse of StackRows for a batch of `count` equal maps.
std::vector<LogitMap> SplitRows(const LogitMap& stacked, int count);

}  // namespace rareseg

#endif  // RARESEG_LOSSES_HPP_
