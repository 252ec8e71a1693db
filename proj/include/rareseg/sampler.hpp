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
#ifndef RARESEG_SAMPLER_HPP_
#define RARESEG_SAMPLER_HPP_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

using Rng = std::mt19937_64;

struct PixelCoord {
  int row = 0;
  int col = 0;
  bool operator==(const PixelCoord&) const = default;
};

struct SamplePolicy {
  int crop_size = 128;
  double rare_fraction = 0.5;
  std::vector<int> rare_set;
  // Uniform jitter applied to the crop center in the rare branch. Negative
  // means crop_size / 4.
  int center_jitter = -1;
  // Pick a rare class uniformly first, then a pixel of it, instead of a
  // pixel uniformly over all rare pixels.
  bool per_class_uniform = false;
  std::uint8_t ignore_id = 255;

  int jitter() const { return center_jitter < 0 ? crop_size / 4 : center_jitter; }
  void Validate() const;
  static SamplePolicy FromJson(const nlohmann::json& doc, SamplePolicy base,
                               const std::string& path = "sampler");
};

struct AugConfig {
  double hflip_prob = 0.5;
  double vflip_prob = 0.5;
  // Probability of applying a rotation drawn uniformly from `rotations`
  // (quarter turns counterclockwise, each in {1,2,3}).
  double rotate_prob = 0.5;
  std::vector<int> rotations{1, 2, 3};
  double photometric_prob = 0.5;
  double brightness_delta = 0.1;
  double contrast_delta = 0.1;
  double hue_delta = 0.05;  // fraction of a full hue turn

  static AugConfig Identity();
  void Validate() const;
  static AugConfig FromJson(const nlohmann::json& doc, AugConfig base,
                            const std::string& path = "augment");
};

// Rare-class coordinates in raster order.
std::vector<PixelCoord> find_rare_class_pixels(const LabelMask& mask,
                                               std::span<const int> rare_set);

struct Crop {
  Image image;
  LabelMask mask;
  int origin_row = 0;  // window origin in the (padded) source
  int origin_col = 0;
  bool rare_centered = false;  // drawn by the rare branch
  PixelCoord anchor;           // rare pixel the window was centered on
  int pad_rows = 0;            // rows/cols appended to reach crop_size
  int pad_cols = 0;
};

// Draws one crop_size x crop_size window. With probability rare_fraction
// the window is centered on a rare pixel (plus jitter, clamped in bounds);
// otherwise, or when the mask has no rare pixels, the origin is uniform.
// Sources smaller than the crop are padded with ignore_id / 0.0.
Crop sample_crop(const Image& image, const LabelMask& mask,
                 const SamplePolicy& policy, Rng& rng);

// Same, with the rare pixel list precomputed by find_rare_class_pixels.
Crop sample_crop(const Image& image, const LabelMask& mask,
                 std::span<const PixelCoord> rare_pixels,
                 const SamplePolicy& policy, Rng& rng);

// Geometric ops (flips, quarter-turn rotations) hit image and mask alike;
// photometric ops touch the image only and are clamped to [0,1].
void augment(Image& image, LabelMask& mask, const AugConfig& cfg, Rng& rng);

void FlipHorizontal(Image& image, LabelMask& mask);
void FlipVertical(Image& image, LabelMask& mask);
// Rotates a square pair by quarter_turns * 90 degrees counterclockwise.
void RotateQuarter(Image& image, LabelMask& mask, int quarter_turns);

}  // namespace rareseg

#endif  // RARESEG_SAMPLER_HPP_
