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
#ifndef RARESEG_RASTER_HPP_
#define RARESEG_RASTER_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rareseg {

// Dense rasters are stored row-major with the channel axis innermost (HWC),
// so a pixel's channels (or class scores) are contiguous.

struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c = 3, float fill = 0.0f)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  float& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image&) const = default;
};

struct LabelMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> data;

  LabelMask() = default;
  LabelMask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), data(static_cast<std::size_t>(h) * w, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::uint8_t& at(int y, int x) {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return data[static_cast<std::size_t>(y) * width + x];
  }
  bool operator==(const LabelMask&) const = default;
};

// Per-pixel class scores. The tag distinguishes unconstrained logits from
// normalized probabilities at the type level.
template <class Tag>
struct ScoreMap {
  int height = 0;
  int width = 0;
  int num_classes = 0;
  std::vector<double> data;

  ScoreMap() = default;
  ScoreMap(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), num_classes(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {}

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::span<double> pixel(std::size_t i) {
    return {data.data() + i * num_classes, static_cast<std::size_t>(num_classes)};
  }
  std::span<const double> pixel(std::size_t i) const {
    return {data.data() + i * num_classes, static_cast<std::size_t>(num_classes)};
  }
  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * num_classes + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * num_classes + c];
  }
};

struct LogitTag {};
struct ProbabilityTag {};
using LogitMap = ScoreMap<LogitTag>;
using ProbabilityMap = ScoreMap<ProbabilityTag>;

// Numerically stable softmax over the class axis.
ProbabilityMap softmax(const LogitMap& logits);

// Per-pixel argmax; ties go to the lowest class id.
LabelMask argmax_mask(const ProbabilityMap& probs);

}  // namespace rareseg

#endif  // RARESEG_RASTER_HPP_
