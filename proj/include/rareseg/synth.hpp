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
#ifndef RARESEG_SYNTH_HPP_
#define RARESEG_SYNTH_HPP_

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "json.hpp"
#include "rareseg/class_table.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

enum class BlobShape { kEllipse, kRect, kStrip };

// How one class is drawn: where its blobs go and what its pixels look like.
struct ClassTexture {
  std::array<float, 3> base_color{0.5f, 0.5f, 0.5f};
  // Amplitude of i.i.d. per-pixel noise. This is the class's high-frequency
  // signature; averaging over a few pixels removes it.
  float noise = 0.02f;
  BlobShape shape = BlobShape::kEllipse;
  int size_min = 4;  // radius for ellipses, side for rects, width for strips
  int size_max = 8;
};

// Scene recipe. `frequencies[c]` is the target pixel share of class c.
// The class with the largest share fills the canvas; classes flagged rare
// are painted only inside blobs of `host_class`.
struct SynthSpec {
  int height = 256;
  int width = 256;
  std::vector<double> frequencies;
  std::vector<ClassTexture> textures;
  std::vector<int> rare_set;
  int host_class = -1;
  // Amplitude of the smooth scene-wide color field shared by all classes.
  float low_freq_amplitude = 0.08f;

  // Table-1-like shares over the default 11-class table.
  static SynthSpec Default();
  // Uniform single-class spec (used for degenerate tests).
  static SynthSpec SingleClass(int num_classes, int cls, int height, int width);

  void Validate() const;
  static SynthSpec FromJson(const nlohmann::json& doc, const ClassTable& table,
                            const std::string& path = "synth");
};

// Pure function of (seed, spec).
std::pair<Image, LabelMask> generate_synthetic_scene(std::uint64_t seed,
                                                     const SynthSpec& spec);

}  // namespace rareseg

#endif  // RARESEG_SYNTH_HPP_
