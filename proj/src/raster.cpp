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
#include "rareseg/raster.hpp"

#include <algorithm>
#include <cmath>

namespace rareseg {

ProbabilityMap softmax(const LogitMap& logits) {
  ProbabilityMap probs(logits.height, logits.width, logits.num_classes);
  const std::size_t n = logits.pixels();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
    auto z = logits.pixel(i);
    auto p = probs.pixel(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      p[c] = std::exp(z[c] - zmax);
      sum += p[c];
    }
    for (double& v : p) v /= sum;
  }
  return probs;
}

LabelMask argmax_mask(const ProbabilityMap& probs) {
  LabelMask mask(probs.height, probs.width);
  for (std::size_t i = 0; i < probs.pixels(); ++i) {
    auto p = probs.pixel(i);
    // max_element returns the first maximum, i.e. the lowest class id.
    mask.data[i] = static_cast<std::uint8_t>(
        std::max_element(p.begin(), p.end()) - p.begin());
  }
  return mask;
}

}  // namespace rareseg
