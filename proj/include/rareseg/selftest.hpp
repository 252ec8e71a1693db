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
#ifndef RARESEG_SELFTEST_HPP_
#define RARESEG_SELFTEST_HPP_

#include <cstdint>
#include <string>
#include <vector>

namespace rareseg {

struct SelftestOptions {
  std::uint64_t seed = 20260101;
  int loss_instances = 100;
  // Sampled parameters for the full-model finite-difference check; 0 skips it.
  int model_parameters = 50;
};

struct SelftestCheck {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Tiling coverage, OHEM identities, loss and model gradient checks, tiled
// output consistency. Each check is independent; failures do not stop the run.
std::vector<SelftestCheck> run_selftest(const SelftestOptions& options = {});

}  // namespace rareseg

#endif  // RARESEG_SELFTEST_HPP_
