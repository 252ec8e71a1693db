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
#include <array>
#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "rareseg/dataset.hpp"
#include "rareseg/error.hpp"
#include "rareseg/synth.hpp"

namespace rareseg {
namespace {

TEST(Synth, SameSeedIsBitIdentical) {
  const SynthSpec spec = SynthSpec::Default();
  const auto a = generate_synthetic_scene(17, spec);
  const auto b = generate_synthetic_scene(17, spec);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  const auto c = generate_synthetic_scene(18, spec);
  EXPECT_NE(a.second, c.second);
}

TEST(Synth, SingleClassSpecFillsMask) {
  const auto [img, mask] = generate_synthetic_scene(1, SynthSpec::SingleClass(11, 6, 40, 24));
  EXPECT_EQ(mask.height, 40);
  EXPECT_EQ(mask.width, 24);
  for (auto v : mask.data) EXPECT_EQ(v, 6);
  for (float v : img.data) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

TEST(Synth, RejectsFrequenciesNotSummingToOne) {
  SynthSpec spec = SynthSpec::Default();
  spec.frequencies[0] += 0.2;
  EXPECT_THROW(spec.Validate(), ValidationError);
  EXPECT_THROW(generate_synthetic_scene(1, spec), ValidationError);
}

// Statistics over many default scenes, generated once.
class SynthCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const SynthSpec spec = SynthSpec::Default();
    masks_ = new std::vector<LabelMask>;
    images_ = new std::vector<Image>;
    for (int i = 0; i < 1000; ++i) {
      auto [img, m] = generate_synthetic_scene(100000 + i, spec);
      masks_->push_back(std::move(m));
      if (i < 40) images_->push_back(std::move(img));
    }
  }
  static void TearDownTestSuite() {
    delete masks_;
    delete images_;
  }
  static std::vector<LabelMask>* masks_;
  static std::vector<Image>* images_;
};
std::vector<LabelMask>* SynthCorpus::masks_ = nullptr;
std::vector<Image>* SynthCorpus::images_ = nullptr;

TEST_F(SynthCorpus, MinorShareWithinBand) {
  const FrequencyTable t = compute_class_frequencies(*masks_, ClassTable::Default());
  EXPECT_GE(t.percent[3], 1.8);
  EXPECT_LE(t.percent[3], 3.4);
}

TEST_F(SynthCorpus, EveryClassWithinThirtyPercentOfTarget) {
  const SynthSpec spec = SynthSpec::Default();
  const FrequencyTable t = compute_class_frequencies(*masks_, ClassTable::Default());
  for (std::size_t c = 0; c < spec.frequencies.size(); ++c) {
    const double target = 100.0 * spec.frequencies[c];
    EXPECT_NEAR(t.percent[c], target, 0.3 * target) << t.names[c];
  }
}

TEST_F(SynthCorpus, RarePixelsSitInsideHostRegions) {
  // Every 4-neighbour of a rare pixel is either rare or the host class.
  std::size_t rare = 0, bordered_ok = 0;
  for (const auto& m : *masks_) {
    for (int y = 1; y + 1 < m.height; ++y) {
      for (int x = 1; x + 1 < m.width; ++x) {
        const int v = m.at(y, x);
        if (v < 3 || v > 5) continue;
        ++rare;
        bool ok = true;
        for (auto [dy, dx] : {std::pair{-1, 0}, {1, 0}, {0, -1}, {0, 1}}) {
          const int n = m.at(y + dy, x + dx);
          ok = ok && (n == 2 || (n >= 3 && n <= 5));
        }
        bordered_ok += ok;
      }
    }
  }
  ASSERT_GT(rare, 0u);
  EXPECT_GT(static_cast<double>(bordered_ok) / rare, 0.97);
}

TEST_F(SynthCorpus, ClassesHaveDistinctTextureStatistics) {
  // Per-class mean color and mean absolute horizontal gradient.
  constexpr int kC = 11;
  std::array<std::array<double, 4>, kC> sum{};
  std::array<double, kC> n{};
  for (std::size_t i = 0; i < images_->size(); ++i) {
    const Image& img = (*images_)[i];
    const LabelMask& m = (*masks_)[i];
    for (int y = 0; y < m.height; ++y) {
      for (int x = 0; x + 1 < m.width; ++x) {
        const int c = m.at(y, x);
        if (m.at(y, x + 1) != c) continue;
        for (int ch = 0; ch < 3; ++ch) sum[c][ch] += img.at(y, x, ch);
        sum[c][3] += std::abs(img.at(y, x, 0) - img.at(y, x + 1, 0));
        n[c] += 1;
      }
    }
  }
  for (int a = 0; a < kC; ++a) {
    for (int b = a + 1; b < kC; ++b) {
      if (n[a] == 0 || n[b] == 0) continue;
      double d = 0.0;
      for (int k = 0; k < 4; ++k) d += std::abs(sum[a][k] / n[a] - sum[b][k] / n[b]);
      EXPECT_GT(d, 0.02) << "classes " << a << " and " << b;
    }
  }
}

}  // namespace
}  // namespace rareseg
