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
#include <random>

#include <gtest/gtest.h>

#include "rareseg/error.hpp"
#include "rareseg/model.hpp"
#include "rareseg/tiler.hpp"
#include "support/oracles.hpp"

namespace rareseg {
namespace {

Image RandomImage(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w, 3);
  for (auto& v : img.data) v = u(rng);
  return img;
}

// Per-pixel logits plus a term depending on the tile mean, so overlapping
// windows disagree.
LogitMap ContextModel(const Image& tile) {
  double mean = 0;
  for (float v : tile.data) mean += v;
  mean /= static_cast<double>(tile.data.size());
  LogitMap out(tile.height, tile.width, 3);
  for (std::size_t i = 0; i < out.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) {
      out.data[i * 3 + c] = 2.0 * tile.data[i * 3 + c] + (c + 1) * mean;
    }
  }
  return out;
}

TEST(PlanTiles, LargeSceneGrid) {
  const TileGrid g = plan_tiles(3000, 4000, TileSpec{1024, 768});
  EXPECT_EQ(g.row_origins, (std::vector<int>{0, 768, 1536, 1976}));
  EXPECT_EQ(g.col_origins, (std::vector<int>{0, 768, 1536, 2304, 2976}));
  EXPECT_EQ(g.size(), 20u);
  EXPECT_EQ(g.windows.front(), (TileWindow{0, 0}));
  EXPECT_EQ(g.windows[1], (TileWindow{0, 768}));
  EXPECT_EQ(g.windows.back(), (TileWindow{1976, 2976}));
}

TEST(PlanTiles, ExactFitIsOneWindow) {
  EXPECT_EQ(plan_tiles(1024, 1024, TileSpec{1024, 768}).size(), 1u);
}

TEST(PlanTiles, OnePixelOverhangAddsFlushWindow) {
  const TileGrid g = plan_tiles(1025, 1024, TileSpec{1024, 768});
  EXPECT_EQ(g.row_origins, (std::vector<int>{0, 1}));
  EXPECT_EQ(g.col_origins, (std::vector<int>{0}));
}

TEST(PlanTiles, RandomGridsMatchClosedFormAndCoverEveryPixel) {
  std::mt19937 rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const int tile = 32 * std::uniform_int_distribution<int>(1, 3)(rng);
    const int stride = std::uniform_int_distribution<int>(1, tile)(rng);
    const int h = std::uniform_int_distribution<int>(tile, 260)(rng);
    const int w = std::uniform_int_distribution<int>(tile, 260)(rng);
    const TileGrid g = plan_tiles(h, w, TileSpec{tile, stride});
    ASSERT_EQ(g.row_origins, oracle::AxisOrigins(h, tile, stride));
    ASSERT_EQ(g.col_origins, oracle::AxisOrigins(w, tile, stride));
    ASSERT_EQ(g.size(), g.row_origins.size() * g.col_origins.size());
    const auto counts = g.OverlapCounts();
    for (int y = 0; y < h; y += 7) {
      for (int x = 0; x < w; x += 5) {
        const int n = counts[static_cast<std::size_t>(y) * w + x];
        ASSERT_GE(n, 1) << h << "x" << w << " tile " << tile << " stride " << stride;
        ASSERT_EQ(n, g.CoverCount(y, x));
      }
    }
    for (const auto& win : g.windows) {
      ASSERT_LE(win.row + tile, h);
      ASSERT_LE(win.col + tile, w);
    }
  }
}

TEST(PlanTiles, RejectsSmallImagesAndBadSpecs) {
  EXPECT_THROW(plan_tiles(31, 64, TileSpec{32, 16}), ShapeError);
  EXPECT_THROW(plan_tiles(64, 64, TileSpec{48, 16}), ConfigError);
  EXPECT_THROW(plan_tiles(64, 64, TileSpec{32, 0}), ConfigError);
  EXPECT_THROW(plan_tiles(64, 64, TileSpec{32, 33}), ConfigError);
}

TEST(TiledInference, ConstantModelGivesConstantProbabilities) {
  const TileModel model = [](const Image& t) {
    LogitMap out(t.height, t.width, 4);
    for (std::size_t i = 0; i < out.pixels(); ++i) {
      for (int c = 0; c < 4; ++c) out.data[i * 4 + c] = 0.5 * c;
    }
    return out;
  };
  const auto want = oracle::Softmax({0.0, 0.5, 1.0, 1.5});
  const ProbabilityMap p = tiled_inference(model, RandomImage(80, 100, 1), TileSpec{32, 24});
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    for (int c = 0; c < 4; ++c) ASSERT_NEAR(p.data[i * 4 + c], want[c], 1e-15);
  }
}

TEST(TiledInference, SingleWindowEqualsDirectSoftmax) {
  const Image img = RandomImage(64, 64, 2);
  const ProbabilityMap tiled = tiled_inference(ContextModel, img, TileSpec{64, 48});
  const ProbabilityMap direct = softmax(ContextModel(img));
  EXPECT_EQ(tiled.data, direct.data);
}

TEST(TiledInference, TwoWindowOverlapIsUniformMean) {
  const Image img = RandomImage(32, 48, 3);
  const ProbabilityMap p = tiled_inference(ContextModel, img, TileSpec{32, 16});
  Image left(32, 32, 3), right(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      for (int c = 0; c < 3; ++c) {
        left.data[(y * 32 + x) * 3 + c] = img.data[(y * 48 + x) * 3 + c];
        right.data[(y * 32 + x) * 3 + c] = img.data[(y * 48 + x + 16) * 3 + c];
      }
    }
  }
  const ProbabilityMap pl = softmax(ContextModel(left));
  const ProbabilityMap pr = softmax(ContextModel(right));
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 48; ++x) {
      for (int c = 0; c < 3; ++c) {
        double want;
        if (x < 16) {
          want = pl.at(y, x, c);
        } else if (x < 32) {
          want = 0.5 * (pl.at(y, x, c) + pr.at(y, x - 16, c));
        } else {
          want = pr.at(y, x - 16, c);
        }
        ASSERT_NEAR(p.at(y, x, c), want, 1e-15) << y << "," << x;
      }
    }
  }
}

TEST(TiledInference, ProbabilitiesSumToOne) {
  const ProbabilityMap p = tiled_inference(ContextModel, RandomImage(70, 90, 4), TileSpec{32, 20});
  for (std::size_t i = 0; i < p.pixels(); ++i) {
    const auto px = p.pixel(i);
    ASSERT_NEAR(px[0] + px[1] + px[2], 1.0, 1e-12);
  }
}

TEST(TiledInference, WorkerCountDoesNotChangeResult) {
  const ModelConfig cfg = ModelConfig::Nano();
  const ParameterSet params = init_parameters(cfg, 7);
  const TileModel model = [&](const Image& t) { return model_forward(t, cfg, params); };
  const Image img = RandomImage(64, 96, 5);
  const ProbabilityMap one = tiled_inference(model, img, TileSpec{64, 32}, {1, Accumulator::kFloat64});
  const ProbabilityMap three = tiled_inference(model, img, TileSpec{64, 32}, {3, Accumulator::kFloat64});
  EXPECT_EQ(one.data, three.data);
}

TEST(TiledInference, Float32AccumulatorIsClose) {
  const Image img = RandomImage(96, 96, 6);
  const auto wide = tiled_inference(ContextModel, img, TileSpec{32, 16}, {1, Accumulator::kFloat64});
  const auto narrow = tiled_inference(ContextModel, img, TileSpec{32, 16}, {1, Accumulator::kFloat32});
  for (std::size_t i = 0; i < wide.data.size(); ++i) {
    ASSERT_NEAR(wide.data[i], narrow.data[i], 1e-6);
  }
}

TEST(TiledInference, RowsAreEmittedOnceInOrder) {
  std::vector<int> rows;
  tiled_predict_rows(ContextModel, RandomImage(100, 64, 7), TileSpec{32, 24}, {},
                     [&](int row, std::span<const double> probs) {
                       EXPECT_EQ(probs.size(), 64u * 3u);
                       rows.push_back(row);
                     });
  ASSERT_EQ(rows.size(), 100u);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(rows[i], i);
}

TEST(TiledInference, WrongOutputShapeIsRejected) {
  const TileModel bad = [](const Image& t) { return LogitMap(t.height / 2, t.width, 3); };
  EXPECT_THROW(tiled_inference(bad, RandomImage(64, 64, 8), TileSpec{32, 32}), ShapeError);
}

TEST(TiledInference, ModelErrorsPropagateFromWorkers) {
  const TileModel bad = [](const Image&) -> LogitMap { throw ValidationError("test", "boom"); };
  EXPECT_THROW(tiled_inference(bad, RandomImage(64, 64, 9), TileSpec{32, 32}, {2, Accumulator::kFloat64}),
               ValidationError);
}

TEST(PadTo, PadsBottomRightWithZeros) {
  const Image img = RandomImage(20, 40, 10);
  const Image p = PadTo(img, 32);
  ASSERT_EQ(p.height, 32);
  ASSERT_EQ(p.width, 40);
  EXPECT_EQ(p.data[(5 * 40 + 7) * 3 + 1], img.data[(5 * 40 + 7) * 3 + 1]);
  EXPECT_EQ(p.data[(25 * 40 + 7) * 3 + 1], 0.0f);
  EXPECT_EQ(PadTo(img, 16), img);
}

}  // namespace
}  // namespace rareseg
