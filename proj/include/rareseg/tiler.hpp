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
#ifndef RARESEG_TILER_HPP_
#define RARESEG_TILER_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rareseg/raster.hpp"

namespace rareseg {

struct TileSpec {
  int tile_size = 1024;
  int stride = 768;

  void Validate() const;
  static TileSpec FromJson(const nlohmann::json& doc, TileSpec base,
                           const std::string& path = "tiler");
};

struct TileWindow {
  int row = 0;
  int col = 0;
  bool operator==(const TileWindow&) const = default;
};

// Sliding-window placements. Along each axis the origins are 0, S, 2S, ...
// while the window fits, plus one window flush with the far edge if the last
// regular origin leaves pixels uncovered.
struct TileGrid {
  int height = 0;
  int width = 0;
  int tile_size = 0;
  std::vector<int> row_origins;
  std::vector<int> col_origins;
  std::vector<TileWindow> windows;  // raster order

  std::size_t size() const { return windows.size(); }
  // Windows covering (y, x).
  int CoverCount(int y, int x) const;
  // Row-major H x W map of CoverCount.
  std::vector<std::uint16_t> OverlapCounts() const;
};

// Requires height, width >= tile_size; callers pad smaller inputs.
TileGrid plan_tiles(int height, int width, const TileSpec& spec);

// A segmentation network evaluated on one tile: tile_size^2 x C logits.
using TileModel = std::function<LogitMap(const Image&)>;

enum class Accumulator { kFloat32, kFloat64 };

struct TileOptions {
  int workers = 1;  // tiles evaluated concurrently
  Accumulator accumulator = Accumulator::kFloat64;
};

// Receives each output row once every window covering it has been merged:
// `probs` holds width * num_classes averaged probabilities.
using RowSink = std::function<void(int row, std::span<const double> probs)>;

// Runs the model on every window at native resolution, converts each output
// to probabilities and averages overlapping predictions uniformly. Window
// outputs are merged in ascending window order regardless of `workers`, so
// the result is independent of the worker count. Only a band of
// tile_size rows is kept in memory.
TileGrid tiled_predict_rows(const TileModel& model, const Image& image,
                            const TileSpec& spec, const TileOptions& options,
                            const RowSink& sink);

// Convenience wrapper returning the full probability map.
ProbabilityMap tiled_inference(const TileModel& model, const Image& image,
                               const TileSpec& spec,
                               const TileOptions& options = {});

// Zero-pads an image on the bottom/right up to at least `size` per side.
Image PadTo(const Image& image, int size);

}  // namespace rareseg

#endif  // RARESEG_TILER_HPP_
