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
#include "rareseg/tiler.hpp"

#include <algorithm>
#include <deque>
#include <exception>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {

void TileSpec::Validate() const {
  if (tile_size <= 0 || tile_size % 32 != 0) {
    throw ConfigError("tiler.tile_size", "must be a positive multiple of 32");
  }
  if (stride <= 0 || stride > tile_size) {
    throw ConfigError("tiler.stride", "must satisfy 0 < stride <= tile_size");
  }
}

TileSpec TileSpec::FromJson(const nlohmann::json& doc, TileSpec base,
                            const std::string& path) {
  json_fields::CheckKeys(doc, path, {"tile_size", "stride"});
  json_fields::Read(doc, path, "tile_size", base.tile_size);
  json_fields::Read(doc, path, "stride", base.stride);
  base.Validate();
  return base;
}

int TileGrid::CoverCount(int y, int x) const {
  int rows = 0, cols = 0;
  for (int r : row_origins) rows += (y >= r && y < r + tile_size);
  for (int c : col_origins) cols += (x >= c && x < c + tile_size);
  return rows * cols;
}

std::vector<std::uint16_t> TileGrid::OverlapCounts() const {
  std::vector<std::uint16_t> counts(static_cast<std::size_t>(height) * width, 0);
  for (const auto& w : windows) {
    for (int y = w.row; y < w.row + tile_size; ++y) {
      for (int x = w.col; x < w.col + tile_size; ++x) {
        ++counts[static_cast<std::size_t>(y) * width + x];
      }
    }
  }
  return counts;
}

namespace {

std::vector<int> AxisOrigins(int dim, int tile, int stride) {
  std::vector<int> origins;
  for (int o = 0; o + tile <= dim; o += stride) origins.push_back(o);
  if (origins.back() + tile < dim) origins.push_back(dim - tile);
  return origins;
}

}  // namespace

TileGrid plan_tiles(int height, int width, const TileSpec& spec) {
  spec.Validate();
  if (height < spec.tile_size || width < spec.tile_size) {
    throw ShapeError("tiler", "image " + std::to_string(height) + "x" +
                                  std::to_string(width) +
                                  " is smaller than tile " +
                                  std::to_string(spec.tile_size) +
                                  "; pad it first");
  }
  TileGrid g;
  g.height = height;
  g.width = width;
  g.tile_size = spec.tile_size;
  g.row_origins = AxisOrigins(height, spec.tile_size, spec.stride);
  g.col_origins = AxisOrigins(width, spec.tile_size, spec.stride);
  for (int r : g.row_origins) {
    for (int c : g.col_origins) g.windows.push_back({r, c});
  }
  return g;
}

Image PadTo(const Image& image, int size) {
  const int h = std::max(image.height, size), w = std::max(image.width, size);
  if (h == image.height && w == image.width) return image;
  Image out(h, w, image.channels, 0.0f);
  for (int y = 0; y < image.height; ++y) {
    std::copy(image.data.begin() + static_cast<std::ptrdiff_t>(y) * image.width * image.channels,
              image.data.begin() + static_cast<std::ptrdiff_t>(y + 1) * image.width * image.channels,
              out.data.begin() + static_cast<std::ptrdiff_t>(y) * w * image.channels);
  }
  return out;
}

namespace {

Image ExtractTile(const Image& image, const TileWindow& w, int tile) {
  Image out(tile, tile, image.channels);
  const std::size_t row_len = static_cast<std::size_t>(tile) * image.channels;
  for (int y = 0; y < tile; ++y) {
    const auto src = image.data.begin() +
                     (static_cast<std::ptrdiff_t>(w.row + y) * image.width + w.col) *
                         image.channels;
    std::copy(src, src + static_cast<std::ptrdiff_t>(row_len),
              out.data.begin() + static_cast<std::ptrdiff_t>(y) * static_cast<std::ptrdiff_t>(row_len));
  }
  return out;
}

// Rolling band of accumulation rows [base, base + rows.size()).
template <class Acc>
class Band {
 public:
  Band(int width, int num_classes, const RowSink& sink)
      : width_(width), classes_(num_classes), sink_(sink) {}

  void Extend(int end_row) {
    while (base_ + static_cast<int>(sums_.size()) < end_row) {
      sums_.emplace_back(static_cast<std::size_t>(width_) * classes_, Acc{0});
      counts_.emplace_back(width_, 0);
    }
  }

  // Emits and drops rows strictly before `row`.
  void FinalizeBefore(int row) {
    std::vector<double> out(static_cast<std::size_t>(width_) * classes_);
    while (!sums_.empty() && base_ < row) {
      const auto& sum = sums_.front();
      const auto& cnt = counts_.front();
      for (int x = 0; x < width_; ++x) {
        if (cnt[x] == 0) {
          throw ValidationError("tiler", "pixel (" + std::to_string(base_) +
                                             ", " + std::to_string(x) +
                                             ") not covered by any window");
        }
        for (int c = 0; c < classes_; ++c) {
          const std::size_t i = static_cast<std::size_t>(x) * classes_ + c;
          out[i] = static_cast<double>(sum[i]) / cnt[x];
        }
      }
      sink_(base_, out);
      sums_.pop_front();
      counts_.pop_front();
      ++base_;
    }
  }

  void Add(const ProbabilityMap& probs, const TileWindow& w) {
    for (int y = 0; y < probs.height; ++y) {
      auto& sum = sums_[w.row + y - base_];
      auto& cnt = counts_[w.row + y - base_];
      const double* src = probs.data.data() +
                          static_cast<std::size_t>(y) * probs.width * classes_;
      Acc* dst = sum.data() + static_cast<std::size_t>(w.col) * classes_;
      const std::size_t n = static_cast<std::size_t>(probs.width) * classes_;
      for (std::size_t i = 0; i < n; ++i) dst[i] += static_cast<Acc>(src[i]);
      for (int x = 0; x < probs.width; ++x) ++cnt[w.col + x];
    }
  }

 private:
  int width_;
  int classes_;
  const RowSink& sink_;
  int base_ = 0;
  std::deque<std::vector<Acc>> sums_;
  std::deque<std::vector<std::uint16_t>> counts_;
};

template <class Acc>
TileGrid Run(const TileModel& model, const Image& image, const TileSpec& spec,
             const TileOptions& options, const RowSink& sink) {
  TileGrid grid = plan_tiles(image.height, image.width, spec);
  const int tile = spec.tile_size;
  const int workers = std::max(1, options.workers);
  std::unique_ptr<Band<Acc>> band;
  int num_classes = -1;

  std::size_t next = 0;
  while (next < grid.windows.size()) {
    // Evaluate up to `workers` windows at once, all from one row of windows
    // so that rows above it can be finalized first.
    const int row = grid.windows[next].row;
    std::size_t end = next;
    while (end < grid.windows.size() && grid.windows[end].row == row &&
           end - next < static_cast<std::size_t>(workers)) {
      ++end;
    }
    std::vector<ProbabilityMap> outputs(end - next);
    std::vector<std::exception_ptr> errors(end - next);
#pragma omp parallel for num_threads(workers) schedule(dynamic) if (workers > 1)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(end - next); ++i) {
      try {
        const TileWindow& w = grid.windows[next + i];
        LogitMap logits = model(ExtractTile(image, w, tile));
        if (logits.height != tile || logits.width != tile ||
            logits.num_classes < 1 ||
            logits.data.size() != static_cast<std::size_t>(tile) * tile * logits.num_classes) {
          throw ShapeError("tiler", "model returned " +
                                        std::to_string(logits.height) + "x" +
                                        std::to_string(logits.width) +
                                        " logits for a " + std::to_string(tile) +
                                        "x" + std::to_string(tile) + " tile");
        }
        outputs[i] = softmax(logits);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    if (!band) {
      num_classes = outputs.front().num_classes;
      band = std::make_unique<Band<Acc>>(image.width, num_classes, sink);
    }
    band->FinalizeBefore(row);
    band->Extend(row + tile);
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      if (outputs[i].num_classes != num_classes) {
        throw ShapeError("tiler", "model changed its class count between tiles");
      }
      band->Add(outputs[i], grid.windows[next + i]);
    }
    next = end;
  }
  band->FinalizeBefore(image.height);
  return grid;
}

}  // namespace

TileGrid tiled_predict_rows(const TileModel& model, const Image& image,
                            const TileSpec& spec, const TileOptions& options,
                            const RowSink& sink) {
  if (options.accumulator == Accumulator::kFloat32) {
    return Run<float>(model, image, spec, options, sink);
  }
  return Run<double>(model, image, spec, options, sink);
}

ProbabilityMap tiled_inference(const TileModel& model, const Image& image,
                               const TileSpec& spec,
                               const TileOptions& options) {
  ProbabilityMap out;
  tiled_predict_rows(model, image, spec, options,
                     [&](int row, std::span<const double> probs) {
                       if (out.data.empty()) {
                         const int c = static_cast<int>(probs.size()) / image.width;
                         out = ProbabilityMap(image.height, image.width, c);
                       }
                       std::copy(probs.begin(), probs.end(),
                                 out.data.begin() + static_cast<std::ptrdiff_t>(row) *
                                                        static_cast<std::ptrdiff_t>(probs.size()));
                     });
  return out;
}

}  // namespace rareseg
