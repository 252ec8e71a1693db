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
#include "rareseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {

SynthSpec SynthSpec::Default() {
  SynthSpec s;
  // Shares in percent. Classes without a published share (No-Damage,
  // Road-Clear, Vehicle) split the remainder.
  s.frequencies = {52.51, 8.13, 5.00, 2.63, 1.68, 1.44,
                   4.50,  1.59, 22.05, 0.06, 0.41};
  for (double& f : s.frequencies) f /= 100.0;
  using enum BlobShape;
  s.textures = {
      {{0.45f, 0.50f, 0.35f}, 0.04f, kEllipse, 8, 16},   // Background
      {{0.15f, 0.30f, 0.45f}, 0.01f, kEllipse, 16, 36},  // Water
      {{0.62f, 0.55f, 0.50f}, 0.02f, kRect, 14, 28},     // No damage
      {{0.55f, 0.47f, 0.62f}, 0.10f, kEllipse, 3, 6},    // Minor
      {{0.50f, 0.42f, 0.35f}, 0.18f, kEllipse, 3, 6},    // Major
      {{0.38f, 0.33f, 0.30f}, 0.25f, kEllipse, 3, 6},    // Total destruction
      {{0.35f, 0.35f, 0.37f}, 0.02f, kStrip, 5, 8},      // Road clear
      {{0.40f, 0.37f, 0.32f}, 0.15f, kStrip, 5, 8},      // Road blocked
      {{0.20f, 0.40f, 0.18f}, 0.08f, kEllipse, 6, 14},   // Tree
      {{0.30f, 0.70f, 0.80f}, 0.01f, kRect, 4, 7},       // Pool
      {{0.80f, 0.20f, 0.20f}, 0.03f, kRect, 2, 4},       // Vehicle
  };
  s.rare_set = {3, 4, 5};
  s.host_class = 2;
  return s;
}

SynthSpec SynthSpec::SingleClass(int num_classes, int cls, int height,
                                 int width) {
  SynthSpec s;
  s.height = height;
  s.width = width;
  s.frequencies.assign(num_classes, 0.0);
  s.frequencies.at(cls) = 1.0;
  s.textures.assign(num_classes, ClassTexture{});
  return s;
}

void SynthSpec::Validate() const {
  if (height <= 0 || width <= 0) {
    throw ValidationError("datamodel", "synthetic scene size must be positive");
  }
  if (frequencies.empty() || textures.size() != frequencies.size()) {
    throw ValidationError("datamodel",
                          "need one texture per class frequency");
  }
  double sum = 0.0;
  for (double f : frequencies) {
    if (!(f >= 0.0)) {
      throw ValidationError("datamodel", "class frequencies must be >= 0");
    }
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-3) {
    throw ValidationError("datamodel", "class frequencies sum to " +
                                           std::to_string(sum) + ", not 1");
  }
  const int n = static_cast<int>(frequencies.size());
  for (int r : rare_set) {
    if (r < 0 || r >= n) {
      throw ValidationError("datamodel", "rare class id out of range");
    }
  }
  if (host_class >= n) {
    throw ValidationError("datamodel", "host class id out of range");
  }
  for (const auto& t : textures) {
    if (t.size_min < 1 || t.size_max < t.size_min) {
      throw ValidationError("datamodel", "invalid blob size range");
    }
  }
}

namespace {

BlobShape ParseShape(const std::string& s, const std::string& path) {
  if (s == "ellipse") return BlobShape::kEllipse;
  if (s == "rect") return BlobShape::kRect;
  if (s == "strip") return BlobShape::kStrip;
  throw ConfigError(path, "unknown shape '" + s + "'");
}

}  // namespace

SynthSpec SynthSpec::FromJson(const nlohmann::json& doc,
                              const ClassTable& table,
                              const std::string& path) {
  using json_fields::Read;
  json_fields::CheckKeys(doc, path,
                         {"height", "width", "frequencies", "textures",
                          "host_class", "low_freq_amplitude"});
  SynthSpec s = SynthSpec::Default();
  if (table.size() != static_cast<int>(s.frequencies.size())) {
    // Non-default class tables must spell out frequencies and textures.
    s.frequencies.clear();
    s.textures.clear();
    s.host_class = -1;
  }
  s.rare_set = table.rare_set();
  Read(doc, path, "height", s.height);
  Read(doc, path, "width", s.width);
  Read(doc, path, "frequencies", s.frequencies);
  Read(doc, path, "low_freq_amplitude", s.low_freq_amplitude);
  if (auto it = doc.find("host_class"); it != doc.end()) {
    if (it->is_string()) {
      s.host_class = table.find(it->get<std::string>());
      if (s.host_class < 0) throw ConfigError(path + ".host_class", "unknown class");
    } else {
      Read(doc, path, "host_class", s.host_class);
    }
  }
  if (auto it = doc.find("textures"); it != doc.end()) {
    if (!it->is_array()) throw ConfigError(path + ".textures", "expected array");
    s.textures.clear();
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = path + ".textures[" + std::to_string(i) + "]";
      const auto& e = (*it)[i];
      json_fields::CheckKeys(e, p, {"color", "noise", "shape", "size"});
      ClassTexture t;
      Read(e, p, "color", t.base_color);
      Read(e, p, "noise", t.noise);
      std::string shape = "ellipse";
      Read(e, p, "shape", shape);
      t.shape = ParseShape(shape, p + ".shape");
      std::array<int, 2> size{t.size_min, t.size_max};
      Read(e, p, "size", size);
      t.size_min = size[0];
      t.size_max = size[1];
      s.textures.push_back(t);
    }
  }
  if (static_cast<int>(s.frequencies.size()) != table.size()) {
    throw ConfigError(path + ".frequencies", "need one entry per class");
  }
  try {
    s.Validate();
  } catch (const ValidationError& e) {
    throw ConfigError(path, e.what());
  }
  return s;
}

namespace {

class Painter {
 public:
  Painter(const SynthSpec& spec, std::mt19937_64& rng, LabelMask& mask)
      : spec_(spec), rng_(rng), mask_(mask) {}

  int Uniform(int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng_);
  }
  double Unit() { return std::uniform_real_distribution<double>(0, 1)(rng_); }

  // Pixel indices of a random shape of class `cls` that currently hold
  // `eligible`. With `interior`, a pixel also needs every in-bounds
  // 4-neighbour to hold `eligible` or a rare class.
  std::vector<std::size_t> Shape(int cls, int eligible, bool interior) {
    const ClassTexture& t = spec_.textures[cls];
    const int h = mask_.height, w = mask_.width;
    std::vector<std::size_t> px;
    auto inside = [&](int y, int x) {
      if (y < 0 || y >= h || x < 0 || x >= w) return true;
      const int v = mask_.at(y, x);
      return v == eligible || std::find(spec_.rare_set.begin(), spec_.rare_set.end(), v) !=
                                  spec_.rare_set.end();
    };
    auto take = [&](int y, int x) {
      if (y < 0 || y >= h || x < 0 || x >= w) return;
      if (mask_.at(y, x) != eligible) return;
      if (interior && !(inside(y - 1, x) && inside(y + 1, x) && inside(y, x - 1) &&
                        inside(y, x + 1))) {
        return;
      }
      px.push_back(static_cast<std::size_t>(y) * w + x);
    };
    switch (t.shape) {
      case BlobShape::kEllipse: {
        const int cy = Uniform(0, h - 1), cx = Uniform(0, w - 1);
        const double ry = Uniform(t.size_min, t.size_max);
        const double rx = Uniform(t.size_min, t.size_max);
        for (int y = cy - static_cast<int>(ry); y <= cy + ry; ++y) {
          for (int x = cx - static_cast<int>(rx); x <= cx + rx; ++x) {
            const double dy = (y - cy) / ry, dx = (x - cx) / rx;
            if (dy * dy + dx * dx <= 1.0) take(y, x);
          }
        }
        break;
      }
      case BlobShape::kRect: {
        const int sh = Uniform(t.size_min, t.size_max);
        const int sw = Uniform(t.size_min, t.size_max);
        const int y0 = Uniform(-sh / 2, h - 1 - sh / 2);
        const int x0 = Uniform(-sw / 2, w - 1 - sw / 2);
        for (int y = y0; y < y0 + sh; ++y) {
          for (int x = x0; x < x0 + sw; ++x) take(y, x);
        }
        break;
      }
      case BlobShape::kStrip: {
        const int width = Uniform(t.size_min, t.size_max);
        const bool horizontal = Unit() < 0.5;
        const int span = horizontal ? w : h;
        const int len = Uniform(std::min(span, 4 * t.size_max), span);
        const int start = Uniform(0, span - len);
        const int offset = Uniform(0, (horizontal ? h : w) - 1);
        for (int a = start; a < start + len; ++a) {
          for (int b = offset; b < offset + width; ++b) {
            if (horizontal) {
              take(b, a);
            } else {
              take(a, b);
            }
          }
        }
        break;
      }
    }
    return px;
  }

  // Paints shapes of `cls` over pixels holding `eligible` until the expected
  // painted count equals `target`. The last shape is accepted with
  // probability proportional to the remaining budget so the mean is unbiased.
  void Fill(int cls, int eligible, double target, bool interior = false) {
    double painted = 0.0;
    for (int attempt = 0; attempt < 400 && painted < target; ++attempt) {
      auto px = Shape(cls, eligible, interior);
      if (px.empty()) continue;
      const double a = static_cast<double>(px.size());
      if (painted + a > target) {
        if (Unit() >= (target - painted) / a) return;
      }
      for (auto i : px) mask_.data[i] = static_cast<std::uint8_t>(cls);
      painted += a;
    }
  }

 private:
  const SynthSpec& spec_;
  std::mt19937_64& rng_;
  LabelMask& mask_;
};

}  // namespace

std::pair<Image, LabelMask> generate_synthetic_scene(std::uint64_t seed,
                                                     const SynthSpec& spec) {
  spec.Validate();
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(spec.frequencies.size());
  const int h = spec.height, w = spec.width;
  const double area = static_cast<double>(h) * w;

  const int fill = static_cast<int>(
      std::max_element(spec.frequencies.begin(), spec.frequencies.end()) -
      spec.frequencies.begin());
  LabelMask mask(h, w, static_cast<std::uint8_t>(fill));
  Painter painter(spec, rng, mask);

  auto is_rare = [&](int c) {
    return std::find(spec.rare_set.begin(), spec.rare_set.end(), c) !=
           spec.rare_set.end();
  };
  const bool hosted = spec.host_class >= 0 && !is_rare(spec.host_class) &&
                      spec.host_class != fill;
  double rare_share = 0.0;
  for (int r : spec.rare_set) rare_share += spec.frequencies[r];

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return spec.frequencies[a] > spec.frequencies[b];
  });
  for (int c : order) {
    if (c == fill || (hosted && is_rare(c))) continue;
    double share = spec.frequencies[c];
    if (hosted && c == spec.host_class) share += rare_share;
    if (share > 0.0) painter.Fill(c, fill, share * area);
  }
  if (hosted) {
    for (int r : spec.rare_set) {
      if (spec.frequencies[r] > 0.0) {
        painter.Fill(r, spec.host_class, spec.frequencies[r] * area, true);
      }
    }
  }

  // Smooth color field: a few random plane waves per channel.
  struct Wave {
    double ky, kx, phase, amp;
  };
  std::array<std::vector<Wave>, 3> waves;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& ch : waves) {
    for (int k = 0; k < 3; ++k) {
      const double angle = 2.0 * std::numbers::pi * unit(rng);
      const double wavelength = (0.5 + unit(rng)) * std::max(h, w);
      const double freq = 2.0 * std::numbers::pi / wavelength;
      ch.push_back({freq * std::sin(angle), freq * std::cos(angle),
                    2.0 * std::numbers::pi * unit(rng),
                    spec.low_freq_amplitude / 3.0});
    }
  }

  Image image(h, w, 3);
  std::uniform_real_distribution<float> noise(-1.0f, 1.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const ClassTexture& t = spec.textures[mask.at(y, x)];
      for (int c = 0; c < 3; ++c) {
        double v = t.base_color[c];
        for (const Wave& wv : waves[c]) {
          v += wv.amp * std::sin(wv.ky * y + wv.kx * x + wv.phase);
        }
        v += t.noise * noise(rng);
        image.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return {std::move(image), std::move(mask)};
}

}  // namespace rareseg
