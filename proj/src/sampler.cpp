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
#include "rareseg/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {

void SamplePolicy::Validate() const {
  if (crop_size <= 0) throw ConfigError("sampler.crop_size", "must be positive");
  if (!(rare_fraction >= 0.0 && rare_fraction <= 1.0)) {
    throw ConfigError("sampler.rare_fraction", "must lie in [0,1]");
  }
}

SamplePolicy SamplePolicy::FromJson(const nlohmann::json& doc,
                                    SamplePolicy base,
                                    const std::string& path) {
  using json_fields::Read;
  json_fields::CheckKeys(doc, path,
                         {"crop_size", "rare_fraction", "center_jitter",
                          "per_class_uniform"});
  Read(doc, path, "crop_size", base.crop_size);
  Read(doc, path, "rare_fraction", base.rare_fraction);
  Read(doc, path, "center_jitter", base.center_jitter);
  Read(doc, path, "per_class_uniform", base.per_class_uniform);
  base.Validate();
  return base;
}

AugConfig AugConfig::Identity() {
  AugConfig cfg;
  cfg.hflip_prob = cfg.vflip_prob = cfg.rotate_prob = cfg.photometric_prob = 0;
  return cfg;
}

void AugConfig::Validate() const {
  auto prob = [](double p, const char* field) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError(std::string("augment.") + field, "must lie in [0,1]");
    }
  };
  prob(hflip_prob, "hflip_prob");
  prob(vflip_prob, "vflip_prob");
  prob(rotate_prob, "rotate_prob");
  prob(photometric_prob, "photometric_prob");
  for (int r : rotations) {
    if (r < 1 || r > 3) {
      throw ConfigError("augment.rotations", "quarter turns must be 1, 2 or 3");
    }
  }
  if (rotate_prob > 0 && rotations.empty()) {
    throw ConfigError("augment.rotations", "empty with rotate_prob > 0");
  }
  if (brightness_delta < 0 || contrast_delta < 0 || hue_delta < 0) {
    throw ConfigError("augment", "photometric deltas must be >= 0");
  }
}

AugConfig AugConfig::FromJson(const nlohmann::json& doc, AugConfig base,
                              const std::string& path) {
  using json_fields::Read;
  json_fields::CheckKeys(doc, path,
                         {"hflip_prob", "vflip_prob", "rotate_prob",
                          "rotations", "photometric_prob", "brightness_delta",
                          "contrast_delta", "hue_delta"});
  Read(doc, path, "hflip_prob", base.hflip_prob);
  Read(doc, path, "vflip_prob", base.vflip_prob);
  Read(doc, path, "rotate_prob", base.rotate_prob);
  Read(doc, path, "rotations", base.rotations);
  Read(doc, path, "photometric_prob", base.photometric_prob);
  Read(doc, path, "brightness_delta", base.brightness_delta);
  Read(doc, path, "contrast_delta", base.contrast_delta);
  Read(doc, path, "hue_delta", base.hue_delta);
  base.Validate();
  return base;
}

std::vector<PixelCoord> find_rare_class_pixels(const LabelMask& mask,
                                               std::span<const int> rare_set) {
  std::array<bool, 256> rare{};
  for (int r : rare_set) {
    if (r >= 0 && r < 256) rare[r] = true;
  }
  std::vector<PixelCoord> out;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (rare[mask.at(y, x)]) out.push_back({y, x});
    }
  }
  return out;
}

Crop sample_crop(const Image& image, const LabelMask& mask,
                 const SamplePolicy& policy, Rng& rng) {
  auto rare = find_rare_class_pixels(mask, policy.rare_set);
  return sample_crop(image, mask, rare, policy, rng);
}

namespace {

PixelCoord PickRare(std::span<const PixelCoord> rare, const LabelMask& mask,
                    const SamplePolicy& policy, Rng& rng) {
  if (!policy.per_class_uniform) {
    std::uniform_int_distribution<std::size_t> pick(0, rare.size() - 1);
    return rare[pick(rng)];
  }
  std::vector<int> present;
  for (const auto& p : rare) {
    const int c = mask.at(p.row, p.col);
    if (std::find(present.begin(), present.end(), c) == present.end()) {
      present.push_back(c);
    }
  }
  std::sort(present.begin(), present.end());
  const int cls = present[std::uniform_int_distribution<std::size_t>(
      0, present.size() - 1)(rng)];
  std::vector<PixelCoord> of_class;
  for (const auto& p : rare) {
    if (mask.at(p.row, p.col) == cls) of_class.push_back(p);
  }
  return of_class[std::uniform_int_distribution<std::size_t>(
      0, of_class.size() - 1)(rng)];
}

}  // namespace

Crop sample_crop(const Image& image, const LabelMask& mask,
                 std::span<const PixelCoord> rare_pixels,
                 const SamplePolicy& policy, Rng& rng) {
  if (image.height != mask.height || image.width != mask.width) {
    throw ShapeError("sampler", "image and mask dimensions differ");
  }
  const int s = policy.crop_size;
  const int src_h = std::max(image.height, s);
  const int src_w = std::max(image.width, s);

  Crop crop;
  crop.pad_rows = src_h - image.height;
  crop.pad_cols = src_w - image.width;

  // One Bernoulli draw per crop decides the branch.
  const bool want_rare =
      std::bernoulli_distribution(policy.rare_fraction)(rng);
  if (want_rare && !rare_pixels.empty()) {
    const PixelCoord anchor = PickRare(rare_pixels, mask, policy, rng);
    const int j = policy.jitter();
    std::uniform_int_distribution<int> jitter(-j, j);
    const int cy = anchor.row + (j > 0 ? jitter(rng) : 0);
    const int cx = anchor.col + (j > 0 ? jitter(rng) : 0);
    crop.origin_row = std::clamp(cy - s / 2, 0, src_h - s);
    crop.origin_col = std::clamp(cx - s / 2, 0, src_w - s);
    crop.rare_centered = true;
    crop.anchor = anchor;
  } else {
    crop.origin_row = std::uniform_int_distribution<int>(0, src_h - s)(rng);
    crop.origin_col = std::uniform_int_distribution<int>(0, src_w - s)(rng);
  }

  crop.image = Image(s, s, image.channels, 0.0f);
  crop.mask = LabelMask(s, s, policy.ignore_id);
  for (int y = 0; y < s; ++y) {
    const int sy = crop.origin_row + y;
    if (sy >= image.height) break;
    for (int x = 0; x < s; ++x) {
      const int sx = crop.origin_col + x;
      if (sx >= image.width) break;
      crop.mask.at(y, x) = mask.at(sy, sx);
      for (int c = 0; c < image.channels; ++c) {
        crop.image.at(y, x, c) = image.at(sy, sx, c);
      }
    }
  }
  return crop;
}

void FlipHorizontal(Image& image, LabelMask& mask) {
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width / 2; ++x) {
      const int xr = image.width - 1 - x;
      for (int c = 0; c < image.channels; ++c) {
        std::swap(image.at(y, x, c), image.at(y, xr, c));
      }
      std::swap(mask.at(y, x), mask.at(y, xr));
    }
  }
}

void FlipVertical(Image& image, LabelMask& mask) {
  for (int y = 0; y < image.height / 2; ++y) {
    const int yr = image.height - 1 - y;
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < image.channels; ++c) {
        std::swap(image.at(y, x, c), image.at(yr, x, c));
      }
      std::swap(mask.at(y, x), mask.at(yr, x));
    }
  }
}

void RotateQuarter(Image& image, LabelMask& mask, int quarter_turns) {
  const int q = ((quarter_turns % 4) + 4) % 4;
  if (q == 0) return;
  if (image.height != image.width) {
    throw ShapeError("sampler", "quarter-turn rotation needs a square crop");
  }
  const int n = image.height;
  Image img(n, n, image.channels);
  LabelMask msk(n, n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      // Counterclockwise: destination (y, x) reads the source pixel that
      // lands there after q quarter turns.
      int sy = y, sx = x;
      for (int k = 0; k < q; ++k) {
        const int ty = sx, tx = n - 1 - sy;
        sy = ty;
        sx = tx;
      }
      msk.at(y, x) = mask.at(sy, sx);
      for (int c = 0; c < image.channels; ++c) {
        img.at(y, x, c) = image.at(sy, sx, c);
      }
    }
  }
  image = std::move(img);
  mask = std::move(msk);
}

namespace {

void Photometric(Image& image, const AugConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double brightness = cfg.brightness_delta * u(rng);
  const double contrast = 1.0 + cfg.contrast_delta * u(rng);
  const double hue = 2.0 * std::numbers::pi * cfg.hue_delta * u(rng);
  const double ch = std::cos(hue), sh = std::sin(hue);
  for (std::size_t p = 0; p < image.pixels(); ++p) {
    float* px = image.data.data() + p * image.channels;
    if (image.channels == 3) {
      // Hue rotation in YIQ space.
      const double r = px[0], g = px[1], b = px[2];
      const double yy = 0.299 * r + 0.587 * g + 0.114 * b;
      double i = 0.596 * r - 0.274 * g - 0.322 * b;
      double q = 0.211 * r - 0.523 * g + 0.312 * b;
      const double i2 = ch * i - sh * q, q2 = sh * i + ch * q;
      i = i2;
      q = q2;
      px[0] = static_cast<float>(yy + 0.956 * i + 0.621 * q);
      px[1] = static_cast<float>(yy - 0.272 * i - 0.647 * q);
      px[2] = static_cast<float>(yy - 1.106 * i + 1.703 * q);
    }
    for (int c = 0; c < image.channels; ++c) {
      const double v = (px[c] - 0.5) * contrast + 0.5 + brightness;
      px[c] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
}

}  // namespace

void augment(Image& image, LabelMask& mask, const AugConfig& cfg, Rng& rng) {
  auto coin = [&](double p) {
    return p > 0.0 && std::bernoulli_distribution(p)(rng);
  };
  if (coin(cfg.hflip_prob)) FlipHorizontal(image, mask);
  if (coin(cfg.vflip_prob)) FlipVertical(image, mask);
  if (coin(cfg.rotate_prob)) {
    const int q = cfg.rotations[std::uniform_int_distribution<std::size_t>(
        0, cfg.rotations.size() - 1)(rng)];
    RotateQuarter(image, mask, q);
  }
  if (coin(cfg.photometric_prob)) Photometric(image, cfg, rng);
}

}  // namespace rareseg
