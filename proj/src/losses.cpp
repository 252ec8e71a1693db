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
#include "rareseg/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rareseg/error.hpp"
#include "rareseg/json_fields.hpp"

namespace rareseg {

std::size_t OhemConfig::KeptFor(std::size_t batch_pixels) const {
  if (k > 0) return k;
  const auto derived = static_cast<std::size_t>(
      std::llround(ratio * static_cast<double>(batch_pixels)));
  return std::max<std::size_t>(std::max(derived, min_kept), 1);
}

void OhemConfig::Validate() const {
  if (k == 0 && !(ratio > 0.0 && ratio <= 1.0)) {
    throw ConfigError("ohem.ratio", "must lie in (0,1] when k is 0");
  }
}

void DiceConfig::Validate(int num_classes) const {
  if (!(epsilon > 0.0)) throw ConfigError("dice.epsilon", "must be > 0");
  if (!class_weights.empty()) {
    if (static_cast<int>(class_weights.size()) != num_classes) {
      throw ConfigError("dice.class_weights", "need one weight per class");
    }
    double sum = 0.0;
    for (double w : class_weights) {
      if (w < 0.0) throw ConfigError("dice.class_weights", "must be >= 0");
      sum += w;
    }
    if (!(sum > 0.0)) throw ConfigError("dice.class_weights", "all zero");
  }
}

LossConfig LossConfig::FromJson(const nlohmann::json& root, LossConfig base) {
  using json_fields::Read;
  if (auto it = root.find("ohem"); it != root.end()) {
    json_fields::CheckKeys(*it, "ohem", {"enabled", "k", "ratio", "min_kept"});
    Read(*it, "ohem", "enabled", base.use_ohem);
    Read(*it, "ohem", "k", base.ohem.k);
    Read(*it, "ohem", "ratio", base.ohem.ratio);
    Read(*it, "ohem", "min_kept", base.ohem.min_kept);
  }
  if (auto it = root.find("dice"); it != root.end()) {
    json_fields::CheckKeys(*it, "dice", {"enabled", "epsilon", "class_weights"});
    Read(*it, "dice", "enabled", base.use_dice);
    Read(*it, "dice", "epsilon", base.dice.epsilon);
    Read(*it, "dice", "class_weights", base.dice.class_weights);
  }
  base.ohem.Validate();
  return base;
}

namespace {

void CheckShapes(int h, int w, const LabelMask& labels) {
  if (h != labels.height || w != labels.width) {
    throw ShapeError("losses", "score map " + std::to_string(h) + "x" +
                                   std::to_string(w) + " vs labels " +
                                   std::to_string(labels.height) + "x" +
                                   std::to_string(labels.width));
  }
}

int LabelAt(const LabelMask& labels, std::size_t i, int num_classes,
            std::uint8_t ignore_id) {
  const int y = labels.data[i];
  if (y == ignore_id) return -1;
  if (y >= num_classes) {
    throw ValidationError("losses", "label " + std::to_string(y) +
                                        " out of range at pixel " +
                                        std::to_string(i));
  }
  return y;
}

}  // namespace

CeMap pixel_ce_map(const LogitMap& logits, const LabelMask& labels,
                   std::uint8_t ignore_id) {
  CheckShapes(logits.height, logits.width, labels);
  const std::size_t n = logits.pixels();
  CeMap ce;
  ce.loss.assign(n, 0.0);
  ce.valid.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto z = logits.pixel(i);
    for (double v : z) {
      if (!std::isfinite(v)) {
        throw ValidationError(
            "losses", "non-finite logit at (row " +
                          std::to_string(i / logits.width) + ", col " +
                          std::to_string(i % logits.width) + ")");
      }
    }
    const int y = LabelAt(labels, i, logits.num_classes, ignore_id);
    if (y < 0) continue;
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    ce.loss[i] = std::log(sum) + zmax - z[y];
    ce.valid[i] = 1;
    ++ce.valid_count;
  }
  return ce;
}

std::vector<std::size_t> ohem_select(const CeMap& ce, std::size_t k) {
  if (ce.valid_count == 0) {
    throw ValidationError("losses", "empty batch: no valid pixels to rank");
  }
  std::vector<std::size_t> idx;
  idx.reserve(ce.valid_count);
  for (std::size_t i = 0; i < ce.loss.size(); ++i) {
    if (ce.valid[i]) idx.push_back(i);
  }
  const std::size_t keep = std::min(k, idx.size());
  auto harder = [&](std::size_t a, std::size_t b) {
    if (ce.loss[a] != ce.loss[b]) return ce.loss[a] > ce.loss[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(keep),
                    idx.end(), harder);
  idx.resize(keep);
  return idx;
}

OhemResult ohem_loss(const LogitMap& logits, const LabelMask& labels,
                     std::size_t k, std::uint8_t ignore_id) {
  CeMap ce = pixel_ce_map(logits, labels, ignore_id);
  auto kept = ohem_select(ce, k);
  OhemResult r;
  r.kept = kept.size();
  r.grad = LogitMap(logits.height, logits.width, logits.num_classes);
  // Accumulate in raster order for a selection-order-independent sum.
  std::sort(kept.begin(), kept.end());
  const double inv = 1.0 / static_cast<double>(kept.size());
  double sum = 0.0;
  for (std::size_t i : kept) {
    sum += ce.loss[i];
    auto z = logits.pixel(i);
    auto g = r.grad.pixel(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      g[c] = std::exp(z[c] - zmax);
      denom += g[c];
    }
    for (double& v : g) v = v / denom * inv;
    g[labels.data[i]] -= inv;
  }
  r.value = sum * inv;
  return r;
}

std::vector<double> dice_per_class(const ProbabilityMap& probs,
                                   const LabelMask& labels,
                                   const DiceConfig& cfg,
                                   std::uint8_t ignore_id) {
  CheckShapes(probs.height, probs.width, labels);
  const int nc = probs.num_classes;
  std::vector<double> spg(nc, 0.0), sp(nc, 0.0), sg(nc, 0.0);
  for (std::size_t i = 0; i < probs.pixels(); ++i) {
    const int y = LabelAt(labels, i, nc, ignore_id);
    if (y < 0) continue;
    auto p = probs.pixel(i);
    for (int c = 0; c < nc; ++c) sp[c] += p[c];
    spg[y] += p[y];
    sg[y] += 1.0;
  }
  std::vector<double> dice(nc);
  for (int c = 0; c < nc; ++c) {
    dice[c] = (2.0 * spg[c] + cfg.epsilon) / (sp[c] + sg[c] + cfg.epsilon);
  }
  return dice;
}

DiceResult dice_loss(const ProbabilityMap& probs, const LabelMask& labels,
                     const DiceConfig& cfg, std::uint8_t ignore_id) {
  const int nc = probs.num_classes;
  cfg.Validate(nc);
  CheckShapes(probs.height, probs.width, labels);
  std::vector<double> spg(nc, 0.0), sp(nc, 0.0), sg(nc, 0.0);
  for (std::size_t i = 0; i < probs.pixels(); ++i) {
    const int y = LabelAt(labels, i, nc, ignore_id);
    if (y < 0) continue;
    auto p = probs.pixel(i);
    for (int c = 0; c < nc; ++c) sp[c] += p[c];
    spg[y] += p[y];
    sg[y] += 1.0;
  }
  std::vector<double> weight(nc, 1.0);
  if (!cfg.class_weights.empty()) weight = cfg.class_weights;
  const double wsum = std::accumulate(weight.begin(), weight.end(), 0.0);

  DiceResult r;
  r.per_class.resize(nc);
  std::vector<double> num(nc), den(nc);
  double mean = 0.0;
  for (int c = 0; c < nc; ++c) {
    num[c] = 2.0 * spg[c] + cfg.epsilon;
    den[c] = sp[c] + sg[c] + cfg.epsilon;
    r.per_class[c] = num[c] / den[c];
    mean += weight[c] * r.per_class[c];
  }
  r.value = 1.0 - mean / wsum;

  // dL/dp_ic = -(w_c / W) * (2 g_ic / D_c - N_c / D_c^2), then through the
  // softmax Jacobian: dz = p * (dp - <dp, p>).
  std::vector<double> base(nc), onehot(nc);
  for (int c = 0; c < nc; ++c) {
    base[c] = (weight[c] / wsum) * num[c] / (den[c] * den[c]);
    onehot[c] = -(weight[c] / wsum) * 2.0 / den[c];
  }
  r.grad = LogitMap(probs.height, probs.width, nc);
  std::vector<double> dp(nc);
  for (std::size_t i = 0; i < probs.pixels(); ++i) {
    const int y = LabelAt(labels, i, nc, ignore_id);
    if (y < 0) continue;
    auto p = probs.pixel(i);
    double dot = 0.0;
    for (int c = 0; c < nc; ++c) {
      dp[c] = base[c] + (c == y ? onehot[c] : 0.0);
      dot += dp[c] * p[c];
    }
    auto g = r.grad.pixel(i);
    for (int c = 0; c < nc; ++c) g[c] = p[c] * (dp[c] - dot);
  }
  return r;
}

TotalLoss total_loss(const LogitMap& logits, const LabelMask& labels,
                     const LossConfig& cfg) {
  TotalLoss out;
  const std::size_t k = cfg.use_ohem ? cfg.ohem.KeptFor(logits.pixels())
                                     : logits.pixels();
  OhemResult ce = ohem_loss(logits, labels, k, cfg.ignore_id);
  out.report.loss_ohem = ce.value;
  out.report.kept_pixel_count = ce.kept;
  out.grad = std::move(ce.grad);
  if (cfg.use_dice) {
    DiceResult dice = dice_loss(softmax(logits), labels, cfg.dice, cfg.ignore_id);
    out.report.loss_dice = dice.value;
    out.report.dice_per_class = std::move(dice.per_class);
    for (std::size_t i = 0; i < out.grad.data.size(); ++i) {
      out.grad.data[i] += dice.grad.data[i];
    }
  }
  out.report.loss_total = out.report.loss_dice + out.report.loss_ohem;
  if (!std::isfinite(out.report.loss_total)) {
    throw ValidationError("losses", "non-finite total loss");
  }
  return out;
}

LogitMap StackRows(std::span<const LogitMap> maps) {
  if (maps.empty()) return {};
  const auto& first = maps.front();
  LogitMap out(first.height * static_cast<int>(maps.size()), first.width,
               first.num_classes);
  std::size_t off = 0;
  for (const auto& m : maps) {
    if (m.width != first.width || m.height != first.height ||
        m.num_classes != first.num_classes) {
      throw ShapeError("losses", "batch maps differ in shape");
    }
    std::copy(m.data.begin(), m.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += m.data.size();
  }
  return out;
}

LabelMask StackRows(std::span<const LabelMask> masks) {
  if (masks.empty()) return {};
  const auto& first = masks.front();
  LabelMask out(first.height * static_cast<int>(masks.size()), first.width);
  std::size_t off = 0;
  for (const auto& m : masks) {
    if (m.width != first.width || m.height != first.height) {
      throw ShapeError("losses", "batch masks differ in shape");
    }
    std::copy(m.data.begin(), m.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(off));
    off += m.data.size();
  }
  return out;
}

std::vector<LogitMap> SplitRows(const LogitMap& stacked, int count) {
  if (count <= 0 || stacked.height % count != 0) {
    throw ShapeError("losses", "cannot split stacked map into equal parts");
  }
  const int h = stacked.height / count;
  std::vector<LogitMap> out;
  const std::size_t n = static_cast<std::size_t>(h) * stacked.width * stacked.num_classes;
  for (int b = 0; b < count; ++b) {
    LogitMap m(h, stacked.width, stacked.num_classes);
    std::copy(stacked.data.begin() + static_cast<std::ptrdiff_t>(b * n),
              stacked.data.begin() + static_cast<std::ptrdiff_t>((b + 1) * n), m.data.begin());
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace rareseg
