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
#include "rareseg/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>

#include "rareseg/losses.hpp"
#include "rareseg/model.hpp"
#include "rareseg/raster.hpp"
#include "rareseg/tiler.hpp"

namespace rareseg {
namespace {

using Rng = std::mt19937_64;

struct Instance {
  LogitMap logits;
  LabelMask labels;
};

Instance RandomInstance(Rng& rng, int h, int w, int c, double ignore_share) {
  std::normal_distribution<double> z(0.0, 2.0);
  std::uniform_int_distribution<int> cls(0, c - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in{LogitMap(h, w, c), LabelMask(h, w)};
  for (double& v : in.logits.data) v = z(rng);
  for (auto& l : in.labels.data) {
    l = u(rng) < ignore_share ? 255 : static_cast<std::uint8_t>(cls(rng));
  }
  return in;
}

double MeanCe(const Instance& in) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < in.labels.pixels(); ++p) {
    if (in.labels.data[p] == 255) continue;
    const auto z = in.logits.pixel(p);
    double s = 0.0;
    for (double v : z) s += std::exp(v);
    sum += std::log(s) - z[in.labels.data[p]];
    ++n;
  }
  return sum / static_cast<double>(n);
}

double RelErr(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-8});
  return std::abs(a - b) / scale;
}

double MaxGradError(const std::function<double(const LogitMap&)>& f,
                    const LogitMap& at, const LogitMap& analytic) {
  const double h = 1e-5;
  double worst = 0.0;
  LogitMap x = at;
  for (std::size_t i = 0; i < x.data.size(); ++i) {
    const double keep = x.data[i];
    x.data[i] = keep + h;
    const double up = f(x);
    x.data[i] = keep - h;
    const double down = f(x);
    x.data[i] = keep;
    worst = std::max(worst, RelErr(analytic.data[i], (up - down) / (2 * h)));
  }
  return worst;
}

SelftestCheck TileCoverage() {
  SelftestCheck c;
  const TileGrid grid = plan_tiles(3000, 4000, TileSpec{1024, 768});
  const auto counts = grid.OverlapCounts();
  const bool covered =
      std::all_of(counts.begin(), counts.end(), [](auto v) { return v >= 1; });
  std::ostringstream os;
  os << grid.size() << " windows on 3000x4000, min overlap "
     << *std::min_element(counts.begin(), counts.end());
  bool ok = grid.size() == 20 && covered;
  Rng rng(7);
  std::uniform_int_distribution<int> dim(64, 400);
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int h = dim(rng), w = dim(rng);
    const TileGrid g = plan_tiles(h, w, TileSpec{64, 32});
    for (int y = 0; y < h && ok; ++y) {
      for (int x = 0; x < w && ok; ++x) ok = g.CoverCount(y, x) >= 1;
    }
  }
  c.passed = ok;
  c.detail = os.str();
  return c;
}

SelftestCheck OhemIdentity(const SelftestOptions& opt) {
  SelftestCheck c;
  Rng rng(opt.seed);
  double worst = 0.0;
  bool order_ok = true;
  for (int i = 0; i < opt.loss_instances; ++i) {
    Instance in = RandomInstance(rng, 6, 5, 4, 0.1);
    // Quantize to force ties in the per-pixel losses.
    if (i % 2 == 0) {
      for (double& v : in.logits.data) v = std::round(v);
    }
    const std::size_t n = in.labels.pixels();
    const auto all = ohem_loss(in.logits, in.labels, n + 3);
    worst = std::max(worst, std::abs(all.value - MeanCe(in)));

    const CeMap ce = pixel_ce_map(in.logits, in.labels);
    std::vector<std::size_t> ref;
    for (std::size_t p = 0; p < n; ++p) {
      if (ce.valid[p]) ref.push_back(p);
    }
    std::stable_sort(ref.begin(), ref.end(), [&](std::size_t a, std::size_t b) {
      return ce.loss[a] > ce.loss[b];
    });
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, ref.size()}) {
      auto got = ohem_select(ce, k);
      std::vector<std::size_t> want(ref.begin(),
                                    ref.begin() + std::min(k, ref.size()));
      order_ok = order_ok && got == want;
    }
  }
  std::ostringstream os;
  os << "max |L_ohem(k>=N) - mean CE| = " << worst
     << (order_ok ? ", selection matches sort" : ", selection MISMATCH");
  c.passed = worst < 1e-10 && order_ok;
  c.detail = os.str();
  return c;
}

SelftestCheck LossGradients(const SelftestOptions& opt) {
  SelftestCheck c;
  Rng rng(opt.seed + 1);
  double worst_dice = 0.0, worst_ohem = 0.0, worst_total = 0.0;
  for (int i = 0; i < 20; ++i) {
    Instance in = RandomInstance(rng, 4, 4, 3, 0.1);
    in.labels.data[0] = 0;  // at least one valid pixel
    DiceConfig dice;
    auto dice_f = [&](const LogitMap& z) {
      return dice_loss(softmax(z), in.labels, dice).value;
    };
    worst_dice = std::max(
        worst_dice,
        MaxGradError(dice_f, in.logits, dice_loss(softmax(in.logits), in.labels, dice).grad));

    const std::size_t k = 6;
    auto ohem_f = [&](const LogitMap& z) { return ohem_loss(z, in.labels, k).value; };
    worst_ohem = std::max(
        worst_ohem, MaxGradError(ohem_f, in.logits, ohem_loss(in.logits, in.labels, k).grad));

    LossConfig cfg;
    cfg.ohem.k = k;
    auto total_f = [&](const LogitMap& z) {
      return total_loss(z, in.labels, cfg).report.loss_total;
    };
    worst_total = std::max(
        worst_total, MaxGradError(total_f, in.logits, total_loss(in.logits, in.labels, cfg).grad));
  }
  std::ostringstream os;
  os << "max rel err dice=" << worst_dice << " ohem=" << worst_ohem
     << " total=" << worst_total;
  c.passed = worst_dice < 1e-5 && worst_ohem < 1e-5 && worst_total < 1e-5;
  c.detail = os.str();
  return c;
}

SelftestCheck ModelGradients(const SelftestOptions& opt) {
  SelftestCheck c;
  ModelConfig cfg = ModelConfig::Nano();
  cfg.num_classes = 4;
  ParameterSet params = init_parameters(cfg, opt.seed);
  Rng rng(opt.seed + 2);
  // Larger weights than the initializer keep every gradient well above
  // finite-difference noise.
  std::normal_distribution<double> z(0.0, 0.3);
  for (auto& e : params.entries()) {
    for (double& v : e.tensor.data) v += z(rng);
  }
  Image image(32, 32, 3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : image.data) v = u(rng);
  LabelMask labels(32, 32);
  std::uniform_int_distribution<int> cls(0, cfg.num_classes - 1);
  for (auto& l : labels.data) l = static_cast<std::uint8_t>(cls(rng));

  LossConfig loss;
  loss.use_ohem = false;  // smooth objective: mean CE + Dice
  Network net(cfg);
  const LogitMap logits = net.Forward(image, params);
  const TotalLoss t = total_loss(logits, labels, loss);
  ParameterSet grads = params.ZerosLike();
  net.Backward(t.grad, params, grads);

  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (std::size_t e = 0; e < params.size(); ++e) {
    for (std::size_t i = 0; i < params.entries()[e].tensor.size(); ++i) {
      all.emplace_back(e, i);
    }
  }
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::min<std::size_t>(all.size(), opt.model_parameters));

  const double h = 1e-3;
  double worst = 0.0;
  std::string worst_name;
  for (auto [e, i] : all) {
    double& p = params.entries()[e].tensor.data[i];
    const double keep = p;
    p = keep + h;
    const double up = total_loss(model_forward(image, cfg, params), labels, loss).report.loss_total;
    p = keep - h;
    const double down = total_loss(model_forward(image, cfg, params), labels, loss).report.loss_total;
    p = keep;
    const double fd = (up - down) / (2 * h);
    const double err = RelErr(grads.entries()[e].tensor.data[i], fd);
    if (err > worst) {
      worst = err;
      worst_name = params.entries()[e].name + "[" + std::to_string(i) + "]";
    }
  }
  std::ostringstream os;
  os << all.size() << " parameters, max rel err " << worst << " at " << worst_name;
  c.passed = worst < 1e-3 && static_cast<int>(all.size()) >= opt.model_parameters;
  c.detail = os.str();
  return c;
}

SelftestCheck TiledConsistency() {
  SelftestCheck c;
  const int classes = 5;
  LogitMap tile_logits(64, 64, classes);
  for (std::size_t p = 0; p < tile_logits.pixels(); ++p) {
    for (int k = 0; k < classes; ++k) tile_logits.pixel(p)[k] = 0.3 * k - 0.1 * k * k;
  }
  TileModel model = [&](const Image&) { return tile_logits; };
  Image image(150, 230, 3);
  const ProbabilityMap tiled = tiled_inference(model, image, TileSpec{64, 48});
  const ProbabilityMap single = softmax(tile_logits);
  double worst = 0.0, worst_sum = 0.0;
  for (std::size_t p = 0; p < tiled.pixels(); ++p) {
    double s = 0.0;
    for (int k = 0; k < classes; ++k) {
      worst = std::max(worst, std::abs(tiled.pixel(p)[k] - single.pixel(0)[k]));
      s += tiled.pixel(p)[k];
    }
    worst_sum = std::max(worst_sum, std::abs(s - 1.0));
  }
  std::ostringstream os;
  os << "max |tiled - single| = " << worst << ", max |sum - 1| = " << worst_sum;
  c.passed = worst <= 1e-6 && worst_sum <= 1e-5;
  c.detail = os.str();
  return c;
}

template <class F>
SelftestCheck Timed(const char* name, F&& f) {
  const auto start = std::chrono::steady_clock::now();
  SelftestCheck c;
  try {
    c = f();
  } catch (const std::exception& e) {
    c.passed = false;
    c.detail = std::string("exception: ") + e.what();
  }
  c.name = name;
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const SelftestOptions& options) {
  std::vector<SelftestCheck> out;
  out.push_back(Timed("tile_coverage", [] { return TileCoverage(); }));
  out.push_back(Timed("ohem_identity", [&] { return OhemIdentity(options); }));
  out.push_back(Timed("loss_gradients", [&] { return LossGradients(options); }));
  if (options.model_parameters > 0) {
    out.push_back(Timed("model_gradients", [&] { return ModelGradients(options); }));
  }
  out.push_back(Timed("tiled_consistency", [] { return TiledConsistency(); }));
  return out;
}

}  // namespace rareseg
