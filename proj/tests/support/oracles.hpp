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
#ifndef RARESEG_TESTS_SUPPORT_ORACLES_HPP_
#define RARESEG_TESTS_SUPPORT_ORACLES_HPP_

// Brute-force reference computations used by the tests. Written directly
// from the defining formulas, with no shared code from the library.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <set>
#include <utility>
#include <vector>

namespace rareseg::oracle {

// -log softmax(z)[y], evaluated in long double.
inline double CrossEntropy(const std::vector<double>& z, int y) {
  long double s = 0.0L;
  for (double v : z) s += std::exp(static_cast<long double>(v));
  return static_cast<double>(std::log(s) - static_cast<long double>(z[y]));
}

inline std::vector<double> Softmax(const std::vector<double>& z) {
  long double s = 0.0L;
  for (double v : z) s += std::exp(static_cast<long double>(v));
  std::vector<double> p(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = static_cast<double>(std::exp(static_cast<long double>(z[i])) / s);
  }
  return p;
}

// Indices of the k largest values; ties resolved by lower index. Uses a
// full sort of (value, index) pairs.
inline std::vector<std::size_t> TopK(const std::vector<double>& values,
                                     const std::vector<bool>& valid,
                                     std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (valid[i]) all.emplace_back(values[i], i);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back(all[i].second);
  return out;
}

// Central finite-difference gradient of f at x.
inline std::vector<double> NumericGradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Five-point central stencil; truncation error O(h^4).
inline std::vector<double> NumericGradient5(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    auto at = [&](double offset) {
      x[i] = keep + offset;
      return f(x);
    };
    g[i] = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12.0 * h);
    x[i] = keep;
  }
  return g;
}

inline double RelativeError(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Direct 2-D convolution over an HWC input. weight[((ky*k+kx)*cin+ci)*cout+co].
inline std::vector<double> Conv2d(const std::vector<double>& x, int h, int w,
                                  int cin, const std::vector<double>& weight,
                                  const std::vector<double>& bias, int cout,
                                  int k, int stride, int pad, int* oh_out,
                                  int* ow_out) {
  const int oh = (h + 2 * pad - k) / stride + 1;
  const int ow = (w + 2 * pad - k) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(oh) * ow * cout, 0.0);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int co = 0; co < cout; ++co) {
        double acc = bias.empty() ? 0.0 : bias[co];
        for (int ky = 0; ky < k; ++ky) {
          for (int kx = 0; kx < k; ++kx) {
            const int iy = oy * stride - pad + ky;
            const int ix = ox * stride - pad + kx;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            for (int ci = 0; ci < cin; ++ci) {
              acc += x[(static_cast<std::size_t>(iy) * w + ix) * cin + ci] *
                     weight[((static_cast<std::size_t>(ky) * k + kx) * cin + ci) * cout + co];
            }
          }
        }
        y[(static_cast<std::size_t>(oy) * ow + ox) * cout + co] = acc;
      }
    }
  }
  if (oh_out) *oh_out = oh;
  if (ow_out) *ow_out = ow;
  return y;
}

// softmax(Q K^T / sqrt(d)) V for one head, row by row.
inline std::vector<double> AttentionOneHead(const std::vector<double>& q,
                                            const std::vector<double>& k,
                                            const std::vector<double>& v,
                                            int tq, int tk, int d) {
  std::vector<double> out(static_cast<std::size_t>(tq) * d, 0.0);
  for (int i = 0; i < tq; ++i) {
    std::vector<double> s(tk);
    for (int j = 0; j < tk; ++j) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += q[i * d + c] * k[j * d + c];
      s[j] = dot / std::sqrt(static_cast<double>(d));
    }
    const auto p = Softmax(s);
    for (int j = 0; j < tk; ++j) {
      for (int c = 0; c < d; ++c) out[i * d + c] += p[j] * v[j * d + c];
    }
  }
  return out;
}

// Bilinear sample with half-pixel centers at output (oy, ox).
inline double BilinearAt(const std::vector<double>& x, int h, int w, int c,
                         int ch, int oh, int ow, int oy, int ox) {
  auto src = [](int o, int in, int out) {
    const double s = (o + 0.5) * static_cast<double>(in) / out - 0.5;
    return std::max(s, 0.0);
  };
  const double sy = src(oy, h, oh), sx = src(ox, w, ow);
  const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
  const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  auto at = [&](int yy, int xx) { return x[(static_cast<std::size_t>(yy) * w + xx) * c + ch]; };
  return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x1)) +
         fy * ((1 - fx) * at(y1, x0) + fx * at(y1, x1));
}

// Window origins along one axis from the closed form: ceil((dim - tile) /
// stride) + 1 windows at multiples of stride, the last clamped to dim - tile.
inline std::vector<int> AxisOrigins(int dim, int tile, int stride) {
  const int n = (dim - tile + stride - 1) / stride + 1;
  std::vector<int> out;
  for (int i = 0; i < n; ++i) out.push_back(std::min(i * stride, dim - tile));
  return out;
}

// IoU of class c as |pred==c AND truth==c| / |pred==c OR truth==c| over
// pixels whose truth is not `ignore`; -1 when the union is empty.
inline double SetIoU(const std::vector<std::uint8_t>& pred,
                     const std::vector<std::uint8_t>& truth, int c,
                     std::uint8_t ignore = 255) {
  std::set<std::size_t> a, b;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (truth[i] == ignore) continue;
    if (pred[i] == c) a.insert(i);
    if (truth[i] == c) b.insert(i);
  }
  std::set<std::size_t> inter, uni;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::inserter(inter, inter.begin()));
  std::set_union(a.begin(), a.end(), b.begin(), b.end(),
                 std::inserter(uni, uni.begin()));
  if (uni.empty()) return -1.0;
  return static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

// Smoothed per-class Dice by enumeration.
inline std::vector<double> Dice(const std::vector<double>& probs,
                                const std::vector<std::uint8_t>& labels, int c,
                                double eps, std::uint8_t ignore = 255) {
  std::vector<double> out(c);
  for (int k = 0; k < c; ++k) {
    double inter = 0, sp = 0, sg = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == ignore) continue;
      const double p = probs[i * c + k];
      const double g = labels[i] == k ? 1.0 : 0.0;
      inter += p * g;
      sp += p;
      sg += g;
    }
    out[k] = (2 * inter + eps) / (sp + sg + eps);
  }
  return out;
}

}  // namespace rareseg::oracle

#endif  // RARESEG_TESTS_SUPPORT_ORACLES_HPP_
