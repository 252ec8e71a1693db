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
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "rareseg/kernels.hpp"
#include "support/oracles.hpp"

namespace rareseg {
namespace {

namespace k = kernels;
namespace ref = kernels::reference;
using Vec = std::vector<double>;

Vec Random(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, scale);
  Vec v(n);
  for (double& x : v) x = z(rng);
  return v;
}

double Dot(const Vec& a, const Vec& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// Runs every parallel kernel with several thread counts.
class ThreadCounts : public ::testing::TestWithParam<int> {
 protected:
  void SetUp() override {
    saved_ = k::MaxThreads();
    k::SetThreads(GetParam());
  }
  void TearDown() override { k::SetThreads(saved_); }
  int saved_ = 1;
};

TEST_P(ThreadCounts, LinearMatchesReferenceBitwise) {
  const int t = 37, in = 13, out = 11;
  const Vec x = Random(t * in, 1), w = Random(in * out, 2), b = Random(out, 3);
  Vec y(t * out), y_ref(t * out);
  k::LinearForward(x, t, in, w, b, out, y);
  ref::LinearForward(x, t, in, w, b, out, y_ref);
  EXPECT_EQ(y, y_ref);

  const Vec dy = Random(t * out, 4);
  Vec dx(t * in), dw(in * out, 0.5), db(out, 0.25);
  Vec dx_r(t * in), dw_r(in * out, 0.5), db_r(out, 0.25);
  k::LinearBackward(x, t, in, w, out, dy, dx, dw, db);
  ref::LinearBackward(x, t, in, w, out, dy, dx_r, dw_r, db_r);
  EXPECT_EQ(dx, dx_r);
  EXPECT_EQ(dw, dw_r);
  EXPECT_EQ(db, db_r);
}

TEST_P(ThreadCounts, Im2ColAndCol2ImMatchReference) {
  const int h = 11, w = 9, c = 3, kk = 3, s = 2, p = 1;
  const int oh = (h + 2 * p - kk) / s + 1, ow = (w + 2 * p - kk) / s + 1;
  const Vec x = Random(h * w * c, 5);
  Vec cols(oh * ow * kk * kk * c), cols_r(cols.size());
  k::Im2Col(x, h, w, c, kk, s, p, oh, ow, cols);
  ref::Im2Col(x, h, w, c, kk, s, p, oh, ow, cols_r);
  EXPECT_EQ(cols, cols_r);
  const Vec g = Random(cols.size(), 6);
  Vec dx(x.size(), 0.0), dx_r(x.size(), 0.0);
  k::Col2Im(g, h, w, c, kk, s, p, oh, ow, dx);
  ref::Col2Im(g, h, w, c, kk, s, p, oh, ow, dx_r);
  for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_NEAR(dx[i], dx_r[i], 1e-14);
}

TEST_P(ThreadCounts, DepthwiseMatchesReference) {
  const int h = 7, w = 10, c = 6;
  const Vec x = Random(h * w * c, 7), wt = Random(9 * c, 8), b = Random(c, 9);
  Vec y(x.size()), y_r(x.size());
  k::DepthwiseConv3x3(x, h, w, c, wt, b, y);
  ref::DepthwiseConv3x3(x, h, w, c, wt, b, y_r);
  EXPECT_EQ(y, y_r);
  const Vec dy = Random(x.size(), 10);
  Vec dx(x.size()), dw(9 * c, 0.0), db(c, 0.0);
  Vec dx_r(x.size()), dw_r(9 * c, 0.0), db_r(c, 0.0);
  k::DepthwiseConv3x3Backward(x, h, w, c, wt, dy, dx, dw, db);
  ref::DepthwiseConv3x3Backward(x, h, w, c, wt, dy, dx_r, dw_r, db_r);
  for (std::size_t i = 0; i < dx.size(); ++i) EXPECT_NEAR(dx[i], dx_r[i], 1e-13);
  for (std::size_t i = 0; i < dw.size(); ++i) EXPECT_NEAR(dw[i], dw_r[i], 1e-12);
  for (std::size_t i = 0; i < db.size(); ++i) EXPECT_NEAR(db[i], db_r[i], 1e-12);
}

TEST_P(ThreadCounts, ResizeMatchesReference) {
  const int h = 5, w = 7, c = 4, oh = 20, ow = 28;
  const Vec x = Random(h * w * c, 11);
  Vec y(oh * ow * c), y_r(y.size());
  k::ResizeBilinear(x, h, w, c, oh, ow, y);
  ref::ResizeBilinear(x, h, w, c, oh, ow, y_r);
  EXPECT_EQ(y, y_r);
}

TEST_P(ThreadCounts, AttentionMatchesReference) {
  const int tq = 12, tk = 5, c = 8, heads = 2;
  const Vec q = Random(tq * c, 12), kk = Random(tk * c, 13), v = Random(tk * c, 14);
  Vec out(tq * c), out_r(tq * c), probs(heads * tq * tk), probs_r(probs.size());
  k::Attention(q, kk, v, tq, tk, c, heads, out, probs);
  ref::Attention(q, kk, v, tq, tk, c, heads, out_r, probs_r);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], out_r[i], 1e-14);
  const Vec dout = Random(tq * c, 15);
  Vec dq(q.size()), dk(kk.size()), dv(v.size());
  Vec dq_r(q.size()), dk_r(kk.size()), dv_r(v.size());
  k::AttentionBackward(q, kk, v, probs, dout, tq, tk, c, heads, dq, dk, dv);
  ref::AttentionBackward(q, kk, v, probs_r, dout, tq, tk, c, heads, dq_r, dk_r, dv_r);
  for (std::size_t i = 0; i < dq.size(); ++i) EXPECT_NEAR(dq[i], dq_r[i], 1e-13);
  for (std::size_t i = 0; i < dk.size(); ++i) EXPECT_NEAR(dk[i], dk_r[i], 1e-13);
  for (std::size_t i = 0; i < dv.size(); ++i) EXPECT_NEAR(dv[i], dv_r[i], 1e-13);
}

TEST_P(ThreadCounts, ResultsIndependentOfThreadCount) {
  const int t = 64, in = 32, out = 16;
  const Vec x = Random(t * in, 21), w = Random(in * out, 22), b = Random(out, 23);
  Vec y(t * out);
  k::LinearForward(x, t, in, w, b, out, y);
  const int saved = k::MaxThreads();
  k::SetThreads(1);
  Vec y1(t * out);
  k::LinearForward(x, t, in, w, b, out, y1);
  k::SetThreads(saved);
  EXPECT_EQ(y, y1);
}

INSTANTIATE_TEST_SUITE_P(Kernels, ThreadCounts, ::testing::Values(1, 2, 4));

TEST(Kernels, Im2ColLinearEqualsDirectConvolution) {
  const int h = 9, w = 8, cin = 3, cout = 5, kk = 7, s = 4, p = 3;
  const Vec x = Random(h * w * cin, 31);
  const Vec wt = Random(kk * kk * cin * cout, 32), b = Random(cout, 33);
  int oh = 0, ow = 0;
  const Vec want = oracle::Conv2d(x, h, w, cin, wt, b, cout, kk, s, p, &oh, &ow);
  Vec cols(oh * ow * kk * kk * cin), y(oh * ow * cout);
  k::Im2Col(x, h, w, cin, kk, s, p, oh, ow, cols);
  k::LinearForward(cols, oh * ow, kk * kk * cin, wt, b, cout, y);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(Kernels, DepthwiseEqualsDirectConvolutionWithDiagonalWeights) {
  const int h = 6, w = 5, c = 3;
  const Vec x = Random(h * w * c, 34), wt = Random(9 * c, 35), b = Random(c, 36);
  Vec full(9 * c * c, 0.0);
  for (int tap = 0; tap < 9; ++tap) {
    for (int ch = 0; ch < c; ++ch) full[(tap * c + ch) * c + ch] = wt[tap * c + ch];
  }
  const Vec want = oracle::Conv2d(x, h, w, c, full, b, c, 3, 1, 1, nullptr, nullptr);
  Vec y(x.size());
  k::DepthwiseConv3x3(x, h, w, c, wt, b, y);
  for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(Kernels, Col2ImIsAdjointOfIm2Col) {
  const int h = 10, w = 13, c = 2, kk = 3, s = 2, p = 1;
  const int oh = (h + 2 * p - kk) / s + 1, ow = (w + 2 * p - kk) / s + 1;
  const Vec x = Random(h * w * c, 41), g = Random(oh * ow * kk * kk * c, 42);
  Vec cols(g.size()), back(x.size(), 0.0);
  k::Im2Col(x, h, w, c, kk, s, p, oh, ow, cols);
  k::Col2Im(g, h, w, c, kk, s, p, oh, ow, back);
  EXPECT_NEAR(Dot(cols, g), Dot(x, back), 1e-10);
}

TEST(Kernels, ResizeMatchesHalfPixelFormula) {
  const int h = 3, w = 4, c = 2, oh = 12, ow = 16;
  const Vec x = Random(h * w * c, 43);
  Vec y(oh * ow * c);
  k::ResizeBilinear(x, h, w, c, oh, ow, y);
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        EXPECT_NEAR(y[(oy * ow + ox) * c + ch],
                    oracle::BilinearAt(x, h, w, c, ch, oh, ow, oy, ox), 1e-12);
      }
    }
  }
}

TEST(Kernels, ResizeBackwardIsAdjoint) {
  const int h = 4, w = 3, c = 3, oh = 16, ow = 12;
  const Vec x = Random(h * w * c, 44), g = Random(oh * ow * c, 45);
  Vec y(g.size()), back(x.size(), 0.0);
  k::ResizeBilinear(x, h, w, c, oh, ow, y);
  k::ResizeBilinearBackward(g, oh, ow, h, w, c, back);
  EXPECT_NEAR(Dot(y, g), Dot(x, back), 1e-10);
}

TEST(Kernels, AttentionMatchesPerHeadOracle) {
  const int tq = 4, tk = 3, c = 6, heads = 3, d = c / heads;
  const Vec q = Random(tq * c, 46), kk = Random(tk * c, 47), v = Random(tk * c, 48);
  Vec out(tq * c);
  k::Attention(q, kk, v, tq, tk, c, heads, out, {});
  for (int hd = 0; hd < heads; ++hd) {
    auto slice = [&](const Vec& m, int t) {
      Vec s(t * d);
      for (int i = 0; i < t; ++i) {
        for (int j = 0; j < d; ++j) s[i * d + j] = m[i * c + hd * d + j];
      }
      return s;
    };
    const Vec want = oracle::AttentionOneHead(slice(q, tq), slice(kk, tk), slice(v, tk), tq, tk, d);
    for (int i = 0; i < tq; ++i) {
      for (int j = 0; j < d; ++j) EXPECT_NEAR(out[i * c + hd * d + j], want[i * d + j], 1e-13);
    }
  }
}

TEST(Kernels, LayerNormBackwardMatchesFiniteDifferences) {
  const int t = 3, c = 5;
  const Vec x0 = Random(t * c, 51), gain = Random(c, 52), bias = Random(c, 53);
  const Vec r = Random(t * c, 54);
  auto f = [&](const Vec& x) {
    Vec y(t * c), xh(t * c), is(t);
    k::LayerNorm(x, t, c, gain, bias, 1e-6, y, xh, is);
    return Dot(y, r);
  };
  Vec y(t * c), xh(t * c), is(t), dx(t * c), dg(c, 0.0), db(c, 0.0);
  k::LayerNorm(x0, t, c, gain, bias, 1e-6, y, xh, is);
  k::LayerNormBackward(r, xh, is, t, c, gain, dx, dg, db);
  const Vec fd = oracle::NumericGradient(f, x0, 1e-6);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    EXPECT_LT(oracle::RelativeError(dx[i], fd[i], 1e-6), 1e-6);
  }
  // Normalized rows: zero mean, second moment var / (var + eps).
  for (int i = 0; i < t; ++i) {
    double mx = 0, var = 0, m = 0, v = 0;
    for (int j = 0; j < c; ++j) mx += x0[i * c + j] / c;
    for (int j = 0; j < c; ++j) var += (x0[i * c + j] - mx) * (x0[i * c + j] - mx) / c;
    for (int j = 0; j < c; ++j) m += xh[i * c + j];
    for (int j = 0; j < c; ++j) v += xh[i * c + j] * xh[i * c + j];
    EXPECT_NEAR(m / c, 0.0, 1e-12);
    EXPECT_NEAR(v / c, var / (var + 1e-6), 1e-12);
  }
}

TEST(Kernels, GeluIsExactErfForm) {
  const Vec x{-3.0, -1.0, -0.1, 0.0, 0.5, 2.0};
  Vec y(x.size()), dx(x.size());
  k::Gelu(x, y);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_NEAR(y[i], 0.5 * x[i] * (1.0 + std::erf(x[i] / std::sqrt(2.0))), 1e-15);
  }
  const Vec ones(x.size(), 1.0);
  k::GeluBackward(x, ones, dx);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6;
    const double fd = (0.5 * (x[i] + h) * (1 + std::erf((x[i] + h) / std::sqrt(2.0))) -
                       0.5 * (x[i] - h) * (1 + std::erf((x[i] - h) / std::sqrt(2.0)))) /
                      (2 * h);
    EXPECT_NEAR(dx[i], fd, 1e-8);
  }
}

}  // namespace
}  // namespace rareseg
