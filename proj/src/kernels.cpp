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
#include "rareseg/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace rareseg::kernels {

using Index = std::ptrdiff_t;

int MaxThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void SetThreads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

void LinearForward(CSpan x, int tokens, int in, CSpan w, CSpan b, int out,
                   MSpan y) {
#pragma omp parallel for schedule(static)
  for (Index t = 0; t < tokens; ++t) {
    const double* xt = x.data() + t * in;
    double* yt = y.data() + t * out;
    for (int o = 0; o < out; ++o) yt[o] = b.empty() ? 0.0 : b[o];
    for (int i = 0; i < in; ++i) {
      const double xi = xt[i];
      const double* wi = w.data() + static_cast<Index>(i) * out;
      for (int o = 0; o < out; ++o) yt[o] += xi * wi[o];
    }
  }
}

void LinearBackward(CSpan x, int tokens, int in, CSpan w, int out, CSpan dy,
                    MSpan dx, MSpan dw, MSpan db) {
  if (!dx.empty()) {
#pragma omp parallel for schedule(static)
    for (Index t = 0; t < tokens; ++t) {
      const double* dyt = dy.data() + t * out;
      double* dxt = dx.data() + t * in;
      for (int i = 0; i < in; ++i) {
        const double* wi = w.data() + static_cast<Index>(i) * out;
        double s = 0.0;
        for (int o = 0; o < out; ++o) s += dyt[o] * wi[o];
        dxt[i] = s;
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < in; ++i) {
    double* dwi = dw.data() + i * out;
    for (Index t = 0; t < tokens; ++t) {
      const double xi = x[t * in + i];
      if (xi == 0.0) continue;
      const double* dyt = dy.data() + t * out;
      for (int o = 0; o < out; ++o) dwi[o] += xi * dyt[o];
    }
  }
  if (!db.empty()) {
    for (Index t = 0; t < tokens; ++t) {
      const double* dyt = dy.data() + t * out;
      for (int o = 0; o < out; ++o) db[o] += dyt[o];
    }
  }
}

void Im2Col(CSpan x, int h, int w, int c, int k, int stride, int pad, int oh,
            int ow, MSpan cols) {
  const Index row_len = static_cast<Index>(k) * k * c;
#pragma omp parallel for schedule(static)
  for (Index oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* row = cols.data() + (oy * ow + ox) * row_len;
      for (int ky = 0; ky < k; ++ky) {
        const Index iy = oy * stride - pad + ky;
        for (int kx = 0; kx < k; ++kx) {
          const Index ix = static_cast<Index>(ox) * stride - pad + kx;
          double* dst = row + (static_cast<Index>(ky) * k + kx) * c;
          if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
            std::fill(dst, dst + c, 0.0);
          } else {
            const double* src = x.data() + (iy * w + ix) * c;
            std::copy(src, src + c, dst);
          }
        }
      }
    }
  }
}

void Col2Im(CSpan cols, int h, int w, int c, int k, int stride, int pad,
            int oh, int ow, MSpan dx) {
  // Gather form: each input pixel sums the taps that read it, so threads
  // own disjoint input rows.
  const Index row_len = static_cast<Index>(k) * k * c;
#pragma omp parallel for schedule(static)
  for (Index iy = 0; iy < h; ++iy) {
    for (int ky = 0; ky < k; ++ky) {
      const Index num = iy + pad - ky;
      if (num < 0 || num % stride != 0) continue;
      const Index oy = num / stride;
      if (oy >= oh) continue;
      for (int ix = 0; ix < w; ++ix) {
        double* dst = dx.data() + (iy * w + ix) * c;
        for (int kx = 0; kx < k; ++kx) {
          const Index numx = static_cast<Index>(ix) + pad - kx;
          if (numx < 0 || numx % stride != 0) continue;
          const Index ox = numx / stride;
          if (ox >= ow) continue;
          const double* src = cols.data() + (oy * ow + ox) * row_len +
                              (static_cast<Index>(ky) * k + kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
        }
      }
    }
  }
}

void DepthwiseConv3x3(CSpan x, int h, int w, int c, CSpan weight, CSpan bias,
                      MSpan y) {
#pragma omp parallel for schedule(static)
  for (Index oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      double* dst = y.data() + (oy * w + ox) * c;
      for (int ch = 0; ch < c; ++ch) dst[ch] = bias[ch];
      for (int ky = 0; ky < 3; ++ky) {
        const Index iy = oy + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const Index ix = static_cast<Index>(ox) + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const double* src = x.data() + (iy * w + ix) * c;
          const double* wk = weight.data() + (ky * 3 + kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch] * wk[ch];
        }
      }
    }
  }
}

void DepthwiseConv3x3Backward(CSpan x, int h, int w, int c, CSpan weight,
                              CSpan dy, MSpan dx, MSpan dweight, MSpan dbias) {
#pragma omp parallel for schedule(static)
  for (Index iy = 0; iy < h; ++iy) {
    for (int ix = 0; ix < w; ++ix) {
      double* dst = dx.data() + (iy * w + ix) * c;
      std::fill(dst, dst + c, 0.0);
      for (int ky = 0; ky < 3; ++ky) {
        const Index oy = iy - ky + 1;
        if (oy < 0 || oy >= h) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const Index ox = static_cast<Index>(ix) - kx + 1;
          if (ox < 0 || ox >= w) continue;
          const double* g = dy.data() + (oy * w + ox) * c;
          const double* wk = weight.data() + (ky * 3 + kx) * c;
          for (int ch = 0; ch < c; ++ch) dst[ch] += g[ch] * wk[ch];
        }
      }
    }
  }
  // Weight gradients: each tap row of dweight is owned by one thread.
#pragma omp parallel for schedule(static)
  for (Index tap = 0; tap < 9; ++tap) {
    const int ky = static_cast<int>(tap / 3), kx = static_cast<int>(tap % 3);
    double* dwk = dweight.data() + tap * c;
    for (Index oy = 0; oy < h; ++oy) {
      const Index iy = oy + ky - 1;
      if (iy < 0 || iy >= h) continue;
      for (int ox = 0; ox < w; ++ox) {
        const Index ix = static_cast<Index>(ox) + kx - 1;
        if (ix < 0 || ix >= w) continue;
        const double* g = dy.data() + (oy * w + ox) * c;
        const double* src = x.data() + (iy * w + ix) * c;
        for (int ch = 0; ch < c; ++ch) dwk[ch] += g[ch] * src[ch];
      }
    }
  }
  const Index n = static_cast<Index>(h) * w;
  for (Index p = 0; p < n; ++p) {
    const double* g = dy.data() + p * c;
    for (int ch = 0; ch < c; ++ch) dbias[ch] += g[ch];
  }
}

namespace {

struct Tap {
  int i0, i1;
  double l0, l1;
};

// Half-pixel-center source coordinate, clamped at the low edge.
Tap SourceTap(int dst, int in, int out) {
  const double scale = static_cast<double>(in) / out;
  double src = (dst + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  int i0 = static_cast<int>(src);
  if (i0 > in - 1) i0 = in - 1;
  const int i1 = i0 < in - 1 ? i0 + 1 : i0;
  const double l1 = src - i0;
  return {i0, i1, 1.0 - l1, l1};
}

}  // namespace

void ResizeBilinear(CSpan x, int h, int w, int c, int oh, int ow, MSpan y) {
  std::vector<Tap> xs(ow);
  for (int ox = 0; ox < ow; ++ox) xs[ox] = SourceTap(ox, w, ow);
#pragma omp parallel for schedule(static)
  for (Index oy = 0; oy < oh; ++oy) {
    const Tap ty = SourceTap(static_cast<int>(oy), h, oh);
    for (int ox = 0; ox < ow; ++ox) {
      const Tap& tx = xs[ox];
      const double* a = x.data() + (static_cast<Index>(ty.i0) * w + tx.i0) * c;
      const double* b = x.data() + (static_cast<Index>(ty.i0) * w + tx.i1) * c;
      const double* d = x.data() + (static_cast<Index>(ty.i1) * w + tx.i0) * c;
      const double* e = x.data() + (static_cast<Index>(ty.i1) * w + tx.i1) * c;
      double* dst = y.data() + (oy * ow + ox) * c;
      for (int ch = 0; ch < c; ++ch) {
        dst[ch] = ty.l0 * (tx.l0 * a[ch] + tx.l1 * b[ch]) +
                  ty.l1 * (tx.l0 * d[ch] + tx.l1 * e[ch]);
      }
    }
  }
}

void ResizeBilinearBackward(CSpan dy, int oh, int ow, int h, int w, int c,
                            MSpan dx) {
  // Scatter form; serial because output pixels share source taps.
  std::vector<Tap> xs(ow);
  for (int ox = 0; ox < ow; ++ox) xs[ox] = SourceTap(ox, w, ow);
  for (int oy = 0; oy < oh; ++oy) {
    const Tap ty = SourceTap(oy, h, oh);
    for (int ox = 0; ox < ow; ++ox) {
      const Tap& tx = xs[ox];
      const double* g = dy.data() + (static_cast<Index>(oy) * ow + ox) * c;
      double* a = dx.data() + (static_cast<Index>(ty.i0) * w + tx.i0) * c;
      double* b = dx.data() + (static_cast<Index>(ty.i0) * w + tx.i1) * c;
      double* d = dx.data() + (static_cast<Index>(ty.i1) * w + tx.i0) * c;
      double* e = dx.data() + (static_cast<Index>(ty.i1) * w + tx.i1) * c;
      const double wa = ty.l0 * tx.l0, wb = ty.l0 * tx.l1;
      const double wd = ty.l1 * tx.l0, we = ty.l1 * tx.l1;
      for (int ch = 0; ch < c; ++ch) {
        a[ch] += wa * g[ch];
        b[ch] += wb * g[ch];
        d[ch] += wd * g[ch];
        e[ch] += we * g[ch];
      }
    }
  }
}

void LayerNorm(CSpan x, int tokens, int c, CSpan gain, CSpan bias, double eps,
               MSpan y, MSpan xhat, MSpan inv_std) {
#pragma omp parallel for schedule(static)
  for (Index t = 0; t < tokens; ++t) {
    const double* xt = x.data() + t * c;
    double mean = 0.0;
    for (int i = 0; i < c; ++i) mean += xt[i];
    mean /= c;
    double var = 0.0;
    for (int i = 0; i < c; ++i) var += (xt[i] - mean) * (xt[i] - mean);
    var /= c;
    const double r = 1.0 / std::sqrt(var + eps);
    if (!inv_std.empty()) inv_std[t] = r;
    double* yt = y.data() + t * c;
    for (int i = 0; i < c; ++i) {
      const double xh = (xt[i] - mean) * r;
      if (!xhat.empty()) xhat[t * c + i] = xh;
      yt[i] = xh * gain[i] + bias[i];
    }
  }
}

void LayerNormBackward(CSpan dy, CSpan xhat, CSpan inv_std, int tokens, int c,
                       CSpan gain, MSpan dx, MSpan dgain, MSpan dbias) {
#pragma omp parallel for schedule(static)
  for (Index t = 0; t < tokens; ++t) {
    const double* g = dy.data() + t * c;
    const double* xh = xhat.data() + t * c;
    double mean_g = 0.0, mean_gx = 0.0;
    for (int i = 0; i < c; ++i) {
      const double gi = g[i] * gain[i];
      mean_g += gi;
      mean_gx += gi * xh[i];
    }
    mean_g /= c;
    mean_gx /= c;
    double* d = dx.data() + t * c;
    for (int i = 0; i < c; ++i) {
      d[i] = inv_std[t] * (g[i] * gain[i] - mean_g - xh[i] * mean_gx);
    }
  }
  for (Index t = 0; t < tokens; ++t) {
    for (int i = 0; i < c; ++i) {
      dgain[i] += dy[t * c + i] * xhat[t * c + i];
      dbias[i] += dy[t * c + i];
    }
  }
}

void Attention(CSpan q, CSpan k, CSpan v, int tq, int tk, int c, int heads,
               MSpan out, MSpan probs) {
  const int dh = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  // Keys transposed to [c, tk] so the score loop runs over contiguous keys.
  std::vector<double> kt(static_cast<std::size_t>(c) * tk);
  for (int j = 0; j < tk; ++j) {
    for (int ch = 0; ch < c; ++ch) kt[static_cast<Index>(ch) * tk + j] = k[static_cast<Index>(j) * c + ch];
  }
  const Index rows = static_cast<Index>(heads) * tq;
#pragma omp parallel
  {
    std::vector<double> scratch(tk);
#pragma omp for schedule(static)
    for (Index r = 0; r < rows; ++r) {
      const int h = static_cast<int>(r / tq);
      const Index i = r % tq;
      double* s = probs.empty() ? scratch.data() : probs.data() + r * tk;
      std::fill(s, s + tk, 0.0);
      const double* qi = q.data() + i * c + h * dh;
      for (int d = 0; d < dh; ++d) {
        const double qd = qi[d];
        const double* kd = kt.data() + static_cast<Index>(h * dh + d) * tk;
        for (int j = 0; j < tk; ++j) s[j] += qd * kd[j];
      }
      double smax = -INFINITY;
      for (int j = 0; j < tk; ++j) {
        s[j] *= scale;
        smax = std::max(smax, s[j]);
      }
      double sum = 0.0;
      for (int j = 0; j < tk; ++j) {
        s[j] = std::exp(s[j] - smax);
        sum += s[j];
      }
      for (int j = 0; j < tk; ++j) s[j] /= sum;
      double* oi = out.data() + i * c + h * dh;
      std::fill(oi, oi + dh, 0.0);
      for (int j = 0; j < tk; ++j) {
        const double p = s[j];
        const double* vj = v.data() + static_cast<Index>(j) * c + h * dh;
        for (int d = 0; d < dh; ++d) oi[d] += p * vj[d];
      }
    }
  }
}

void AttentionBackward(CSpan q, CSpan k, CSpan v, CSpan probs, CSpan dout,
                       int tq, int tk, int c, int heads, MSpan dq, MSpan dk,
                       MSpan dv) {
  const int dh = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Index rows = static_cast<Index>(heads) * tq;
  std::vector<double> ds(static_cast<std::size_t>(rows) * tk);
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < rows; ++r) {
    const int h = static_cast<int>(r / tq);
    const Index i = r % tq;
    const double* p = probs.data() + r * tk;
    const double* go = dout.data() + i * c + h * dh;
    double* dsr = ds.data() + r * tk;
    double dot = 0.0;
    for (int j = 0; j < tk; ++j) {
      const double* vj = v.data() + static_cast<Index>(j) * c + h * dh;
      double dp = 0.0;
      for (int d = 0; d < dh; ++d) dp += go[d] * vj[d];
      dsr[j] = dp;
      dot += dp * p[j];
    }
    double* dqi = dq.data() + i * c + h * dh;
    std::fill(dqi, dqi + dh, 0.0);
    for (int j = 0; j < tk; ++j) {
      dsr[j] = p[j] * (dsr[j] - dot) * scale;
      const double* kj = k.data() + static_cast<Index>(j) * c + h * dh;
      for (int d = 0; d < dh; ++d) dqi[d] += dsr[j] * kj[d];
    }
  }
  const Index cols = static_cast<Index>(heads) * tk;
#pragma omp parallel for schedule(static)
  for (Index r = 0; r < cols; ++r) {
    const int h = static_cast<int>(r / tk);
    const Index j = r % tk;
    double* dkj = dk.data() + j * c + h * dh;
    double* dvj = dv.data() + j * c + h * dh;
    std::fill(dkj, dkj + dh, 0.0);
    std::fill(dvj, dvj + dh, 0.0);
    for (Index i = 0; i < tq; ++i) {
      const Index row = static_cast<Index>(h) * tq + i;
      const double p = probs[row * tk + j];
      const double g = ds[row * tk + j];
      const double* go = dout.data() + i * c + h * dh;
      const double* qi = q.data() + i * c + h * dh;
      for (int d = 0; d < dh; ++d) {
        dvj[d] += p * go[d];
        dkj[d] += g * qi[d];
      }
    }
  }
}

void Gelu(CSpan x, MSpan y) {
  const Index n = static_cast<Index>(x.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
  }
}

void GeluBackward(CSpan x, CSpan dy, MSpan dx) {
  const Index n = static_cast<Index>(x.size());
  const double inv_sqrt_2pi = std::numbers::inv_sqrtpi / std::numbers::sqrt2;
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < n; ++i) {
    const double cdf = 0.5 * (1.0 + std::erf(x[i] * std::numbers::sqrt2 / 2.0));
    const double pdf = inv_sqrt_2pi * std::exp(-0.5 * x[i] * x[i]);
    dx[i] = dy[i] * (cdf + x[i] * pdf);
  }
}

}  // namespace rareseg::kernels
