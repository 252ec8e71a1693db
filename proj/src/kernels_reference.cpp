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
#include <vector>

#include "rareseg/kernels.hpp"

// Straightforward serial versions of the kernels. Kept as the baseline the
// OpenMP kernels are tested and benchmarked against.

namespace rareseg::kernels::reference {

void LinearForward(CSpan x, int tokens, int in, CSpan w, CSpan b, int out,
                   MSpan y) {
  for (int t = 0; t < tokens; ++t) {
    for (int o = 0; o < out; ++o) {
      double s = b.empty() ? 0.0 : b[o];
      for (int i = 0; i < in; ++i) s += x[t * in + i] * w[i * out + o];
      y[t * out + o] = s;
    }
  }
}

void LinearBackward(CSpan x, int tokens, int in, CSpan w, int out, CSpan dy,
                    MSpan dx, MSpan dw, MSpan db) {
  for (int t = 0; t < tokens; ++t) {
    for (int i = 0; i < in; ++i) {
      if (!dx.empty()) {
        double s = 0.0;
        for (int o = 0; o < out; ++o) s += dy[t * out + o] * w[i * out + o];
        dx[t * in + i] = s;
      }
      for (int o = 0; o < out; ++o) {
        dw[i * out + o] += x[t * in + i] * dy[t * out + o];
      }
    }
    if (!db.empty()) {
      for (int o = 0; o < out; ++o) db[o] += dy[t * out + o];
    }
  }
}

void Im2Col(CSpan x, int h, int w, int c, int k, int stride, int pad, int oh,
            int ow, MSpan cols) {
  int idx = 0;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const int iy = oy * stride - pad + ky;
          const int ix = ox * stride - pad + kx;
          const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
          for (int ch = 0; ch < c; ++ch) {
            cols[idx++] = inside ? x[(iy * w + ix) * c + ch] : 0.0;
          }
        }
      }
    }
  }
}

void Col2Im(CSpan cols, int h, int w, int c, int k, int stride, int pad,
            int oh, int ow, MSpan dx) {
  int idx = 0;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      for (int ky = 0; ky < k; ++ky) {
        for (int kx = 0; kx < k; ++kx) {
          const int iy = oy * stride - pad + ky;
          const int ix = ox * stride - pad + kx;
          const bool inside = iy >= 0 && iy < h && ix >= 0 && ix < w;
          for (int ch = 0; ch < c; ++ch, ++idx) {
            if (inside) dx[(iy * w + ix) * c + ch] += cols[idx];
          }
        }
      }
    }
  }
}

void DepthwiseConv3x3(CSpan x, int h, int w, int c, CSpan weight, CSpan bias,
                      MSpan y) {
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        double s = bias[ch];
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy + ky - 1, ix = ox + kx - 1;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            s += x[(iy * w + ix) * c + ch] * weight[(ky * 3 + kx) * c + ch];
          }
        }
        y[(oy * w + ox) * c + ch] = s;
      }
    }
  }
}

void DepthwiseConv3x3Backward(CSpan x, int h, int w, int c, CSpan weight,
                              CSpan dy, MSpan dx, MSpan dweight, MSpan dbias) {
  for (auto& v : dx) v = 0.0;
  for (int oy = 0; oy < h; ++oy) {
    for (int ox = 0; ox < w; ++ox) {
      for (int ch = 0; ch < c; ++ch) {
        const double g = dy[(oy * w + ox) * c + ch];
        dbias[ch] += g;
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const int iy = oy + ky - 1, ix = ox + kx - 1;
            if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
            const int tap = (ky * 3 + kx) * c + ch;
            dx[(iy * w + ix) * c + ch] += g * weight[tap];
            dweight[tap] += g * x[(iy * w + ix) * c + ch];
          }
        }
      }
    }
  }
}

void ResizeBilinear(CSpan x, int h, int w, int c, int oh, int ow, MSpan y) {
  for (int oy = 0; oy < oh; ++oy) {
    double sy = (oy + 0.5) * h / oh - 0.5;
    if (sy < 0) sy = 0;
    const int y0 = std::min(static_cast<int>(std::floor(sy)), h - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - y0;
    for (int ox = 0; ox < ow; ++ox) {
      double sx = (ox + 0.5) * w / ow - 0.5;
      if (sx < 0) sx = 0;
      const int x0 = std::min(static_cast<int>(std::floor(sx)), w - 1);
      const int x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - x0;
      for (int ch = 0; ch < c; ++ch) {
        const double top = (1 - fx) * x[(y0 * w + x0) * c + ch] +
                           fx * x[(y0 * w + x1) * c + ch];
        const double bot = (1 - fx) * x[(y1 * w + x0) * c + ch] +
                           fx * x[(y1 * w + x1) * c + ch];
        y[(oy * ow + ox) * c + ch] = (1 - fy) * top + fy * bot;
      }
    }
  }
}

void Attention(CSpan q, CSpan k, CSpan v, int tq, int tk, int c, int heads,
               MSpan out, MSpan probs) {
  const int dh = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> s(tk);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < tq; ++i) {
      double smax = -INFINITY;
      for (int j = 0; j < tk; ++j) {
        double dot = 0.0;
        for (int d = 0; d < dh; ++d) {
          dot += q[i * c + h * dh + d] * k[j * c + h * dh + d];
        }
        s[j] = dot * scale;
        smax = std::max(smax, s[j]);
      }
      double sum = 0.0;
      for (int j = 0; j < tk; ++j) sum += std::exp(s[j] - smax);
      for (int j = 0; j < tk; ++j) s[j] = std::exp(s[j] - smax) / sum;
      if (!probs.empty()) {
        for (int j = 0; j < tk; ++j) probs[(h * tq + i) * tk + j] = s[j];
      }
      for (int d = 0; d < dh; ++d) {
        double acc = 0.0;
        for (int j = 0; j < tk; ++j) acc += s[j] * v[j * c + h * dh + d];
        out[i * c + h * dh + d] = acc;
      }
    }
  }
}

void AttentionBackward(CSpan q, CSpan k, CSpan v, CSpan probs, CSpan dout,
                       int tq, int tk, int c, int heads, MSpan dq, MSpan dk,
                       MSpan dv) {
  const int dh = c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  for (auto& e : dq) e = 0.0;
  for (auto& e : dk) e = 0.0;
  for (auto& e : dv) e = 0.0;
  std::vector<double> dp(tk);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < tq; ++i) {
      const double* p = probs.data() + (h * tq + i) * tk;
      double dot = 0.0;
      for (int j = 0; j < tk; ++j) {
        double acc = 0.0;
        for (int d = 0; d < dh; ++d) {
          acc += dout[i * c + h * dh + d] * v[j * c + h * dh + d];
          dv[j * c + h * dh + d] += p[j] * dout[i * c + h * dh + d];
        }
        dp[j] = acc;
        dot += acc * p[j];
      }
      for (int j = 0; j < tk; ++j) {
        const double ds = p[j] * (dp[j] - dot) * scale;
        for (int d = 0; d < dh; ++d) {
          dq[i * c + h * dh + d] += ds * k[j * c + h * dh + d];
          dk[j * c + h * dh + d] += ds * q[i * c + h * dh + d];
        }
      }
    }
  }
}

}  // namespace rareseg::kernels::reference
