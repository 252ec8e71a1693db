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
#ifndef RARESEG_KERNELS_HPP_
#define RARESEG_KERNELS_HPP_

#include <span>

// Dense numeric kernels used by the model. Feature maps are token-major
// (HWC): element (t, c) of a T x C map lives at t * C + c. Linear weights are
// stored [in, out].
//
// `rareseg::kernels` holds the OpenMP versions. Every parallel loop
// partitions the *outputs* across threads and each output is accumulated in a
// fixed order, so results do not depend on the thread count.
// `rareseg::kernels::reference` holds plain serial loops written for
// readability; tests and benchmarks compare the two.

namespace rareseg::kernels {

using CSpan = std::span<const double>;
using MSpan = std::span<double>;

// y[t,o] = b[o] + sum_i x[t,i] * w[i,o]
void LinearForward(CSpan x, int tokens, int in, CSpan w, CSpan b, int out,
                   MSpan y);
// dx = dy w^T (overwritten; skipped if empty), dw += x^T dy, db += sum_t dy.
void LinearBackward(CSpan x, int tokens, int in, CSpan w, int out, CSpan dy,
                    MSpan dx, MSpan dw, MSpan db);

// Patch matrix for a k x k convolution: row per output position, columns
// ordered (ky, kx, channel). Out-of-bounds taps read zero.
void Im2Col(CSpan x, int h, int w, int c, int k, int stride, int pad, int oh,
            int ow, MSpan cols);
// Adjoint of Im2Col; accumulates into dx.
void Col2Im(CSpan cols, int h, int w, int c, int k, int stride, int pad,
            int oh, int ow, MSpan dx);

// 3x3 depthwise convolution, stride 1, zero padding 1. weight is [9, c].
void DepthwiseConv3x3(CSpan x, int h, int w, int c, CSpan weight, CSpan bias,
                      MSpan y);
// dx overwritten; dweight and dbias accumulated.
void DepthwiseConv3x3Backward(CSpan x, int h, int w, int c, CSpan weight,
                              CSpan dy, MSpan dx, MSpan dweight, MSpan dbias);

// Bilinear resize with half-pixel centers (corners not aligned).
void ResizeBilinear(CSpan x, int h, int w, int c, int oh, int ow, MSpan y);
// Adjoint of ResizeBilinear; accumulates into dx.
void ResizeBilinearBackward(CSpan dy, int oh, int ow, int h, int w, int c,
                            MSpan dx);

// Per-token layer normalization. xhat and inv_std are saved for backward.
void LayerNorm(CSpan x, int tokens, int c, CSpan gain, CSpan bias, double eps,
               MSpan y, MSpan xhat, MSpan inv_std);
// dx overwritten; dgain and dbias accumulated.
void LayerNormBackward(CSpan dy, CSpan xhat, CSpan inv_std, int tokens, int c,
                       CSpan gain, MSpan dx, MSpan dgain, MSpan dbias);

// Multi-head scaled dot-product attention. q is [tq, c], k and v are
// [tk, c]; head h owns channels [h*c/heads, (h+1)*c/heads). `probs`, when
// non-empty, receives the [heads, tq, tk] attention weights.
void Attention(CSpan q, CSpan k, CSpan v, int tq, int tk, int c, int heads,
               MSpan out, MSpan probs);
// dq, dk, dv overwritten.
void AttentionBackward(CSpan q, CSpan k, CSpan v, CSpan probs, CSpan dout,
                       int tq, int tk, int c, int heads, MSpan dq, MSpan dk,
                       MSpan dv);

void Gelu(CSpan x, MSpan y);
// dx = dy * gelu'(x), overwritten.
void GeluBackward(CSpan x, CSpan dy, MSpan dx);

namespace reference {

void LinearForward(CSpan x, int tokens, int in, CSpan w, CSpan b, int out,
                   MSpan y);
void LinearBackward(CSpan x, int tokens, int in, CSpan w, int out, CSpan dy,
                    MSpan dx, MSpan dw, MSpan db);
void Im2Col(CSpan x, int h, int w, int c, int k, int stride, int pad, int oh,
            int ow, MSpan cols);
void Col2Im(CSpan cols, int h, int w, int c, int k, int stride, int pad,
            int oh, int ow, MSpan dx);
void DepthwiseConv3x3(CSpan x, int h, int w, int c, CSpan weight, CSpan bias,
                      MSpan y);
void DepthwiseConv3x3Backward(CSpan x, int h, int w, int c, CSpan weight,
                              CSpan dy, MSpan dx, MSpan dweight, MSpan dbias);
void ResizeBilinear(CSpan x, int h, int w, int c, int oh, int ow, MSpan y);
void Attention(CSpan q, CSpan k, CSpan v, int tq, int tk, int c, int heads,
               MSpan out, MSpan probs);
void AttentionBackward(CSpan q, CSpan k, CSpan v, CSpan probs, CSpan dout,
                       int tq, int tk, int c, int heads, MSpan dq, MSpan dk,
                       MSpan dv);

}  // namespace reference

// Number of OpenMP threads kernels will use (1 when built without OpenMP).
int MaxThreads();
void SetThreads(int n);

}  // namespace rareseg::kernels

#endif  // RARESEG_KERNELS_HPP_
