/*
 * Copyright 2026 The MO-CTranS Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "moctrans/autodiff/tape.hpp"
#include "moctrans/autodiff/tensor.hpp"

// Differentiable primitives. Every op validates its operand shapes, records
// its output on the operands' tape and installs an exact backward rule.
// Instantiated for float (training) and double (gradient checking).

namespace moct::ad {

enum class Mode { Train, Eval };

// Cross-correlation with zero padding. x [N,Cin,H,W], w [Cout,Cin,kh,kw],
// b [Cout]. Kernel sides must be odd.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 1, int padding = 0);

struct BatchNormOptions {
  Mode mode = Mode::Train;
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel batch normalization over (N, H, W). Train mode normalizes with
// batch statistics and updates the running buffers (unbiased variance), eval
// mode normalizes with the running buffers.
template <typename T>
Var<T> batchnorm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                   Tensor<T>& running_var, const BatchNormOptions& options);

// Subgradient 0 at 0.
template <typename T>
Var<T> relu(const Var<T>& x);
template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& x, T factor);
// Adds `b` to every trailing block of `x`; shape(b) must be a suffix of shape(x).
template <typename T>
Var<T> broadcast_add(const Var<T>& x, const Var<T>& b);
template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);

// Non-overlapping 2x2 max. Ties route the gradient to the first position in
// row-major order within the window.
template <typename T>
Var<T> maxpool2d(const Var<T>& x);

// Affine map along the trailing axis: y = x w^T + b, w [dout, din].
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b);
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w);

// Max-subtracted exponential normalization along `axis` (negative counts from the end).
template <typename T>
Var<T> softmax(const Var<T>& x, int axis);

// Per-row normalization over the trailing axis with learned affine terms.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps = 1e-5);

// Full-width projections; head h uses columns [h*d/heads, (h+1)*d/heads).
template <typename T>
struct AttentionWeights {
  Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

// Scaled dot-product self-attention over x [..., n, d].
template <typename T>
Var<T> multihead_attention(const Var<T>& x, const AttentionWeights<T>& weights, int heads);

// [N,C,H,W] -> [N,(H/p)(W/p),p*p*C]. Patches are taken in row-major order
// over the patch grid; inside a token values are ordered (row, column,
// channel) with channels fastest.
template <typename T>
Var<T> patch_partition(const Var<T>& x, int patch);
// Inverse of patch_partition.
template <typename T>
Var<T> patch_merge(const Var<T>& tokens, int patch, int channels, int height, int width);

// Token-sequence helpers over [N, rows, d].
template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b);
// Adds rows [N,k,d] into rows [0,k) of seq [N,n,d]; rows >= k pass through untouched.
template <typename T>
Var<T> add_rows(const Var<T>& seq, const Var<T>& rows);
template <typename T>
Var<T> slice_rows(const Var<T>& seq, int begin, int count);

}  // namespace moct::ad
