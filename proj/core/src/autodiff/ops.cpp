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

#include "moctrans/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace moct::ad {
namespace {

template <typename T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapR = Eigen::Map<MatR<T>>;
template <typename T>
using CMapR = Eigen::Map<const MatR<T>>;
template <typename T>
using CVec = Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>>;
template <typename T>
using Vec = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;
using Stride = Eigen::OuterStride<>;

// Fixed-order reductions. Eigen's vectorized sums peel by buffer address,
// so their rounding would vary between otherwise identical runs.
template <typename T>
void add_row_sums(const T* m, Eigen::Index rows, Eigen::Index cols, T* out) {
  for (Eigen::Index r = 0; r < rows; ++r) {
    T acc = 0;
    for (Eigen::Index c = 0; c < cols; ++c) acc += m[r * cols + c];
    out[r] += acc;
  }
}

template <typename T>
void add_col_sums(const T* m, Eigen::Index rows, Eigen::Index cols, T* out) {
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) out[c] += m[r * cols + c];
}

template <typename T>
Tape<T>& tape_of(const Var<T>& a) {
  if (!a.valid()) throw ShapeError("operand is not recorded on a tape");
  return *a.tape();
}

template <typename T>
Tape<T>& tape_of(const Var<T>& a, const Var<T>& b) {
  Tape<T>& t = tape_of(a);
  if (b.tape() != &t) throw ShapeError("operands are recorded on different tapes");
  return t;
}

std::string shape_pair(const char* op, const Shape& a, const Shape& b) {
  return std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ShapeError(message);
}

// Unfolds one image [Cin,H,W] into columns [Cin*kh*kw, Ho*Wo].
template <typename T>
void im2col(const T* img, int cin, int h, int w, int kh, int kw, int stride, int pad, int ho, int wo, T* col) {
  for (int c = 0; c < cin; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        T* row = col + (static_cast<std::size_t>((c * kh + i) * kw + j) * ho * wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int y = oy * stride + i - pad;
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          if (y < 0 || y >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* src = img + (static_cast<std::size_t>(c) * h + y) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int x = ox * stride + j - pad;
            dst[ox] = (x >= 0 && x < w) ? src[x] : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* col, int cin, int h, int w, int kh, int kw, int stride, int pad, int ho, int wo, T* img) {
  for (int c = 0; c < cin; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const T* row = col + (static_cast<std::size_t>((c * kh + i) * kw + j) * ho * wo);
        for (int oy = 0; oy < ho; ++oy) {
          const int y = oy * stride + i - pad;
          if (y < 0 || y >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* dst = img + (static_cast<std::size_t>(c) * h + y) * w;
          for (int ox = 0; ox < wo; ++ox) {
            const int x = ox * stride + j - pad;
            if (x >= 0 && x < w) dst[x] += src[ox];
          }
        }
      }
    }
  }
}

struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  const int rank = static_cast<int>(shape.size());
  if (axis < 0) axis += rank;
  require(axis >= 0 && axis < rank, "softmax: axis out of range for shape " + to_string(shape));
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[static_cast<std::size_t>(i)];
  s.len = shape[static_cast<std::size_t>(axis)];
  for (int i = axis + 1; i < rank; ++i) s.inner *= shape[static_cast<std::size_t>(i)];
  return s;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return "constant";
    case OpKind::Input: return "input";
    case OpKind::Parameter: return "parameter";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::BatchNorm2d: return "batchnorm2d";
    case OpKind::Relu: return "relu";
    case OpKind::Add: return "add";
    case OpKind::BroadcastAdd: return "broadcast_add";
    case OpKind::Mul: return "mul";
    case OpKind::Scale: return "scale";
    case OpKind::Sum: return "sum";
    case OpKind::MaxPool2d: return "maxpool2d";
    case OpKind::Linear: return "linear";
    case OpKind::Softmax: return "softmax";
    case OpKind::LayerNorm: return "layer_norm";
    case OpKind::Attention: return "multihead_attention";
    case OpKind::PatchPartition: return "patch_partition";
    case OpKind::PatchMerge: return "patch_merge";
    case OpKind::ConcatRows: return "concat_rows";
    case OpKind::AddRows: return "add_rows";
    case OpKind::SliceRows: return "slice_rows";
    case OpKind::CrossEntropy: return "cross_entropy";
    case OpKind::SoftDice: return "soft_dice";
    case OpKind::WeightedMean: return "weighted_mean";
    case OpKind::Custom: return "custom";
  }
  return "unknown";
}

// ---------------------------------------------------------------- conv2d

template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride, int padding) {
  Tape<T>& tape = tape_of(x, w);
  tape_of(x, b);
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  require(xs.size() == 4, "conv2d: input must be [N,Cin,H,W], got " + to_string(xs));
  require(ws.size() == 4, "conv2d: weight must be [Cout,Cin,kh,kw], got " + to_string(ws));
  require(xs[1] == ws[1], "conv2d: input has Cin=" + std::to_string(xs[1]) + " but weight expects Cin=" +
                              std::to_string(ws[1]) + " (input " + to_string(xs) + ", weight " + to_string(ws) + ")");
  require(b.shape() == Shape{ws[0]}, shape_pair("conv2d bias", b.shape(), Shape{ws[0]}));
  require(ws[2] % 2 == 1 && ws[3] % 2 == 1, "conv2d: kernel sides must be odd, got " + to_string(ws));
  require(stride >= 1 && padding >= 0, "conv2d: stride must be >= 1 and padding >= 0");

  const int n = static_cast<int>(xs[0]), cin = static_cast<int>(xs[1]);
  const int h = static_cast<int>(xs[2]), wd = static_cast<int>(xs[3]);
  const int cout = static_cast<int>(ws[0]), kh = static_cast<int>(ws[2]), kw = static_cast<int>(ws[3]);
  const int span_h = h + 2 * padding - kh, span_w = wd + 2 * padding - kw;
  require(span_h >= 0 && span_w >= 0 && span_h % stride == 0 && span_w % stride == 0,
          "conv2d: output size is not a positive integer for input " + to_string(xs) + ", kernel " +
              to_string(ws) + ", stride " + std::to_string(stride) + ", padding " + std::to_string(padding));
  const int ho = span_h / stride + 1, wo = span_w / stride + 1;
  const int k = cin * kh * kw;
  const std::size_t hw_out = static_cast<std::size_t>(ho) * wo;
  const bool pointwise = kh == 1 && kw == 1 && stride == 1 && padding == 0;

  Tensor<T> out(Shape{xs[0], ws[0], static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)});
  {
    const Tensor<T>& xv = x.value();
    CMapR<T> wm(w.value().data.data(), cout, k);
    std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(k) * hw_out);
    for (int s = 0; s < n; ++s) {
      const T* img = xv.data.data() + static_cast<std::size_t>(s) * cin * h * wd;
      const T* cp = img;
      if (!pointwise) {
        im2col(img, cin, h, wd, kh, kw, stride, padding, ho, wo, col.data());
        cp = col.data();
      }
      MapR<T> om(out.data.data() + static_cast<std::size_t>(s) * cout * hw_out, cout, static_cast<Eigen::Index>(hw_out));
      om.noalias() = wm * CMapR<T>(cp, k, static_cast<Eigen::Index>(hw_out));
      om.colwise() += CVec<T>(b.value().data.data(), cout);
    }
  }

  const int xi = x.id(), wi = w.id(), bi = b.id();
  return tape.record(OpKind::Conv2d, {xi, wi, bi}, std::move(out),
                     [=](Tape<T>& t, std::span<const T> g) {
                       const Tensor<T>& xv = t.value(xi);
                       CMapR<T> wm(t.value(wi).data.data(), cout, k);
                       std::span<T> gx = t.grad_buffer(xi);
                       std::span<T> gw = t.grad_buffer(wi);
                       std::span<T> gb = t.grad_buffer(bi);
                       std::vector<T> col(pointwise ? 0 : static_cast<std::size_t>(k) * hw_out);
                       std::vector<T> dcol(pointwise || gx.empty() ? 0 : static_cast<std::size_t>(k) * hw_out);
                       for (int s = 0; s < n; ++s) {
                         CMapR<T> gm(g.data() + static_cast<std::size_t>(s) * cout * hw_out, cout,
                                     static_cast<Eigen::Index>(hw_out));
                         const T* img = xv.data.data() + static_cast<std::size_t>(s) * cin * h * wd;
                         if (!gb.empty()) add_row_sums(gm.data(), gm.rows(), gm.cols(), gb.data());
                         if (!gw.empty()) {
                           const T* cp = img;
                           if (!pointwise) {
                             im2col(img, cin, h, wd, kh, kw, stride, padding, ho, wo, col.data());
                             cp = col.data();
                           }
                           MapR<T>(gw.data(), cout, k).noalias() +=
                               gm * CMapR<T>(cp, k, static_cast<Eigen::Index>(hw_out)).transpose();
                         }
                         if (!gx.empty()) {
                           T* gimg = gx.data() + static_cast<std::size_t>(s) * cin * h * wd;
                           if (pointwise) {
                             MapR<T>(gimg, k, static_cast<Eigen::Index>(hw_out)).noalias() += wm.transpose() * gm;
                           } else {
                             MapR<T>(dcol.data(), k, static_cast<Eigen::Index>(hw_out)).noalias() = wm.transpose() * gm;
                             col2im(dcol.data(), cin, h, wd, kh, kw, stride, padding, ho, wo, gimg);
                           }
                         }
                       }
                     });
}

// ----------------------------------------------------------- batchnorm2d

template <typename T>
Var<T> batchnorm2d(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, Tensor<T>& running_mean,
                   Tensor<T>& running_var, const BatchNormOptions& options) {
  Tape<T>& tape = tape_of(x, gamma);
  tape_of(x, beta);
  if (!(options.eps > 0)) throw ShapeError("batchnorm2d: eps must be > 0, got " + std::to_string(options.eps));
  const Shape& xs = x.shape();
  require(xs.size() == 4, "batchnorm2d: input must be [N,C,H,W], got " + to_string(xs));
  const std::size_t n = xs[0], c = xs[1], hw = xs[2] * xs[3];
  const Shape cs{c};
  require(gamma.shape() == cs, shape_pair("batchnorm2d gamma", gamma.shape(), cs));
  require(beta.shape() == cs, shape_pair("batchnorm2d beta", beta.shape(), cs));
  require(running_mean.shape == cs && running_var.shape == cs, "batchnorm2d: running statistics must have shape " + to_string(cs));
  const bool train = options.mode == Mode::Train;
  const std::size_t count = n * hw;
  if (train) require(count >= 2, "batchnorm2d: train mode needs N*H*W >= 2 per channel, got " + std::to_string(count));

  const Tensor<T>& xv = x.value();
  std::vector<T> mu(c), inv_std(c);
  for (std::size_t ch = 0; ch < c; ++ch) {
    if (train) {
      double s = 0, ss = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = xv.data.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) s += p[j];
      }
      const double m = s / static_cast<double>(count);
      for (std::size_t i = 0; i < n; ++i) {
        const T* p = xv.data.data() + (i * c + ch) * hw;
        for (std::size_t j = 0; j < hw; ++j) {
          const double d = p[j] - m;
          ss += d * d;
        }
      }
      const double var = ss / static_cast<double>(count);
      mu[ch] = static_cast<T>(m);
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + options.eps));
      const double unbiased = ss / static_cast<double>(count - 1);
      running_mean[ch] = static_cast<T>((1 - options.momentum) * running_mean[ch] + options.momentum * m);
      running_var[ch] = static_cast<T>((1 - options.momentum) * running_var[ch] + options.momentum * unbiased);
    } else {
      mu[ch] = running_mean[ch];
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var[ch]) + options.eps));
    }
  }

  Tensor<T> out(xs);
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T* p = xv.data.data() + (i * c + ch) * hw;
      T* o = out.data.data() + (i * c + ch) * hw;
      const T a = gv[ch] * inv_std[ch];
      const T off = bv[ch] - a * mu[ch];
      for (std::size_t j = 0; j < hw; ++j) o[j] = a * p[j] + off;
    }
  }

  const int xi = x.id(), gi = gamma.id(), bi = beta.id();
  return tape.record(OpKind::BatchNorm2d, {xi, gi, bi}, std::move(out),
                     [=, mu = std::move(mu), inv_std = std::move(inv_std)](Tape<T>& t, std::span<const T> g) {
                       const Tensor<T>& xv = t.value(xi);
                       const Tensor<T>& gv = t.value(gi);
                       std::span<T> gx = t.grad_buffer(xi);
                       std::span<T> gg = t.grad_buffer(gi);
                       std::span<T> gb = t.grad_buffer(bi);
                       for (std::size_t ch = 0; ch < c; ++ch) {
                         double sum_g = 0, sum_gx = 0;
                         for (std::size_t i = 0; i < n; ++i) {
                           const T* p = xv.data.data() + (i * c + ch) * hw;
                           const T* gp = g.data() + (i * c + ch) * hw;
                           for (std::size_t j = 0; j < hw; ++j) {
                             sum_g += gp[j];
                             sum_gx += gp[j] * (p[j] - mu[ch]) * inv_std[ch];
                           }
                         }
                         if (!gg.empty()) gg[ch] += static_cast<T>(sum_gx);
                         if (!gb.empty()) gb[ch] += static_cast<T>(sum_g);
                         if (gx.empty()) continue;
                         const T a = gv[ch] * inv_std[ch];
                         if (!train) {
                           for (std::size_t i = 0; i < n; ++i) {
                             const T* gp = g.data() + (i * c + ch) * hw;
                             T* dx = gx.data() + (i * c + ch) * hw;
                             for (std::size_t j = 0; j < hw; ++j) dx[j] += a * gp[j];
                           }
                           continue;
                         }
                         const T mg = static_cast<T>(sum_g / static_cast<double>(count));
                         const T mgx = static_cast<T>(sum_gx / static_cast<double>(count));
                         for (std::size_t i = 0; i < n; ++i) {
                           const T* p = xv.data.data() + (i * c + ch) * hw;
                           const T* gp = g.data() + (i * c + ch) * hw;
                           T* dx = gx.data() + (i * c + ch) * hw;
                           for (std::size_t j = 0; j < hw; ++j) {
                             const T xhat = (p[j] - mu[ch]) * inv_std[ch];
                             dx[j] += a * (gp[j] - mg - xhat * mgx);
                           }
                         }
                       }
                     });
}

// ----------------------------------------------------------- elementwise

template <typename T>
Var<T> relu(const Var<T>& x) {
  Tape<T>& tape = tape_of(x);
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < xv.size(); ++i) out.data[i] = xv[i] > T(0) ? xv[i] : T(0);
  const int xi = x.id();
  return tape.record(OpKind::Relu, {xi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    std::span<T> gx = t.grad_buffer(xi);
    const auto& xv = t.value(xi).data;
    for (std::size_t i = 0; i < gx.size(); ++i)
      if (xv[i] > T(0)) gx[i] += g[i];
  });
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of(a, b);
  require(a.shape() == b.shape(), shape_pair("add", a.shape(), b.shape()));
  Tensor<T> out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < bv.size(); ++i) out.data[i] += bv[i];
  const int ai = a.id(), bi = b.id();
  return tape.record(OpKind::Add, {ai, bi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    t.accumulate(ai, g);
    t.accumulate(bi, g);
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of(a, b);
  require(a.shape() == b.shape(), shape_pair("mul", a.shape(), b.shape()));
  Tensor<T> out = a.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < bv.size(); ++i) out.data[i] *= bv[i];
  const int ai = a.id(), bi = b.id();
  return tape.record(OpKind::Mul, {ai, bi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    const auto& av = t.value(ai).data;
    const auto& bv = t.value(bi).data;
    if (std::span<T> ga = t.grad_buffer(ai); !ga.empty())
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    if (std::span<T> gb = t.grad_buffer(bi); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
  });
}

template <typename T>
Var<T> scale(const Var<T>& x, T factor) {
  Tape<T>& tape = tape_of(x);
  Tensor<T> out = x.value();
  for (T& v : out.data) v *= factor;
  const int xi = x.id();
  return tape.record(OpKind::Scale, {xi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    std::span<T> gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * g[i];
  });
}

template <typename T>
Var<T> broadcast_add(const Var<T>& x, const Var<T>& b) {
  Tape<T>& tape = tape_of(x, b);
  const Shape& xs = x.shape();
  const Shape& bs = b.shape();
  require(bs.size() <= xs.size() && std::equal(bs.begin(), bs.end(), xs.end() - static_cast<std::ptrdiff_t>(bs.size())),
          "broadcast_add: " + to_string(bs) + " is not a suffix of " + to_string(xs));
  const std::size_t block = b.value().size();
  Tensor<T> out = x.value();
  const auto& bv = b.value().data;
  for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv[i % block];
  const int xi = x.id(), bi = b.id();
  return tape.record(OpKind::BroadcastAdd, {xi, bi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    t.accumulate(xi, g);
    if (std::span<T> gb = t.grad_buffer(bi); !gb.empty())
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % block] += g[i];
  });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  Tape<T>& tape = tape_of(x);
  double s = 0;
  for (T v : x.value().data) s += v;
  const int xi = x.id();
  return tape.record(OpKind::Sum, {xi}, Tensor<T>(Shape{1}, static_cast<T>(s)), [=](Tape<T>& t, std::span<const T> g) {
    std::span<T> gx = t.grad_buffer(xi);
    for (T& v : gx) v += g[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), static_cast<T>(1.0 / static_cast<double>(x.value().size())));
}

// --------------------------------------------------------------- maxpool

template <typename T>
Var<T> maxpool2d(const Var<T>& x) {
  Tape<T>& tape = tape_of(x);
  const Shape& xs = x.shape();
  require(xs.size() == 4, "maxpool2d: input must be [N,C,H,W], got " + to_string(xs));
  require(xs[2] % 2 == 0 && xs[3] % 2 == 0, "maxpool2d: H and W must be even, got " + to_string(xs));
  const std::size_t planes = xs[0] * xs[1], h = xs[2], w = xs[3], ho = h / 2, wo = w / 2;
  Tensor<T> out(Shape{xs[0], xs[1], ho, wo});
  std::vector<std::uint32_t> argmax(out.size());
  const auto& xv = x.value().data;
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        std::size_t best = (p * h + 2 * oy) * w + 2 * ox;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t c : cand)
          if (xv[c] > xv[best]) best = c;
        const std::size_t o = (p * ho + oy) * wo + ox;
        out.data[o] = xv[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  const int xi = x.id();
  return tape.record(OpKind::MaxPool2d, {xi}, std::move(out),
                     [=, argmax = std::move(argmax)](Tape<T>& t, std::span<const T> g) {
                       std::span<T> gx = t.grad_buffer(xi);
                       for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
                     });
}

// ---------------------------------------------------------------- linear

namespace {

template <typename T>
Var<T> linear_impl(const Var<T>& x, const Var<T>& w, const Var<T>* b) {
  Tape<T>& tape = tape_of(x, w);
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  require(!xs.empty() && ws.size() == 2, "linear: expected input [...,din] and weight [dout,din], got " + to_string(xs) +
                                             " and " + to_string(ws));
  require(xs.back() == ws[1], "linear: trailing dimension " + std::to_string(xs.back()) + " of input " + to_string(xs) +
                                  " does not match weight din " + std::to_string(ws[1]));
  const Eigen::Index din = static_cast<Eigen::Index>(ws[1]), dout = static_cast<Eigen::Index>(ws[0]);
  const Eigen::Index rows = static_cast<Eigen::Index>(x.value().size()) / din;
  if (b != nullptr) {
    tape_of(x, *b);
    require(b->shape() == Shape{ws[0]}, shape_pair("linear bias", b->shape(), Shape{ws[0]}));
  }
  Shape os = xs;
  os.back() = ws[0];
  Tensor<T> out(os);
  MapR<T> om(out.data.data(), rows, dout);
  om.noalias() = CMapR<T>(x.value().data.data(), rows, din) * CMapR<T>(w.value().data.data(), dout, din).transpose();
  if (b != nullptr) om.rowwise() += CVec<T>(b->value().data.data(), dout).transpose();

  const int xi = x.id(), wi = w.id(), bi = b != nullptr ? b->id() : -1;
  std::vector<int> inputs{xi, wi};
  if (bi >= 0) inputs.push_back(bi);
  return tape.record(OpKind::Linear, std::move(inputs), std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    CMapR<T> gm(g.data(), rows, dout);
    if (std::span<T> gx = t.grad_buffer(xi); !gx.empty())
      MapR<T>(gx.data(), rows, din).noalias() += gm * CMapR<T>(t.value(wi).data.data(), dout, din);
    if (std::span<T> gw = t.grad_buffer(wi); !gw.empty())
      MapR<T>(gw.data(), dout, din).noalias() += gm.transpose() * CMapR<T>(t.value(xi).data.data(), rows, din);
    if (bi >= 0)
      if (std::span<T> gb = t.grad_buffer(bi); !gb.empty())
        add_col_sums(gm.data(), gm.rows(), gm.cols(), gb.data());
  });
}

}  // namespace

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  return linear_impl(x, w, &b);
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w) {
  return linear_impl<T>(x, w, nullptr);
}

// --------------------------------------------------------------- softmax

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  Tape<T>& tape = tape_of(x);
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor<T> out(x.shape());
  const auto& xv = x.value().data;
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.len * s.inner + in;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t k = 0; k < s.len; ++k) mx = std::max(mx, xv[base + k * s.inner]);
      T z = 0;
      for (std::size_t k = 0; k < s.len; ++k) {
        const T e = std::exp(xv[base + k * s.inner] - mx);
        out.data[base + k * s.inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < s.len; ++k) out.data[base + k * s.inner] /= z;
    }
  }
  const int xi = x.id();
  const int yi = static_cast<int>(tape.size());
  return tape.record(OpKind::Softmax, {xi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    std::span<T> gx = t.grad_buffer(xi);
    const auto& y = t.value(yi).data;
    for (std::size_t o = 0; o < s.outer; ++o) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = o * s.len * s.inner + in;
        T dot = 0;
        for (std::size_t k = 0; k < s.len; ++k) dot += g[base + k * s.inner] * y[base + k * s.inner];
        for (std::size_t k = 0; k < s.len; ++k) {
          const std::size_t i = base + k * s.inner;
          gx[i] += y[i] * (g[i] - dot);
        }
      }
    }
  });
}

// ------------------------------------------------------------ layer_norm

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, double eps) {
  Tape<T>& tape = tape_of(x, gamma);
  tape_of(x, beta);
  const Shape& xs = x.shape();
  require(!xs.empty(), "layer_norm: scalar input");
  const std::size_t d = xs.back(), rows = x.value().size() / d;
  require(gamma.shape() == Shape{d} && beta.shape() == Shape{d},
          "layer_norm: affine terms must have shape " + to_string(Shape{d}));
  require(eps > 0, "layer_norm: eps must be > 0");
  Tensor<T> out(xs);
  std::vector<T> xhat(x.value().size()), inv_std(rows);
  const auto& xv = x.value().data;
  const auto& gv = gamma.value().data;
  const auto& bv = beta.value().data;
  for (std::size_t r = 0; r < rows; ++r) {
    const T* p = xv.data() + r * d;
    double m = 0;
    for (std::size_t j = 0; j < d; ++j) m += p[j];
    m /= static_cast<double>(d);
    double v = 0;
    for (std::size_t j = 0; j < d; ++j) v += (p[j] - m) * (p[j] - m);
    v /= static_cast<double>(d);
    const T is = static_cast<T>(1.0 / std::sqrt(v + eps));
    inv_std[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const T xh = (p[j] - static_cast<T>(m)) * is;
      xhat[r * d + j] = xh;
      out.data[r * d + j] = gv[j] * xh + bv[j];
    }
  }
  const int xi = x.id(), gi = gamma.id(), bi = beta.id();
  return tape.record(OpKind::LayerNorm, {xi, gi, bi}, std::move(out),
                     [=, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t, std::span<const T> g) {
                       const auto& gv = t.value(gi).data;
                       std::span<T> gx = t.grad_buffer(xi);
                       std::span<T> gg = t.grad_buffer(gi);
                       std::span<T> gb = t.grad_buffer(bi);
                       for (std::size_t r = 0; r < rows; ++r) {
                         const T* gp = g.data() + r * d;
                         const T* xh = xhat.data() + r * d;
                         if (!gg.empty())
                           for (std::size_t j = 0; j < d; ++j) gg[j] += gp[j] * xh[j];
                         if (!gb.empty())
                           for (std::size_t j = 0; j < d; ++j) gb[j] += gp[j];
                         if (gx.empty()) continue;
                         T s1 = 0, s2 = 0;
                         for (std::size_t j = 0; j < d; ++j) {
                           const T dxh = gp[j] * gv[j];
                           s1 += dxh;
                           s2 += dxh * xh[j];
                         }
                         s1 /= static_cast<T>(d);
                         s2 /= static_cast<T>(d);
                         T* dx = gx.data() + r * d;
                         for (std::size_t j = 0; j < d; ++j) dx[j] += inv_std[r] * (gp[j] * gv[j] - s1 - xh[j] * s2);
                       }
                     });
}

// ------------------------------------------------------------- attention

template <typename T>
Var<T> multihead_attention(const Var<T>& x, const AttentionWeights<T>& p, int heads) {
  Tape<T>& tape = tape_of(x);
  const Var<T>* all[] = {&p.wq, &p.bq, &p.wk, &p.bk, &p.wv, &p.bv, &p.wo, &p.bo};
  for (const Var<T>* v : all) tape_of(x, *v);
  const Shape& xs = x.shape();
  require(xs.size() >= 2, "multihead_attention: input must be [..., n, d], got " + to_string(xs));
  const std::size_t d = xs.back(), n = xs[xs.size() - 2];
  require(heads >= 1 && d % static_cast<std::size_t>(heads) == 0,
          "multihead_attention: token size " + std::to_string(d) + " is not divisible by " + std::to_string(heads) + " heads");
  const Shape wshape{d, d}, bshape{d};
  for (int i = 0; i < 8; ++i)
    require(all[i]->shape() == (i % 2 == 0 ? wshape : bshape),
            "multihead_attention: projection " + std::to_string(i) + " has shape " + to_string(all[i]->shape()));
  const Eigen::Index dd = static_cast<Eigen::Index>(d), nn = static_cast<Eigen::Index>(n);
  const std::size_t batch = x.value().size() / (n * d);
  const Eigen::Index rows = static_cast<Eigen::Index>(batch * n);
  const Eigen::Index dh = dd / heads;
  const T inv_sqrt = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));

  auto project = [&](const Var<T>& w, const Var<T>& b) {
    MatR<T> out = CMapR<T>(x.value().data.data(), rows, dd) * CMapR<T>(w.value().data.data(), dd, dd).transpose();
    out.rowwise() += CVec<T>(b.value().data.data(), dd).transpose();
    return out;
  };
  MatR<T> q = project(p.wq, p.bq), k = project(p.wk, p.bk), v = project(p.wv, p.bv);
  MatR<T> probs(static_cast<Eigen::Index>(batch * heads) * nn, nn);
  MatR<T> ctx(rows, dd);
  for (std::size_t s = 0; s < batch; ++s) {
    const Eigen::Index r0 = static_cast<Eigen::Index>(s) * nn;
    for (int h = 0; h < heads; ++h) {
      auto qh = q.block(r0, h * dh, nn, dh);
      auto kh = k.block(r0, h * dh, nn, dh);
      auto vh = v.block(r0, h * dh, nn, dh);
      auto ph = probs.block((static_cast<Eigen::Index>(s) * heads + h) * nn, 0, nn, nn);
      ph.noalias() = (qh * kh.transpose()) * inv_sqrt;
      for (Eigen::Index r = 0; r < nn; ++r) {
        auto row = ph.row(r);
        const T mx = row.maxCoeff();
        row = (row.array() - mx).exp();
        row /= row.sum();
      }
      ctx.block(r0, h * dh, nn, dh).noalias() = ph * vh;
    }
  }
  Tensor<T> out(xs);
  MapR<T> om(out.data.data(), rows, dd);
  om.noalias() = ctx * CMapR<T>(p.wo.value().data.data(), dd, dd).transpose();
  om.rowwise() += CVec<T>(p.bo.value().data.data(), dd).transpose();

  const int xi = x.id();
  const int ids[8] = {p.wq.id(), p.bq.id(), p.wk.id(), p.bk.id(), p.wv.id(), p.bv.id(), p.wo.id(), p.bo.id()};
  std::vector<int> inputs{xi};
  inputs.insert(inputs.end(), std::begin(ids), std::end(ids));
  return tape.record(
      OpKind::Attention, std::move(inputs), std::move(out),
      [=, q = std::move(q), k = std::move(k), v = std::move(v), probs = std::move(probs), ctx = std::move(ctx)](
          Tape<T>& t, std::span<const T> g) {
        CMapR<T> gm(g.data(), rows, dd);
        CMapR<T> wo(t.value(ids[6]).data.data(), dd, dd);
        if (std::span<T> gwo = t.grad_buffer(ids[6]); !gwo.empty()) MapR<T>(gwo.data(), dd, dd).noalias() += gm.transpose() * ctx;
        if (std::span<T> gbo = t.grad_buffer(ids[7]); !gbo.empty()) add_col_sums(gm.data(), gm.rows(), gm.cols(), gbo.data());
        const MatR<T> dctx = gm * wo;
        MatR<T> dq(rows, dd), dk(rows, dd), dv(rows, dd);
        MatR<T> dp(nn, nn);
        for (std::size_t s = 0; s < batch; ++s) {
          const Eigen::Index r0 = static_cast<Eigen::Index>(s) * nn;
          for (int h = 0; h < heads; ++h) {
            auto ph = probs.block((static_cast<Eigen::Index>(s) * heads + h) * nn, 0, nn, nn);
            auto dctx_h = dctx.block(r0, h * dh, nn, dh);
            dv.block(r0, h * dh, nn, dh).noalias() = ph.transpose() * dctx_h;
            dp.noalias() = dctx_h * v.block(r0, h * dh, nn, dh).transpose();
            for (Eigen::Index r = 0; r < nn; ++r) {
              const T dot = dp.row(r).dot(ph.row(r));
              dp.row(r) = (ph.row(r).array() * (dp.row(r).array() - dot)) * inv_sqrt;
            }
            dq.block(r0, h * dh, nn, dh).noalias() = dp * k.block(r0, h * dh, nn, dh);
            dk.block(r0, h * dh, nn, dh).noalias() = dp.transpose() * q.block(r0, h * dh, nn, dh);
          }
        }
        CMapR<T> xm(t.value(xi).data.data(), rows, dd);
        std::span<T> gx = t.grad_buffer(xi);
        const MatR<T>* grads[3] = {&dq, &dk, &dv};
        for (int j = 0; j < 3; ++j) {
          const MatR<T>& dj = *grads[j];
          if (std::span<T> gw = t.grad_buffer(ids[2 * j]); !gw.empty()) MapR<T>(gw.data(), dd, dd).noalias() += dj.transpose() * xm;
          if (std::span<T> gb = t.grad_buffer(ids[2 * j + 1]); !gb.empty()) add_col_sums(dj.data(), dj.rows(), dj.cols(), gb.data());
          if (!gx.empty()) MapR<T>(gx.data(), rows, dd).noalias() += dj * CMapR<T>(t.value(ids[2 * j]).data.data(), dd, dd);
        }
      });
}

// -------------------------------------------------------- token reshapes

namespace {

// Index map shared by partition and merge: token layout position -> map position.
std::vector<std::uint32_t> patch_index(std::size_t n, std::size_t c, std::size_t h, std::size_t w, std::size_t p) {
  const std::size_t gw = w / p, tokens = (h / p) * gw, d = p * p * c;
  std::vector<std::uint32_t> idx(n * tokens * d);
  std::size_t o = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t tk = 0; tk < tokens; ++tk) {
      const std::size_t py = tk / gw, px = tk % gw;
      for (std::size_t y = 0; y < p; ++y)
        for (std::size_t xx = 0; xx < p; ++xx)
          for (std::size_t ch = 0; ch < c; ++ch)
            idx[o++] = static_cast<std::uint32_t>(((s * c + ch) * h + py * p + y) * w + px * p + xx);
    }
  return idx;
}

}  // namespace

template <typename T>
Var<T> patch_partition(const Var<T>& x, int patch) {
  Tape<T>& tape = tape_of(x);
  const Shape& xs = x.shape();
  require(xs.size() == 4, "patch_partition: input must be [N,C,H,W], got " + to_string(xs));
  require(patch >= 1 && xs[2] % static_cast<std::size_t>(patch) == 0 && xs[3] % static_cast<std::size_t>(patch) == 0,
          "patch_partition: patch " + std::to_string(patch) + " does not tile " + to_string(xs));
  const std::size_t p = static_cast<std::size_t>(patch);
  auto idx = patch_index(xs[0], xs[1], xs[2], xs[3], p);
  Tensor<T> out(Shape{xs[0], (xs[2] / p) * (xs[3] / p), p * p * xs[1]});
  const auto& xv = x.value().data;
  for (std::size_t i = 0; i < idx.size(); ++i) out.data[i] = xv[idx[i]];
  const int xi = x.id();
  return tape.record(OpKind::PatchPartition, {xi}, std::move(out), [=, idx = std::move(idx)](Tape<T>& t, std::span<const T> g) {
    std::span<T> gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < idx.size(); ++i) gx[idx[i]] += g[i];
  });
}

template <typename T>
Var<T> patch_merge(const Var<T>& tokens, int patch, int channels, int height, int width) {
  Tape<T>& tape = tape_of(tokens);
  const Shape& ts = tokens.shape();
  require(patch >= 1 && channels >= 1 && height % patch == 0 && width % patch == 0,
          "patch_merge: patch " + std::to_string(patch) + " does not tile " + std::to_string(height) + "x" + std::to_string(width));
  const std::size_t p = static_cast<std::size_t>(patch), c = static_cast<std::size_t>(channels);
  const std::size_t h = static_cast<std::size_t>(height), w = static_cast<std::size_t>(width);
  require(ts.size() == 3 && ts[1] == (h / p) * (w / p) && ts[2] == p * p * c,
          "patch_merge: tokens " + to_string(ts) + " do not match a " + std::to_string(channels) + "x" +
              std::to_string(height) + "x" + std::to_string(width) + " map with patch " + std::to_string(patch));
  auto idx = patch_index(ts[0], c, h, w, p);
  Tensor<T> out(Shape{ts[0], c, h, w});
  const auto& tv = tokens.value().data;
  for (std::size_t i = 0; i < idx.size(); ++i) out.data[idx[i]] = tv[i];
  const int ti = tokens.id();
  return tape.record(OpKind::PatchMerge, {ti}, std::move(out), [=, idx = std::move(idx)](Tape<T>& t, std::span<const T> g) {
    std::span<T> gt = t.grad_buffer(ti);
    for (std::size_t i = 0; i < idx.size(); ++i) gt[i] += g[idx[i]];
  });
}

template <typename T>
Var<T> concat_rows(const Var<T>& a, const Var<T>& b) {
  Tape<T>& tape = tape_of(a, b);
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  require(as.size() == 3 && bs.size() == 3 && as[0] == bs[0] && as[2] == bs[2], shape_pair("concat_rows", as, bs));
  const std::size_t n = as[0], ra = as[1], rb = bs[1], d = as[2];
  Tensor<T> out(Shape{n, ra + rb, d});
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(a.value().data.begin() + static_cast<std::ptrdiff_t>(s * ra * d), ra * d,
                out.data.begin() + static_cast<std::ptrdiff_t>(s * (ra + rb) * d));
    std::copy_n(b.value().data.begin() + static_cast<std::ptrdiff_t>(s * rb * d), rb * d,
                out.data.begin() + static_cast<std::ptrdiff_t>((s * (ra + rb) + ra) * d));
  }
  const int ai = a.id(), bi = b.id();
  return tape.record(OpKind::ConcatRows, {ai, bi}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    std::span<T> ga = t.grad_buffer(ai);
    std::span<T> gb = t.grad_buffer(bi);
    for (std::size_t s = 0; s < n; ++s) {
      const T* src = g.data() + s * (ra + rb) * d;
      if (!ga.empty())
        for (std::size_t i = 0; i < ra * d; ++i) ga[s * ra * d + i] += src[i];
      if (!gb.empty())
        for (std::size_t i = 0; i < rb * d; ++i) gb[s * rb * d + i] += src[ra * d + i];
    }
  });
}

template <typename T>
Var<T> add_rows(const Var<T>& seq, const Var<T>& rows) {
  Tape<T>& tape = tape_of(seq, rows);
  const Shape& ss = seq.shape();
  const Shape& rs = rows.shape();
  require(ss.size() == 3 && rs.size() == 3 && ss[0] == rs[0] && ss[2] == rs[2] && rs[1] <= ss[1],
          shape_pair("add_rows", ss, rs));
  const std::size_t n = ss[0], total = ss[1], k = rs[1], d = ss[2];
  Tensor<T> out = seq.value();
  const auto& rv = rows.value().data;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < k * d; ++i) out.data[s * total * d + i] += rv[s * k * d + i];
  const int si = seq.id(), ri = rows.id();
  return tape.record(OpKind::AddRows, {si, ri}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    t.accumulate(si, g);
    if (std::span<T> gr = t.grad_buffer(ri); !gr.empty())
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t i = 0; i < k * d; ++i) gr[s * k * d + i] += g[s * total * d + i];
  });
}

template <typename T>
Var<T> slice_rows(const Var<T>& seq, int begin, int count) {
  Tape<T>& tape = tape_of(seq);
  const Shape& ss = seq.shape();
  require(ss.size() == 3 && begin >= 0 && count >= 1 && static_cast<std::size_t>(begin + count) <= ss[1],
          "slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) + ") out of range for " + to_string(ss));
  const std::size_t n = ss[0], total = ss[1], d = ss[2], b0 = static_cast<std::size_t>(begin), c = static_cast<std::size_t>(count);
  Tensor<T> out(Shape{n, c, d});
  const auto& sv = seq.value().data;
  for (std::size_t s = 0; s < n; ++s)
    std::copy_n(sv.begin() + static_cast<std::ptrdiff_t>((s * total + b0) * d), c * d,
                out.data.begin() + static_cast<std::ptrdiff_t>(s * c * d));
  const int si = seq.id();
  return tape.record(OpKind::SliceRows, {si}, std::move(out), [=](Tape<T>& t, std::span<const T> g) {
    std::span<T> gs = t.grad_buffer(si);
    for (std::size_t s = 0; s < n; ++s)
      for (std::size_t i = 0; i < c * d; ++i) gs[(s * total + b0) * d + i] += g[s * c * d + i];
  });
}

#define MOCT_INSTANTIATE_OPS(T)                                                                                       \
  template Var<T> conv2d(const Var<T>&, const Var<T>&, const Var<T>&, int, int);                                     \
  template Var<T> batchnorm2d(const Var<T>&, const Var<T>&, const Var<T>&, Tensor<T>&, Tensor<T>&,                    \
                              const BatchNormOptions&);                                                               \
  template Var<T> relu(const Var<T>&);                                                                                \
  template Var<T> add(const Var<T>&, const Var<T>&);                                                                  \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                                                  \
  template Var<T> scale(const Var<T>&, T);                                                                            \
  template Var<T> broadcast_add(const Var<T>&, const Var<T>&);                                                        \
  template Var<T> sum(const Var<T>&);                                                                                 \
  template Var<T> mean(const Var<T>&);                                                                                \
  template Var<T> maxpool2d(const Var<T>&);                                                                           \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                                                \
  template Var<T> linear(const Var<T>&, const Var<T>&);                                                               \
  template Var<T> softmax(const Var<T>&, int);                                                                        \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, double);                                    \
  template Var<T> multihead_attention(const Var<T>&, const AttentionWeights<T>&, int);                                \
  template Var<T> patch_partition(const Var<T>&, int);                                                                \
  template Var<T> patch_merge(const Var<T>&, int, int, int, int);                                                     \
  template Var<T> concat_rows(const Var<T>&, const Var<T>&);                                                          \
  template Var<T> add_rows(const Var<T>&, const Var<T>&);                                                             \
  template Var<T> slice_rows(const Var<T>&, int, int);

MOCT_INSTANTIATE_OPS(float)
MOCT_INSTANTIATE_OPS(double)

}  // namespace moct::ad
