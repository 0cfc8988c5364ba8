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

#include "moctrans/training/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "moctrans/autodiff/ops.hpp"

namespace moct::train {

using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

template <typename T>
Tensor<T> one_hot(std::span<const std::uint8_t> labels, std::size_t n, std::size_t classes, std::size_t h, std::size_t w) {
  const std::size_t hw = h * w;
  if (labels.size() != n * hw) throw ShapeError("one_hot: " + std::to_string(labels.size()) + " labels for " + std::to_string(n * hw) + " pixels");
  Tensor<T> out(Shape{n, classes, h, w});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < hw; ++i) {
      const std::size_t c = labels[s * hw + i];
      if (c >= classes) throw ShapeError("one_hot: label " + std::to_string(c) + " >= " + std::to_string(classes) + " classes");
      out.data[(s * classes + c) * hw + i] = T(1);
    }
  return out;
}

template <typename T>
Var<T> soft_dice_per_sample(const Var<T>& prob, const Tensor<T>& target, double eps) {
  if (!(eps > 0)) throw ShapeError("soft_dice: smoothing eps must be > 0");
  const Shape& ps = prob.shape();
  if (ps.size() != 4 || ps != target.shape)
    throw ShapeError("soft_dice: prediction " + ad::to_string(ps) + " and target " + ad::to_string(target.shape) + " must match as [N,C,H,W]");
  const std::size_t n = ps[0], c = ps[1], hw = ps[2] * ps[3];
  const auto& p = prob.value().data;
  // Per (sample, class): intersection, denominator.
  std::vector<double> inter(n * c), denom(n * c);
  Tensor<T> out(Shape{n});
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0;
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t off = (s * c + k) * hw;
      double pg = 0, pp = 0, gg = 0;
      for (std::size_t i = 0; i < hw; ++i) {
        pg += static_cast<double>(p[off + i]) * target.data[off + i];
        pp += static_cast<double>(p[off + i]) * p[off + i];
        gg += static_cast<double>(target.data[off + i]) * target.data[off + i];
      }
      inter[s * c + k] = 2 * pg + eps;
      denom[s * c + k] = pp + gg + eps;
      acc += 1.0 - inter[s * c + k] / denom[s * c + k];
    }
    out.data[s] = static_cast<T>(acc / static_cast<double>(c));
  }
  const int pi = prob.id();
  return prob.tape()->record(ad::OpKind::SoftDice, {pi}, std::move(out),
                             [=, target = target, inter = std::move(inter), denom = std::move(denom)](Tape<T>& t, std::span<const T> g) {
                               std::span<T> gp = t.grad_buffer(pi);
                               const auto& p = t.value(pi).data;
                               for (std::size_t s = 0; s < n; ++s)
                                 for (std::size_t k = 0; k < c; ++k) {
                                   const std::size_t off = (s * c + k) * hw;
                                   const double a = inter[s * c + k], b = denom[s * c + k];
                                   const double scale = static_cast<double>(g[s]) / static_cast<double>(c);
                                   // d/dp [1 - a/b] = -(2g b - a 2p) / b^2
                                   for (std::size_t i = 0; i < hw; ++i)
                                     gp[off + i] += static_cast<T>(scale * -(2.0 * target.data[off + i] * b - a * 2.0 * p[off + i]) / (b * b));
                                 }
                             });
}

template <typename T>
Var<T> soft_dice_loss(const Var<T>& prob, const Tensor<T>& target, double eps) {
  return ad::mean(soft_dice_per_sample(prob, target, eps));
}

template <typename T>
Var<T> cross_entropy_per_sample(const Var<T>& logits, std::span<const std::uint8_t> labels) {
  const Shape& ls = logits.shape();
  if (ls.size() != 4) throw ShapeError("cross_entropy: logits must be [N,C,H,W], got " + ad::to_string(ls));
  const std::size_t n = ls[0], c = ls[1], h = ls[2], w = ls[3], hw = h * w;
  if (labels.size() != n * hw)
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " + std::to_string(n * hw) + " pixels");
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < hw; ++i)
      if (labels[s * hw + i] >= c)
        throw ShapeError("cross_entropy: label " + std::to_string(labels[s * hw + i]) + " out of range [0," + std::to_string(c) +
                         ") at sample " + std::to_string(s) + " pixel (y=" + std::to_string(i / w) + ", x=" + std::to_string(i % w) + ")");
  const auto& x = logits.value().data;
  Tensor<T> softmax(ls);
  Tensor<T> out(Shape{n});
  for (std::size_t s = 0; s < n; ++s) {
    double acc = 0;
    for (std::size_t i = 0; i < hw; ++i) {
      T mx = x[s * c * hw + i];
      for (std::size_t k = 1; k < c; ++k) mx = std::max(mx, x[(s * c + k) * hw + i]);
      double z = 0;
      for (std::size_t k = 0; k < c; ++k) z += std::exp(static_cast<double>(x[(s * c + k) * hw + i] - mx));
      const double lse = mx + std::log(z);
      for (std::size_t k = 0; k < c; ++k)
        softmax.data[(s * c + k) * hw + i] = static_cast<T>(std::exp(x[(s * c + k) * hw + i] - lse));
      acc += lse - x[(s * c + labels[s * hw + i]) * hw + i];
    }
    out.data[s] = static_cast<T>(acc / static_cast<double>(hw));
  }
  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  const int li = logits.id();
  return logits.tape()->record(ad::OpKind::CrossEntropy, {li}, std::move(out),
                               [=, softmax = std::move(softmax), lab = std::move(lab)](Tape<T>& t, std::span<const T> g) {
                                 std::span<T> gl = t.grad_buffer(li);
                                 for (std::size_t s = 0; s < n; ++s) {
                                   const T scale = g[s] / static_cast<T>(hw);
                                   for (std::size_t k = 0; k < c; ++k) {
                                     const std::size_t off = (s * c + k) * hw;
                                     for (std::size_t i = 0; i < hw; ++i) {
                                       const T onehot = lab[s * hw + i] == k ? T(1) : T(0);
                                       gl[off + i] += scale * (softmax.data[off + i] - onehot);
                                     }
                                   }
                                 }
                               });
}

template <typename T>
Var<T> cross_entropy_loss(const Var<T>& logits, std::span<const std::uint8_t> labels) {
  return ad::mean(cross_entropy_per_sample(logits, labels));
}

template <typename T>
Var<T> weighted_mean(const Var<T>& per_sample, std::span<const double> weights) {
  const Shape& s = per_sample.shape();
  if (s.size() != 1 || s[0] != weights.size())
    throw ShapeError("weighted_mean: " + std::to_string(weights.size()) + " weights for values of shape " + ad::to_string(s));
  const std::size_t n = s[0];
  double acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += weights[i] * per_sample.value()[i];
  std::vector<double> w(weights.begin(), weights.end());
  const int xi = per_sample.id();
  return per_sample.tape()->record(ad::OpKind::WeightedMean, {xi}, Tensor<T>(Shape{1}, static_cast<T>(acc / static_cast<double>(n))),
                                   [=, w = std::move(w)](Tape<T>& t, std::span<const T> g) {
                                     std::span<T> gx = t.grad_buffer(xi);
                                     for (std::size_t i = 0; i < n; ++i) gx[i] += static_cast<T>(w[i] / static_cast<double>(n)) * g[0];
                                   });
}

template <typename T>
Var<T> combined_loss(const Var<T>& logits, std::span<const std::uint8_t> labels, double eps, std::span<const double> sample_weights) {
  const Shape& ls = logits.shape();
  if (ls.size() != 4) throw ShapeError("combined_loss: logits must be [N,C,H,W], got " + ad::to_string(ls));
  const Tensor<T> target = one_hot<T>(labels, ls[0], ls[1], ls[2], ls[3]);
  Var<T> dice = soft_dice_per_sample(ad::softmax(logits, 1), target, eps);
  Var<T> ce = cross_entropy_per_sample(logits, labels);
  return weighted_mean(ad::scale(ad::add(dice, ce), T(0.5)), sample_weights);
}

template <typename T>
Var<T> combined_loss(const Var<T>& logits, std::span<const std::uint8_t> labels, double eps, double sample_weight) {
  const std::vector<double> w(logits.shape().empty() ? 0 : logits.shape()[0], sample_weight);
  return combined_loss(logits, labels, eps, std::span<const double>(w));
}

#define MOCT_INSTANTIATE_LOSSES(T)                                                                                   \
  template Tensor<T> one_hot(std::span<const std::uint8_t>, std::size_t, std::size_t, std::size_t, std::size_t);    \
  template Var<T> soft_dice_per_sample(const Var<T>&, const Tensor<T>&, double);                                      \
  template Var<T> soft_dice_loss(const Var<T>&, const Tensor<T>&, double);                                            \
  template Var<T> cross_entropy_per_sample(const Var<T>&, std::span<const std::uint8_t>);                             \
  template Var<T> cross_entropy_loss(const Var<T>&, std::span<const std::uint8_t>);                                   \
  template Var<T> weighted_mean(const Var<T>&, std::span<const double>);                                              \
  template Var<T> combined_loss(const Var<T>&, std::span<const std::uint8_t>, double, std::span<const double>);       \
  template Var<T> combined_loss(const Var<T>&, std::span<const std::uint8_t>, double, double);

MOCT_INSTANTIATE_LOSSES(float)
MOCT_INSTANTIATE_LOSSES(double)

}  // namespace moct::train
