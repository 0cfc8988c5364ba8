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

#include <cstdint>
#include <span>

#include "moctrans/autodiff/tape.hpp"

namespace moct::train {

// One-hot [N, classes, H, W] from N*H*W labels.
template <typename T>
ad::Tensor<T> one_hot(std::span<const std::uint8_t> labels, std::size_t n, std::size_t classes, std::size_t h, std::size_t w);

// Squared-denominator soft Dice per sample: mean over classes of
// 1 - (2 sum(p g) + eps) / (sum(p^2) + sum(g^2) + eps). Output [N].
template <typename T>
ad::Var<T> soft_dice_per_sample(const ad::Var<T>& prob, const ad::Tensor<T>& target, double eps);
// Mean over classes and batch.
template <typename T>
ad::Var<T> soft_dice_loss(const ad::Var<T>& prob, const ad::Tensor<T>& target, double eps);

// Mean over pixels of -log softmax(logits)[label], log-sum-exp form. Output [N].
// Out-of-range labels are rejected with their (sample, y, x).
template <typename T>
ad::Var<T> cross_entropy_per_sample(const ad::Var<T>& logits, std::span<const std::uint8_t> labels);
template <typename T>
ad::Var<T> cross_entropy_loss(const ad::Var<T>& logits, std::span<const std::uint8_t> labels);

// mean_i(w_i * x_i) over a [N] vector.
template <typename T>
ad::Var<T> weighted_mean(const ad::Var<T>& per_sample, std::span<const double> weights);

// mean_i w_i * (soft_dice_i(softmax(logits), onehot) + ce_i) / 2.
template <typename T>
ad::Var<T> combined_loss(const ad::Var<T>& logits, std::span<const std::uint8_t> labels, double eps,
                         std::span<const double> sample_weights);
template <typename T>
ad::Var<T> combined_loss(const ad::Var<T>& logits, std::span<const std::uint8_t> labels, double eps, double sample_weight);

}  // namespace moct::train
