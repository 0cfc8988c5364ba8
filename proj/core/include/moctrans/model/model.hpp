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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moctrans/autodiff/ops.hpp"
#include "moctrans/model/config.hpp"
#include "moctrans/model/params.hpp"

namespace moct::model {

using ad::Mode;

template <typename T>
struct TokenSet {
  ad::Var<T> image_tokens;                 // [N, n, d_level]
  std::optional<ad::Var<T>> task_token;    // [N, 1, d_level]
  int level = 0;
};

// Optional instrumentation filled by decoder_forward.
template <typename T>
struct DecoderTrace {
  // Decoder sequence shape after each level's transformer blocks, deepest first.
  std::vector<ad::Shape> sequence_shapes;
  // Task-token rows immediately before and after each PFF skip addition.
  std::vector<ad::Tensor<T>> task_rows_before_skip;
  std::vector<ad::Tensor<T>> task_rows_after_skip;
  ad::Shape merged_shape;
};

// conv3x3-BN-ReLU -> conv3x3-BN-ReLU main branch plus conv1x1-BN-ReLU skip,
// summed without a trailing activation. `prefix` selects e.g. "enc0".
template <typename T>
ad::Var<T> resconv(const ad::Var<T>& x, ParameterStore<T>& params, const std::string& prefix, Mode mode);

// Pre-norm block: t = x + MHA(LN(x)); out = t + FFN(LN(t)).
template <typename T>
ad::Var<T> transformer_block(const ad::Var<T>& tokens, ParameterStore<T>& params, const std::string& prefix, int heads);

// Task token rows [N, 1, d], sample s filled with task_ids[s].
template <typename T>
ad::Tensor<T> task_token_rows(std::span<const int> task_ids, int dim);

template <typename T>
class MoCtrans {
 public:
  // Validates the config and that `params` matches its layout.
  MoCtrans(ModelConfig config, ParameterStore<T> params);

  static MoCtrans initialized(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  ParameterStore<T>& params() { return params_; }
  const ParameterStore<T>& params() const { return params_; }

  // F_0..F_{L-1}, each taken before pooling.
  std::vector<ad::Var<T>> encoder_forward(const ad::Var<T>& image, Mode mode);
  // Channel reduction by m, then patch partition into n tokens.
  TokenSet<T> pff_forward(const ad::Var<T>& feature, int level);
  // Logits [N, n_classes, H, W]. task_ids must hold one id per sample in
  // [1, n_tasks]; the base variant never reads them.
  ad::Var<T> decoder_forward(const std::vector<TokenSet<T>>& pff, std::span<const int> task_ids,
                             DecoderTrace<T>* trace = nullptr);

  ad::Var<T> forward(const ad::Var<T>& slab, std::span<const int> task_ids, Mode mode, DecoderTrace<T>* trace = nullptr);
  ad::Var<T> forward(ad::Tape<T>& tape, const ad::Tensor<T>& slab, std::span<const int> task_ids, Mode mode,
                     DecoderTrace<T>* trace = nullptr);

 private:
  ad::Var<T> p(ad::Tape<T>& tape, const std::string& name) { return tape.param(params_.at(name)); }

  ModelConfig config_;
  ParameterStore<T> params_;
};

}  // namespace moct::model
