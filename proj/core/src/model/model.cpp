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

#include "moctrans/model/model.hpp"

#include "moctrans/error.hpp"

namespace moct::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;

template <typename T>
Var<T> resconv(const Var<T>& x, ParameterStore<T>& params, const std::string& prefix, Mode mode) {
  Tape<T>& tape = *x.tape();
  const ad::BatchNormOptions bn_opts{mode};
  auto conv_bn_relu = [&](const Var<T>& in, const std::string& conv, const std::string& bn, int pad) {
    Var<T> y = ad::conv2d(in, tape.param(params.at(conv + ".weight")), tape.param(params.at(conv + ".bias")), 1, pad);
    y = ad::batchnorm2d(y, tape.param(params.at(bn + ".gamma")), tape.param(params.at(bn + ".beta")),
                        params.at(bn + ".running_mean").value, params.at(bn + ".running_var").value, bn_opts);
    return ad::relu(y);
  };
  Var<T> main = conv_bn_relu(x, prefix + ".conv1", prefix + ".bn1", 1);
  main = conv_bn_relu(main, prefix + ".conv2", prefix + ".bn2", 1);
  Var<T> skip = conv_bn_relu(x, prefix + ".skip", prefix + ".skip_bn", 0);
  return ad::add(main, skip);
}

template <typename T>
Var<T> transformer_block(const Var<T>& tokens, ParameterStore<T>& params, const std::string& prefix, int heads) {
  Tape<T>& tape = *tokens.tape();
  auto P = [&](const std::string& name) { return tape.param(params.at(prefix + name)); };
  Var<T> h = ad::layer_norm(tokens, P(".ln1.gamma"), P(".ln1.beta"));
  const ad::AttentionWeights<T> w{P(".attn.wq"), P(".attn.bq"), P(".attn.wk"), P(".attn.bk"),
                                  P(".attn.wv"), P(".attn.bv"), P(".attn.wo"), P(".attn.bo")};
  Var<T> t1 = ad::add(tokens, ad::multihead_attention(h, w, heads));
  h = ad::layer_norm(t1, P(".ln2.gamma"), P(".ln2.beta"));
  h = ad::relu(ad::linear(h, P(".ffn1.weight"), P(".ffn1.bias")));
  h = ad::linear(h, P(".ffn2.weight"), P(".ffn2.bias"));
  return ad::add(t1, h);
}

template <typename T>
Tensor<T> task_token_rows(std::span<const int> task_ids, int dim) {
  const std::size_t d = static_cast<std::size_t>(dim);
  Tensor<T> rows(ad::Shape{task_ids.size(), 1, d});
  for (std::size_t s = 0; s < task_ids.size(); ++s)
    std::fill_n(rows.data.begin() + static_cast<std::ptrdiff_t>(s * d), d, static_cast<T>(task_ids[s]));
  return rows;
}

template <typename T>
MoCtrans<T>::MoCtrans(ModelConfig config, ParameterStore<T> params) : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
  check_against_layout(params_, config_);
}

template <typename T>
MoCtrans<T> MoCtrans<T>::initialized(const ModelConfig& config, std::uint64_t seed) {
  if constexpr (std::is_same_v<T, float>) {
    return MoCtrans(config, param_init(config, seed));
  } else {
    return MoCtrans(config, param_init(config, seed).template cast<T>());
  }
}

template <typename T>
std::vector<Var<T>> MoCtrans<T>::encoder_forward(const Var<T>& image, Mode mode) {
  const ad::Shape& s = image.shape();
  if (s.size() != 4 || s[1] != static_cast<std::size_t>(config_.in_channels) ||
      s[2] != static_cast<std::size_t>(config_.image_hw) || s[3] != static_cast<std::size_t>(config_.image_hw)) {
    throw ShapeError("encoder_forward: expected input [N," + std::to_string(config_.in_channels) + "," +
                     std::to_string(config_.image_hw) + "," + std::to_string(config_.image_hw) + "], got " + ad::to_string(s));
  }
  std::vector<Var<T>> features;
  Var<T> x = image;
  for (int i = 0; i < config_.levels; ++i) {
    Var<T> f = resconv(x, params_, "enc" + std::to_string(i), mode);
    features.push_back(f);
    if (i < config_.deepest()) x = ad::maxpool2d(f);
  }
  return features;
}

template <typename T>
TokenSet<T> MoCtrans<T>::pff_forward(const Var<T>& feature, int level) {
  Tape<T>& tape = *feature.tape();
  const std::string pre = "pff" + std::to_string(level);
  Var<T> reduced = ad::conv2d(feature, p(tape, pre + ".weight"), p(tape, pre + ".bias"));
  return TokenSet<T>{ad::patch_partition(reduced, config_.patch_side(level)), std::nullopt, level};
}

template <typename T>
Var<T> MoCtrans<T>::decoder_forward(const std::vector<TokenSet<T>>& pff, std::span<const int> task_ids, DecoderTrace<T>* trace) {
  if (pff.size() != static_cast<std::size_t>(config_.levels))
    throw ShapeError("decoder_forward: expected " + std::to_string(config_.levels) + " PFF token sets");
  const int top = config_.deepest();
  Tape<T>& tape = *pff[static_cast<std::size_t>(top)].image_tokens.tape();
  const std::size_t batch = pff[0].image_tokens.dim(0);
  const int n = config_.token_count();
  const bool with_token = config_.variant == Variant::MoCtrans;

  Var<T> seq = pff[static_cast<std::size_t>(top)].image_tokens;
  if (with_token) {
    if (task_ids.size() != batch)
      throw ShapeError("decoder_forward: " + std::to_string(task_ids.size()) + " task ids for batch of " + std::to_string(batch));
    for (int id : task_ids)
      if (id < 1 || id > config_.n_tasks)
        throw ConfigError("task id " + std::to_string(id) + " out of range [1, " + std::to_string(config_.n_tasks) + "]");
    seq = ad::concat_rows(seq, tape.constant(task_token_rows<T>(task_ids, config_.token_dim(top))));
  }
  seq = ad::broadcast_add(seq, p(tape, "pos_embed"));

  for (int level = top; level >= 0; --level) {
    const std::string pre = "dec" + std::to_string(level);
    if (level < top) {
      seq = ad::linear(seq, p(tape, pre + ".proj.weight"), p(tape, pre + ".proj.bias"));
      if (trace != nullptr && with_token) trace->task_rows_before_skip.push_back(ad::slice_rows(seq, n, 1).value());
      seq = ad::add_rows(seq, pff[static_cast<std::size_t>(level)].image_tokens);
      if (trace != nullptr && with_token) trace->task_rows_after_skip.push_back(ad::slice_rows(seq, n, 1).value());
    }
    for (int b = 0; b < config_.blocks_per_level; ++b)
      seq = transformer_block(seq, params_, pre + ".block" + std::to_string(b), config_.heads);
    if (trace != nullptr) trace->sequence_shapes.push_back(seq.shape());
  }

  Var<T> image_rows = with_token ? ad::slice_rows(seq, 0, n) : seq;
  Var<T> merged = ad::patch_merge(image_rows, config_.patch_side(0), config_.reduced_channels(0), config_.image_hw,
                                  config_.image_hw);
  if (trace != nullptr) trace->merged_shape = merged.shape();
  return ad::conv2d(merged, p(tape, "head.weight"), p(tape, "head.bias"), 1, 1);
}

template <typename T>
Var<T> MoCtrans<T>::forward(const Var<T>& slab, std::span<const int> task_ids, Mode mode, DecoderTrace<T>* trace) {
  const std::vector<Var<T>> features = encoder_forward(slab, mode);
  std::vector<TokenSet<T>> tokens;
  tokens.reserve(features.size());
  for (int i = 0; i < config_.levels; ++i) tokens.push_back(pff_forward(features[static_cast<std::size_t>(i)], i));
  return decoder_forward(tokens, task_ids, trace);
}

template <typename T>
Var<T> MoCtrans<T>::forward(Tape<T>& tape, const Tensor<T>& slab, std::span<const int> task_ids, Mode mode,
                            DecoderTrace<T>* trace) {
  return forward(tape.constant(slab), task_ids, mode, trace);
}

template Var<float> resconv(const Var<float>&, ParameterStore<float>&, const std::string&, Mode);
template Var<double> resconv(const Var<double>&, ParameterStore<double>&, const std::string&, Mode);
template Var<float> transformer_block(const Var<float>&, ParameterStore<float>&, const std::string&, int);
template Var<double> transformer_block(const Var<double>&, ParameterStore<double>&, const std::string&, int);
template Tensor<float> task_token_rows(std::span<const int>, int);
template Tensor<double> task_token_rows(std::span<const int>, int);
template class MoCtrans<float>;
template class MoCtrans<double>;

}  // namespace moct::model
