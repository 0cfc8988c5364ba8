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

#include "moctrans/model/params.hpp"

#include <cmath>
#include <random>

namespace moct::model {
namespace {

void add_conv(std::vector<ParamSpec>& out, const std::string& name, int cout, int cin, int k) {
  const std::size_t fan_in = static_cast<std::size_t>(cin) * k * k;
  out.push_back({name + ".weight", {std::size_t(cout), std::size_t(cin), std::size_t(k), std::size_t(k)}, InitKind::HeNormal, fan_in});
  out.push_back({name + ".bias", {std::size_t(cout)}, InitKind::Zeros});
}

void add_bn(std::vector<ParamSpec>& out, const std::string& name, int c) {
  const ad::Shape s{std::size_t(c)};
  out.push_back({name + ".gamma", s, InitKind::Ones});
  out.push_back({name + ".beta", s, InitKind::Zeros});
  out.push_back({name + ".running_mean", s, InitKind::Zeros, 0, false});
  out.push_back({name + ".running_var", s, InitKind::Ones, 0, false});
}

void add_linear(std::vector<ParamSpec>& out, const std::string& name, int dout, int din) {
  out.push_back({name + ".weight", {std::size_t(dout), std::size_t(din)}, InitKind::HeNormal, std::size_t(din)});
  out.push_back({name + ".bias", {std::size_t(dout)}, InitKind::Zeros});
}

void add_ln(std::vector<ParamSpec>& out, const std::string& name, int d) {
  out.push_back({name + ".gamma", {std::size_t(d)}, InitKind::Ones});
  out.push_back({name + ".beta", {std::size_t(d)}, InitKind::Zeros});
}

}  // namespace

std::vector<ParamSpec> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<ParamSpec> out;
  int cin = config.in_channels;
  for (int i = 0; i < config.levels; ++i) {
    const std::string p = "enc" + std::to_string(i);
    const int c = config.encoder_channels(i);
    add_conv(out, p + ".conv1", c, cin, 3);
    add_bn(out, p + ".bn1", c);
    add_conv(out, p + ".conv2", c, c, 3);
    add_bn(out, p + ".bn2", c);
    add_conv(out, p + ".skip", c, cin, 1);
    add_bn(out, p + ".skip_bn", c);
    cin = c;
  }
  for (int i = 0; i < config.levels; ++i)
    add_conv(out, "pff" + std::to_string(i), config.reduced_channels(i), config.encoder_channels(i), 1);
  for (int i = config.deepest(); i >= 0; --i) {
    const std::string p = "dec" + std::to_string(i);
    const int d = config.token_dim(i);
    if (i < config.deepest()) add_linear(out, p + ".proj", d, config.token_dim(i + 1));
    for (int b = 0; b < config.blocks_per_level; ++b) {
      const std::string bp = p + ".block" + std::to_string(b);
      add_ln(out, bp + ".ln1", d);
      for (const char* w : {"q", "k", "v", "o"}) {
        out.push_back({bp + ".attn.w" + w, {std::size_t(d), std::size_t(d)}, InitKind::HeNormal, std::size_t(d)});
        out.push_back({bp + ".attn.b" + w, {std::size_t(d)}, InitKind::Zeros});
      }
      add_ln(out, bp + ".ln2", d);
      add_linear(out, bp + ".ffn1", config.ffn_expansion * d, d);
      add_linear(out, bp + ".ffn2", d, config.ffn_expansion * d);
    }
  }
  out.push_back({"pos_embed",
                 {std::size_t(config.sequence_length()), std::size_t(config.token_dim(config.deepest()))},
                 InitKind::PositionalNormal});
  add_conv(out, "head", config.n_classes, config.reduced_channels(0), 3);
  return out;
}

ParameterStore<float> param_init(const ModelConfig& config, std::uint64_t seed) {
  ParameterStore<float> store;
  std::mt19937_64 rng(seed);
  for (const ParamSpec& spec : parameter_layout(config)) {
    ad::Tensor<float> t(spec.shape);
    switch (spec.init) {
      case InitKind::Zeros: break;
      case InitKind::Ones: std::fill(t.data.begin(), t.data.end(), 1.0f); break;
      case InitKind::HeNormal: {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(spec.fan_in)));
        for (float& v : t.data) v = static_cast<float>(dist(rng));
        break;
      }
      case InitKind::PositionalNormal: {
        std::normal_distribution<double> dist(0.0, 0.02);
        for (float& v : t.data) v = static_cast<float>(dist(rng));
        break;
      }
    }
    store.add(spec.name, std::move(t), spec.learnable);
  }
  return store;
}

std::size_t count_params(const ModelConfig& config) {
  std::size_t n = 0;
  for (const ParamSpec& spec : parameter_layout(config))
    if (spec.learnable) n += ad::numel(spec.shape);
  return n;
}

template <typename T>
void check_against_layout(const ParameterStore<T>& store, const ModelConfig& config) {
  const auto layout = parameter_layout(config);
  for (const ParamSpec& spec : layout) {
    if (!store.contains(spec.name)) throw ConfigError("parameter '" + spec.name + "' is missing");
    const ad::Shape& have = store.at(spec.name).value.shape;
    if (have != spec.shape)
      throw ConfigError("parameter '" + spec.name + "' has shape " + ad::to_string(have) + " but the config expects " +
                        ad::to_string(spec.shape));
  }
  if (store.size() != layout.size())
    throw ConfigError("parameter store holds " + std::to_string(store.size()) + " tensors, config expects " +
                      std::to_string(layout.size()));
}

template void check_against_layout(const ParameterStore<float>&, const ModelConfig&);
template void check_against_layout(const ParameterStore<double>&, const ModelConfig&);

}  // namespace moct::model
