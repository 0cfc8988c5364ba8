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

#include "moctrans/model/checkpoint.hpp"

#include <json.hpp>

#include "moctrans/binary_io.hpp"

namespace moct::model {
namespace {

constexpr std::string_view kMagic = "MOCT1";

nlohmann::json config_json(const ModelConfig& c) {
  return nlohmann::json{{"c_base", c.c_base},
                        {"m", c.m},
                        {"levels", c.levels},
                        {"heads", c.heads},
                        {"ffn_expansion", c.ffn_expansion},
                        {"blocks_per_level", c.blocks_per_level},
                        {"n_tasks", c.n_tasks},
                        {"n_classes", c.n_classes},
                        {"in_channels", c.in_channels},
                        {"image_hw", c.image_hw},
                        {"variant", std::string(variant_name(c.variant))},
                        {"class_tasks", c.class_tasks}};
}

ModelConfig config_from(const nlohmann::json& j) {
  ModelConfig c;
  c.c_base = j.at("c_base").get<int>();
  c.m = j.at("m").get<int>();
  c.levels = j.at("levels").get<int>();
  c.heads = j.at("heads").get<int>();
  c.ffn_expansion = j.at("ffn_expansion").get<int>();
  c.blocks_per_level = j.at("blocks_per_level").get<int>();
  c.n_tasks = j.at("n_tasks").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.image_hw = j.at("image_hw").get<int>();
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.class_tasks = j.at("class_tasks").get<std::vector<int>>();
  return c;
}

}  // namespace

std::string config_to_json(const ModelConfig& config) { return config_json(config).dump(); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model config: ") + e.what());
  }
}

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& config, const CheckpointMeta& meta,
                                            const ParameterStore<float>& params) {
  nlohmann::json header{{"model", config_json(config)},
                        {"meta", {{"method", meta.method}, {"datasets", meta.datasets}, {"fold", meta.fold}, {"epoch", meta.epoch}}}};
  const std::string text = header.dump();
  io::ByteWriter w;
  w.text(kMagic);
  w.u8(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.text(text);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& e : params.entries()) {
    w.u32(static_cast<std::uint32_t>(e.name.size()));
    w.text(e.name);
    w.u32(static_cast<std::uint32_t>(e.param.value.rank()));
    for (std::size_t d : e.param.value.shape) w.u32(static_cast<std::uint32_t>(d));
    for (float v : e.param.value.data) w.f32(v);
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source) {
  io::ByteReader r(bytes, source);
  const std::string magic = r.text(kMagic.size(), "magic");
  if (magic != kMagic) throw DataError(source + ": bad magic (expected MOCT1)");
  const std::uint8_t version = r.u8("version");
  if (version != kCheckpointVersion)
    throw DataError(source + ": unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t len = r.u32("config length");
  const std::string text = r.text(len, "config");

  Checkpoint ck;
  try {
    const nlohmann::json header = nlohmann::json::parse(text);
    ck.config = config_from(header.at("model"));
    const auto& m = header.at("meta");
    ck.meta.method = m.at("method").get<std::string>();
    ck.meta.datasets = m.at("datasets").get<std::vector<std::string>>();
    ck.meta.fold = m.at("fold").get<int>();
    ck.meta.epoch = m.at("epoch").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(source + ": malformed config block: " + e.what());
  }
  try {
    ck.config.validate();
  } catch (const ConfigError& e) {
    throw DataError(source + ": " + e.what());
  }

  const auto layout = parameter_layout(ck.config);
  const std::uint32_t count = r.u32("tensor count");
  if (count != layout.size())
    throw DataError(source + ": holds " + std::to_string(count) + " tensors, config expects " + std::to_string(layout.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.text(r.u32("name length"), "tensor name");
    const std::uint32_t rank = r.u32("rank of " + name);
    ad::Shape shape(rank);
    for (auto& d : shape) d = r.u32("dims of " + name);
    const ParamSpec& spec = layout[i];
    if (name != spec.name) throw DataError(source + ": tensor " + std::to_string(i) + " is '" + name + "', expected '" + spec.name + "'");
    if (shape != spec.shape)
      throw DataError(source + ": tensor '" + name + "' has shape " + ad::to_string(shape) + ", config expects " +
                      ad::to_string(spec.shape));
    ad::Tensor<float> t(shape);
    r.need(4 * t.size(), "values of " + name);
    for (float& v : t.data) v = r.f32(name);
    ck.params.add(name, std::move(t), spec.learnable);
  }
  if (r.remaining() != 0) throw DataError(source + ": " + std::to_string(r.remaining()) + " trailing bytes");
  return ck;
}

void save_checkpoint(const std::string& path, const ModelConfig& config, const CheckpointMeta& meta,
                     const ParameterStore<float>& params) {
  io::write_file(path, encode_checkpoint(config, meta, params));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path), path); }

Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected) {
  const auto bytes = io::read_file(path);
  Checkpoint ck = decode_checkpoint(bytes, path);
  if (!(ck.config == expected)) {
    // Report the first tensor that disagrees with the expected architecture.
    const auto layout = parameter_layout(expected);
    for (std::size_t i = 0; i < layout.size(); ++i) {
      if (i >= ck.params.size()) throw DataError(path + ": missing tensor '" + layout[i].name + "'");
      const auto& e = ck.params.entries()[i];
      if (e.name != layout[i].name || e.param.value.shape != layout[i].shape)
        throw DataError(path + ": tensor '" + e.name + "' " + ad::to_string(e.param.value.shape) +
                        " does not match expected '" + layout[i].name + "' " + ad::to_string(layout[i].shape));
    }
    throw DataError(path + ": recorded model config differs from the expected config");
  }
  return ck;
}

}  // namespace moct::model
