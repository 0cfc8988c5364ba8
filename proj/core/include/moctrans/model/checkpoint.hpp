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

#include <string>
#include <vector>

#include "moctrans/model/config.hpp"
#include "moctrans/model/params.hpp"

namespace moct::model {

// Provenance recorded alongside the weights.
struct CheckpointMeta {
  std::string method;                 // mo_ctrans | base_multi | base_single
  std::vector<std::string> datasets;  // datasets the model was trained on
  int fold = -1;
  int epoch = -1;  // epoch the weights were taken from

  friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

struct Checkpoint {
  ModelConfig config;
  CheckpointMeta meta;
  ParameterStore<float> params;
};

// Layout (little-endian): "MOCT1", version byte, u32 length + UTF-8 JSON
// config, u32 tensor count, then per tensor: u32 name length, name, u32
// rank, u32 dims, raw float32 values.
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& config, const CheckpointMeta& meta,
                                            const ParameterStore<float>& params);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes, const std::string& source = "checkpoint");

void save_checkpoint(const std::string& path, const ModelConfig& config, const CheckpointMeta& meta,
                     const ParameterStore<float>& params);
// Throws DataError on bad magic/version, truncation, or tensors that do not
// match the recorded config.
Checkpoint load_checkpoint(const std::string& path);
// As above, and additionally requires the recorded config to equal `expected`.
Checkpoint load_checkpoint(const std::string& path, const ModelConfig& expected);

std::string config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const std::string& text);

}  // namespace moct::model
