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
#include <map>
#include <string>
#include <string_view>
#include <variant>

#include "moctrans/model/config.hpp"
#include "moctrans/training/protocol.hpp"

namespace moct::cli {

// Flat TOML subset: [section] and [section.sub] headers, key = value with
// basic strings, integers, floats and booleans, '#' comments.
using TomlValue = std::variant<bool, std::int64_t, double, std::string>;

struct TomlDocument {
  // Section name ("" for top-level keys) -> key -> value.
  std::map<std::string, std::map<std::string, TomlValue>> sections;
};

// Throws ConfigError naming the line.
TomlDocument parse_toml(std::string_view text);

struct RunConfig {
  std::uint64_t seed = 7;
  std::string variant = "mo_ctrans";  // mo_ctrans | base_single | base_multi
  std::string dataset;                // base_single target
  std::string output = "runs";
  std::string data_root = "data";
  std::string scale = "desk";
  model::ModelConfig model = model::desk_config();
  train::TrainConfig train;

  train::Method method() const { return train::parse_method(variant); }
};

// Unknown sections or keys and ill-typed values are rejected. Relative
// paths are resolved against `base_dir`.
RunConfig parse_run_config(std::string_view text, const std::string& base_dir = ".");
RunConfig load_run_config(const std::string& path);

}  // namespace moct::cli
