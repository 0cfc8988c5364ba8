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

#include "moctrans/model/config.hpp"

#include <algorithm>

#include "moctrans/error.hpp"

namespace moct::model {

std::string_view variant_name(Variant v) {
  return v == Variant::MoCtrans ? "mo_ctrans" : "base";
}

Variant parse_variant(std::string_view name) {
  if (name == "mo_ctrans") return Variant::MoCtrans;
  if (name == "base") return Variant::Base;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
  if (levels < 1 || levels > 8) fail("levels must be in [1, 8], got " + std::to_string(levels));
  if (c_base < 1 || m < 1) fail("c_base and m must be positive");
  if (c_base % m != 0) fail("c_base " + std::to_string(c_base) + " is not divisible by m " + std::to_string(m));
  if (heads < 1 || ffn_expansion < 1 || blocks_per_level < 1) fail("heads, ffn_expansion and blocks_per_level must be positive");
  if (in_channels < 1) fail("in_channels must be positive");
  if (n_tasks < 1) fail("n_tasks must be positive");
  if (n_classes < 2) fail("n_classes must be at least 2, got " + std::to_string(n_classes));
  const int div = 1 << (levels - 1);
  if (image_hw < div || image_hw % div != 0)
    fail("image_hw " + std::to_string(image_hw) + " is not divisible by 2^(levels-1) = " + std::to_string(div));
  for (int i = 0; i < levels; ++i) {
    if (token_dim(i) % heads != 0)
      fail("level " + std::to_string(i) + " token size " + std::to_string(token_dim(i)) + " is not divisible by " +
           std::to_string(heads) + " heads");
  }
  if (!class_tasks.empty()) {
    if (static_cast<int>(class_tasks.size()) != n_classes) fail("class_tasks must list one task per output class");
    if (class_tasks[0] != 0) fail("class 0 must be background (task 0)");
    for (std::size_t c = 1; c < class_tasks.size(); ++c)
      if (class_tasks[c] < 1 || class_tasks[c] > n_tasks) fail("class_tasks entry " + std::to_string(c) + " out of range");
  }
}

int ModelConfig::class_for_task(int task_id) const {
  if (variant == Variant::MoCtrans) return (task_id >= 1 && task_id <= n_tasks) ? 1 : -1;
  auto it = std::find(class_tasks.begin() + (class_tasks.empty() ? 0 : 1), class_tasks.end(), task_id);
  if (it == class_tasks.end()) return -1;
  return static_cast<int>(it - class_tasks.begin());
}

ModelConfig paper_config() {
  ModelConfig c;
  c.c_base = 64;
  c.m = 4;
  c.levels = 4;
  c.heads = 8;
  c.image_hw = 256;
  return c;
}

ModelConfig desk_config() { return ModelConfig{}; }

}  // namespace moct::model
