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
#include <string_view>
#include <vector>

namespace moct::model {

enum class Variant {
  MoCtrans,  // task token inserted at the deepest decoder level
  Base,      // identical network without the task token
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

// Architecture hyperparameters. Level 0 is full resolution, level
// `levels - 1` the deepest.
struct ModelConfig {
  int c_base = 16;
  int m = 4;
  int levels = 4;
  int heads = 4;
  int ffn_expansion = 2;
  int blocks_per_level = 3;
  int n_tasks = 4;
  int n_classes = 2;
  int in_channels = 3;
  int image_hw = 64;
  Variant variant = Variant::MoCtrans;
  // Output class -> task id, 0 for background. Base variants use it to map
  // their argmax onto tasks; the task-conditioned variant emits class 1 for
  // whichever task it was prompted with.
  std::vector<int> class_tasks;

  // Throws ConfigError naming the violated invariant (and level, if any).
  void validate() const;

  int deepest() const { return levels - 1; }
  // H / 2^(levels-1): side of the deepest feature map.
  int grid_side() const { return image_hw >> (levels - 1); }
  // n: image tokens per level, identical at every level.
  int token_count() const { return grid_side() * grid_side(); }
  // Sequence length inside the decoder (n + 1 with the task token).
  int sequence_length() const { return token_count() + (variant == Variant::MoCtrans ? 1 : 0); }
  int patch_side(int level) const { return 1 << (levels - 1 - level); }
  int encoder_channels(int level) const { return c_base << level; }
  int reduced_channels(int level) const { return (c_base << level) / m; }
  // d_i = p_i^2 * 2^i * C / m.
  int token_dim(int level) const { return patch_side(level) * patch_side(level) * reduced_channels(level); }

  // Class index that represents `task_id` in this model's output, or -1.
  int class_for_task(int task_id) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// C=64, m=4, 4 levels on 256x256 slabs.
ModelConfig paper_config();
// C=16, m=4, 4 levels on 64x64 slabs.
ModelConfig desk_config();

}  // namespace moct::model
