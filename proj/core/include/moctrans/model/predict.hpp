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
#include <vector>

#include "moctrans/model/model.hpp"

namespace moct::model {

// Stacks [C,H,W] slabs into one [N,C,H,W] batch.
ad::Tensor<float> stack_slabs(std::span<const ad::Tensor<float>* const> slabs);

// Eval-mode argmax class per pixel, one H*W vector per slab.
std::vector<std::vector<std::uint8_t>> predict_classes(MoCtrans<float>& model, std::span<const ad::Tensor<float>* const> slabs,
                                                       std::span<const int> task_ids);

// 1 where the argmax is the class representing task_id, else 0. Slabs are
// processed in chunks of `batch`.
std::vector<std::vector<std::uint8_t>> predict_task_masks(MoCtrans<float>& model, std::span<const ad::Tensor<float>* const> slabs,
                                                          int task_id, std::size_t batch = 8);

}  // namespace moct::model
