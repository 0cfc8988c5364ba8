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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "moctrans/autodiff/tensor.hpp"
#include "moctrans/synthdata/volume.hpp"

namespace moct::data {

// One 2.5D training/evaluation sample.
struct SliceSample {
  ad::Tensor<float> slab;             // [3, H, W], channels (z-1, z, z+1)
  std::vector<std::uint8_t> target;   // H*W class labels of the middle slice
  int task_id = 0;
  std::string dataset;
  std::string subject;
  int slice = 0;
};

// Slab indices (z-1, z, z+1) with edge replication.
std::array<int, 3> slab_indices(int z, int depth);

// Per-volume zero-mean, unit-variance intensities.
Volume zscore(const Volume& v);

// Slab for slice z of an already-normalized volume, resized to target_hw.
ad::Tensor<float> make_slab(const Volume& normalized, int z, int target_hw);

// One binary sample per slice whose label is non-empty. Images are z-scored
// per volume then bilinearly resized; labels are resized nearest and
// binarized (non-zero = foreground).
std::vector<SliceSample> extract_samples(const Volume& volume, const LabelVolume& labels, int task_id, int target_hw,
                                         const std::string& dataset = {}, const std::string& subject = {});

// As extract_samples but label values are kept as class indices.
std::vector<SliceSample> extract_multiclass(const Volume& volume, const LabelVolume& labels, int target_hw,
                                            const std::string& dataset = {}, const std::string& subject = {});

}  // namespace moct::data
