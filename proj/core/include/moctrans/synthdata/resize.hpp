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

namespace moct::data {

enum class ResizeMode { Bilinear, Nearest };

// Resampling with pixel centres at (i + 0.5) / n (align-corners false).
// Bilinear clamps at the border; nearest rounds exact ties down.
std::vector<float> resize2d(std::span<const float> src, int height, int width, int target_h, int target_w,
                            ResizeMode mode = ResizeMode::Bilinear);
std::vector<std::uint8_t> resize_labels(std::span<const std::uint8_t> src, int height, int width, int target_h,
                                        int target_w);

// Source index chosen by nearest-neighbour resampling for output index i.
int nearest_source_index(int i, int src_len, int dst_len);

}  // namespace moct::data
