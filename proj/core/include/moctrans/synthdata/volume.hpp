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
#include <string>
#include <vector>

#include "moctrans/error.hpp"

namespace moct::data {

// Millimetres per voxel along (z, y, x).
struct Spacing {
  float z = 1, y = 1, x = 1;
  friend bool operator==(const Spacing&, const Spacing&) = default;
};

// Slice-major 3D grid: index = (z * height + y) * width + x.
template <typename V>
struct Grid3 {
  int depth = 0, height = 0, width = 0;
  Spacing spacing;
  std::vector<V> values;

  Grid3() = default;
  Grid3(int d, int h, int w, Spacing s, V fill = V{})
      : depth(d), height(h), width(w), spacing(s), values(static_cast<std::size_t>(d) * h * w, fill) {}

  std::size_t slice_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<V> slice(int z) { return {values.data() + static_cast<std::size_t>(z) * slice_size(), slice_size()}; }
  std::span<const V> slice(int z) const { return {values.data() + static_cast<std::size_t>(z) * slice_size(), slice_size()}; }
  V& at(int z, int y, int x) { return values[(static_cast<std::size_t>(z) * height + y) * width + x]; }
  const V& at(int z, int y, int x) const { return values[(static_cast<std::size_t>(z) * height + y) * width + x]; }
  bool same_dims(int d, int h, int w) const { return depth == d && height == h && width == w; }

  friend bool operator==(const Grid3&, const Grid3&) = default;
};

using Volume = Grid3<float>;
using LabelVolume = Grid3<std::uint8_t>;

// .mvol layout (little-endian): "MVOL1", dtype byte (0 = float32, 1 = uint8
// label), D, H, W as u32, sz, sy, sx as float32, then the slice-major payload.
inline constexpr std::size_t kMvolHeaderBytes = 30;

std::vector<std::uint8_t> encode_mvol(const Volume& v);
std::vector<std::uint8_t> encode_mvol(const LabelVolume& v);
Volume decode_volume(const std::vector<std::uint8_t>& bytes, const std::string& source = "mvol");
LabelVolume decode_labels(const std::vector<std::uint8_t>& bytes, const std::string& source = "mvol");

void write_mvol(const std::string& path, const Volume& v);
void write_mvol(const std::string& path, const LabelVolume& v);
Volume read_volume(const std::string& path);
LabelVolume read_labels(const std::string& path);

}  // namespace moct::data
