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
#include <optional>
#include <utility>
#include <vector>

namespace moct::eval {

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major, non-zero = foreground
  double sy = 1.0;                    // mm per row
  double sx = 1.0;                    // mm per column

  BinaryMask() = default;
  BinaryMask(int h, int w, double spacing_y = 1.0, double spacing_x = 1.0);
  BinaryMask(int h, int w, std::vector<std::uint8_t> values, double spacing_y = 1.0, double spacing_x = 1.0);

  bool at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int y, int x, bool v = true) { pixels[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
};

// 2|P & G| / (|P| + |G|); 1 when both are empty.
double dice(const BinaryMask& pred, const BinaryMask& gt);

// Foreground pixels with a 4-neighbour that is background or off-image,
// as (y, x) in row-major order.
std::vector<std::pair<int, int>> boundary_points(const BinaryMask& mask);

struct AssdResult {
  std::optional<double> value;  // absent when either mask is empty
  bool pred_empty = false;
  bool gt_empty = false;
};

// Mean of nearest-boundary distances in both directions, in mm.
AssdResult assd(const BinaryMask& pred, const BinaryMask& gt);

}  // namespace moct::eval
