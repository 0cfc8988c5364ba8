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

#include "moctrans/synthdata/resize.hpp"

#include <algorithm>
#include <cmath>

#include "moctrans/error.hpp"

namespace moct::data {
namespace {

void check(int h, int w, int th, int tw, std::size_t n) {
  if (h < 1 || w < 1 || th < 1 || tw < 1) throw ShapeError("resize2d: dimensions must be positive");
  if (n != static_cast<std::size_t>(h) * w) throw ShapeError("resize2d: source size does not match dims");
}

// Integer ceil(a / b) for b > 0.
long long ceil_div(long long a, long long b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }

}  // namespace

int nearest_source_index(int i, int src_len, int dst_len) {
  // Source centre (2i + 1) * src / (2 * dst) - 1/2; ties round down.
  const long long num = static_cast<long long>(2 * i + 1) * src_len - 2LL * dst_len;
  const long long idx = ceil_div(num, 2LL * dst_len);
  return static_cast<int>(std::clamp<long long>(idx, 0, src_len - 1));
}

std::vector<float> resize2d(std::span<const float> src, int height, int width, int target_h, int target_w, ResizeMode mode) {
  check(height, width, target_h, target_w, src.size());
  std::vector<float> out(static_cast<std::size_t>(target_h) * target_w);
  if (height == target_h && width == target_w) {
    std::copy(src.begin(), src.end(), out.begin());
    return out;
  }
  if (mode == ResizeMode::Nearest) {
    for (int y = 0; y < target_h; ++y) {
      const int sy = nearest_source_index(y, height, target_h);
      for (int x = 0; x < target_w; ++x)
        out[static_cast<std::size_t>(y) * target_w + x] = src[static_cast<std::size_t>(sy) * width + nearest_source_index(x, width, target_w)];
    }
    return out;
  }
  const double sy_scale = static_cast<double>(height) / target_h;
  const double sx_scale = static_cast<double>(width) / target_w;
  for (int y = 0; y < target_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < target_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, width - 1);
      const double wx = fx - x0;
      auto at = [&](int yy, int xx) { return static_cast<double>(src[static_cast<std::size_t>(yy) * width + xx]); };
      const double top = at(y0, x0) * (1 - wx) + at(y0, x1) * wx;
      const double bottom = at(y1, x0) * (1 - wx) + at(y1, x1) * wx;
      out[static_cast<std::size_t>(y) * target_w + x] = static_cast<float>(top * (1 - wy) + bottom * wy);
    }
  }
  return out;
}

std::vector<std::uint8_t> resize_labels(std::span<const std::uint8_t> src, int height, int width, int target_h, int target_w) {
  check(height, width, target_h, target_w, src.size());
  std::vector<std::uint8_t> out(static_cast<std::size_t>(target_h) * target_w);
  for (int y = 0; y < target_h; ++y) {
    const int sy = nearest_source_index(y, height, target_h);
    for (int x = 0; x < target_w; ++x)
      out[static_cast<std::size_t>(y) * target_w + x] = src[static_cast<std::size_t>(sy) * width + nearest_source_index(x, width, target_w)];
  }
  return out;
}

}  // namespace moct::data
