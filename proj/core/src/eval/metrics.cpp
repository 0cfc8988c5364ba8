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

#include "moctrans/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "moctrans/error.hpp"

namespace moct::eval {
namespace {

void check_dims(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (a.height != b.height || a.width != b.width)
    throw ShapeError(std::string(what) + ": mask dims " + std::to_string(a.height) + "x" + std::to_string(a.width) + " vs " +
                     std::to_string(b.height) + "x" + std::to_string(b.width));
}

}  // namespace

BinaryMask::BinaryMask(int h, int w, double spacing_y, double spacing_x)
    : BinaryMask(h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(std::max(h, 0)) * static_cast<std::size_t>(std::max(w, 0))),
                 spacing_y, spacing_x) {}

BinaryMask::BinaryMask(int h, int w, std::vector<std::uint8_t> values, double spacing_y, double spacing_x)
    : height(h), width(w), pixels(std::move(values)), sy(spacing_y), sx(spacing_x) {
  if (h <= 0 || w <= 0) throw ShapeError("BinaryMask: dims must be positive");
  if (!(sy > 0) || !(sx > 0)) throw ShapeError("BinaryMask: spacing must be positive");
  if (pixels.size() != static_cast<std::size_t>(h) * static_cast<std::size_t>(w))
    throw ShapeError("BinaryMask: " + std::to_string(pixels.size()) + " pixels for " + std::to_string(h) + "x" + std::to_string(w));
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v != 0; }));
}

double dice(const BinaryMask& pred, const BinaryMask& gt) {
  check_dims(pred, gt, "dice");
  std::size_t inter = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < pred.pixels.size(); ++i) {
    const bool a = pred.pixels[i] != 0, b = gt.pixels[i] != 0;
    p += a;
    g += b;
    inter += a && b;
  }
  if (p + g == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

std::vector<std::pair<int, int>> boundary_points(const BinaryMask& mask) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!mask.at(y, x)) continue;
      const bool edge = y == 0 || x == 0 || y == mask.height - 1 || x == mask.width - 1 || !mask.at(y - 1, x) ||
                        !mask.at(y + 1, x) || !mask.at(y, x - 1) || !mask.at(y, x + 1);
      if (edge) out.emplace_back(y, x);
    }
  return out;
}

AssdResult assd(const BinaryMask& pred, const BinaryMask& gt) {
  check_dims(pred, gt, "assd");
  if (pred.sy != gt.sy || pred.sx != gt.sx) throw ShapeError("assd: masks have different spacing");
  AssdResult r;
  r.pred_empty = pred.empty();
  r.gt_empty = gt.empty();
  if (r.pred_empty || r.gt_empty) return r;
  const auto sp = boundary_points(pred), sg = boundary_points(gt);
  auto directed = [&](const std::vector<std::pair<int, int>>& from, const std::vector<std::pair<int, int>>& to) {
    double total = 0;
    for (const auto& [ay, ax] : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& [by, bx] : to) {
        const double dy = (ay - by) * pred.sy, dx = (ax - bx) * pred.sx;
        best = std::min(best, dy * dy + dx * dx);
      }
      total += std::sqrt(best);
    }
    return total;
  };
  r.value = (directed(sp, sg) + directed(sg, sp)) / static_cast<double>(sp.size() + sg.size());
  return r;
}

}  // namespace moct::eval
