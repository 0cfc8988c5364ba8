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

#include "moctrans/synthdata/extract.hpp"

#include <algorithm>
#include <cmath>

#include "moctrans/synthdata/resize.hpp"

namespace moct::data {

std::array<int, 3> slab_indices(int z, int depth) {
  return {std::max(z - 1, 0), z, std::min(z + 1, depth - 1)};
}

Volume zscore(const Volume& v) {
  double s = 0, ss = 0;
  for (float x : v.values) s += x;
  const double n = static_cast<double>(v.values.size());
  const double mu = n > 0 ? s / n : 0.0;
  for (float x : v.values) ss += (x - mu) * (x - mu);
  const double sd = n > 0 ? std::sqrt(ss / n) : 0.0;
  const double inv = sd > 0 ? 1.0 / sd : 1.0;
  Volume out = v;
  for (float& x : out.values) x = static_cast<float>((x - mu) * inv);
  return out;
}

ad::Tensor<float> make_slab(const Volume& normalized, int z, int target_hw) {
  const std::size_t plane = static_cast<std::size_t>(target_hw) * target_hw;
  ad::Tensor<float> slab(ad::Shape{3, static_cast<std::size_t>(target_hw), static_cast<std::size_t>(target_hw)});
  const auto idx = slab_indices(z, normalized.depth);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto resized = resize2d(normalized.slice(idx[c]), normalized.height, normalized.width, target_hw, target_hw,
                                  ResizeMode::Bilinear);
    std::copy(resized.begin(), resized.end(), slab.data.begin() + static_cast<std::ptrdiff_t>(c * plane));
  }
  return slab;
}

namespace {

std::vector<SliceSample> extract(const Volume& volume, const LabelVolume& labels, int task_id, int target_hw,
                                 const std::string& dataset, const std::string& subject, bool binarize) {
  if (!labels.same_dims(volume.depth, volume.height, volume.width))
    throw ShapeError("extract_samples: label volume dims do not match the image volume");
  std::vector<SliceSample> out;
  Volume normalized;
  bool prepared = false;
  for (int z = 0; z < labels.depth; ++z) {
    const auto lab = labels.slice(z);
    if (std::none_of(lab.begin(), lab.end(), [](std::uint8_t v) { return v != 0; })) continue;
    if (!prepared) {
      normalized = zscore(volume);
      prepared = true;
    }
    SliceSample s;
    s.slab = make_slab(normalized, z, target_hw);
    s.target = resize_labels(lab, labels.height, labels.width, target_hw, target_hw);
    if (binarize)
      for (auto& v : s.target) v = v != 0 ? 1 : 0;
    s.task_id = task_id;
    s.dataset = dataset;
    s.subject = subject;
    s.slice = z;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

std::vector<SliceSample> extract_samples(const Volume& volume, const LabelVolume& labels, int task_id, int target_hw,
                                         const std::string& dataset, const std::string& subject) {
  return extract(volume, labels, task_id, target_hw, dataset, subject, true);
}

std::vector<SliceSample> extract_multiclass(const Volume& volume, const LabelVolume& labels, int target_hw,
                                            const std::string& dataset, const std::string& subject) {
  return extract(volume, labels, 0, target_hw, dataset, subject, false);
}

}  // namespace moct::data
