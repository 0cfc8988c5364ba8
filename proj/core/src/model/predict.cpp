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

#include "moctrans/model/predict.hpp"

#include <algorithm>

#include "moctrans/error.hpp"

namespace moct::model {

ad::Tensor<float> stack_slabs(std::span<const ad::Tensor<float>* const> slabs) {
  if (slabs.empty()) throw ShapeError("stack_slabs: no slabs");
  const ad::Shape& s0 = slabs.front()->shape;
  ad::Shape shape{slabs.size()};
  shape.insert(shape.end(), s0.begin(), s0.end());
  ad::Tensor<float> out(shape);
  const std::size_t each = slabs.front()->size();
  for (std::size_t i = 0; i < slabs.size(); ++i) {
    if (slabs[i]->shape != s0) throw ShapeError("stack_slabs: slab " + std::to_string(i) + " has shape " + ad::to_string(slabs[i]->shape));
    std::copy(slabs[i]->data.begin(), slabs[i]->data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(i * each));
  }
  return out;
}

std::vector<std::vector<std::uint8_t>> predict_classes(MoCtrans<float>& model, std::span<const ad::Tensor<float>* const> slabs,
                                                       std::span<const int> task_ids) {
  ad::Tape<float> tape(false);
  const ad::Var<float> logits = model.forward(tape, stack_slabs(slabs), task_ids, Mode::Eval);
  const ad::Shape& s = logits.shape();
  const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
  const auto& v = logits.value().data;
  std::vector<std::vector<std::uint8_t>> out(n, std::vector<std::uint8_t>(hw));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t i = 0; i < hw; ++i) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < c; ++k)
        if (v[(b * c + k) * hw + i] > v[(b * c + best) * hw + i]) best = k;
      out[b][i] = static_cast<std::uint8_t>(best);
    }
  return out;
}

std::vector<std::vector<std::uint8_t>> predict_task_masks(MoCtrans<float>& model, std::span<const ad::Tensor<float>* const> slabs,
                                                          int task_id, std::size_t batch) {
  const int cls = model.config().class_for_task(task_id);
  if (cls < 0) throw ConfigError("model has no output class for task " + std::to_string(task_id));
  std::vector<std::vector<std::uint8_t>> out;
  out.reserve(slabs.size());
  for (std::size_t start = 0; start < slabs.size(); start += batch) {
    const std::size_t count = std::min(batch, slabs.size() - start);
    const std::vector<int> ids(count, task_id);
    for (auto& classes : predict_classes(model, slabs.subspan(start, count), ids)) {
      for (auto& v : classes) v = v == cls ? 1 : 0;
      out.push_back(std::move(classes));
    }
  }
  return out;
}

}  // namespace moct::model
