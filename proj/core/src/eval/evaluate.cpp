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

#include "moctrans/eval/evaluate.hpp"

#include <algorithm>

#include "moctrans/eval/metrics.hpp"
#include "moctrans/model/predict.hpp"
#include "moctrans/synthdata/extract.hpp"
#include "moctrans/synthdata/resize.hpp"

namespace moct::eval {
namespace {

bool slice_nonempty(const data::LabelVolume& l, int z) {
  const std::size_t plane = static_cast<std::size_t>(l.height) * static_cast<std::size_t>(l.width);
  const auto begin = l.values.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(z));
  return std::any_of(begin, begin + static_cast<std::ptrdiff_t>(plane), [](std::uint8_t v) { return v != 0; });
}

std::vector<std::vector<std::uint8_t>> predict_slices(model::MoCtrans<float>& model, const data::Volume& normalized,
                                                      const std::vector<int>& slices, int task_id) {
  const int hw = model.config().image_hw;
  std::vector<ad::Tensor<float>> slabs;
  slabs.reserve(slices.size());
  for (int z : slices) slabs.push_back(data::make_slab(normalized, z, hw));
  std::vector<const ad::Tensor<float>*> ptrs;
  for (const auto& s : slabs) ptrs.push_back(&s);
  auto masks = model::predict_task_masks(model, ptrs, task_id);
  for (auto& m : masks)
    m = data::resize_labels(m, hw, hw, normalized.height, normalized.width);
  return masks;
}

}  // namespace

std::vector<std::vector<std::uint8_t>> predict_volume(model::MoCtrans<float>& model, const data::Volume& image, int task_id) {
  std::vector<int> slices(static_cast<std::size_t>(image.depth));
  for (int z = 0; z < image.depth; ++z) slices[static_cast<std::size_t>(z)] = z;
  return predict_slices(model, data::zscore(image), slices, task_id);
}

std::vector<SubjectTaskResult> evaluate_subject(model::MoCtrans<float>& model, const train::LoadedSubject& subject,
                                                const data::DatasetManifest& manifest, std::vector<EvalWarning>* warnings) {
  const data::DatasetRecord& d = manifest.dataset(subject.dataset);
  auto warn = [&](int task, std::string reason) {
    if (warnings) warnings->push_back({subject.dataset, subject.subject, task, std::move(reason)});
  };
  std::vector<SubjectTaskResult> out;
  for (const data::TaskSpec& task : manifest.tasks_for_view(subject.view)) {
    const data::LabelVolume* gt = nullptr;
    bool eval_only = false;
    if (auto it = subject.labels.find(task.organ); it != subject.labels.end() && d.organ_tasks.count(task.organ)) {
      gt = &it->second;
    } else if (auto jt = subject.eval_only.find(task.organ); jt != subject.eval_only.end()) {
      gt = &jt->second;
      eval_only = true;
    }
    if (gt == nullptr) {
      warn(task.task_id, "no ground truth for " + task.organ);
      continue;
    }
    if (model.config().class_for_task(task.task_id) < 0) {
      warn(task.task_id, "model has no output class for task");
      continue;
    }
    std::vector<int> slices;
    for (int z = 0; z < gt->depth; ++z)
      if (slice_nonempty(*gt, z)) slices.push_back(z);
    if (slices.empty()) {
      warn(task.task_id, "ground truth is empty on every slice");
      continue;
    }
    const auto masks = predict_slices(model, subject.normalized, slices, task.task_id);
    SubjectTaskResult r;
    r.dataset = subject.dataset;
    r.subject = subject.subject;
    r.task_id = task.task_id;
    r.eval_only = eval_only;
    r.slices = static_cast<int>(slices.size());
    double dice_sum = 0, assd_sum = 0;
    int assd_n = 0;
    const std::size_t plane = static_cast<std::size_t>(gt->height) * static_cast<std::size_t>(gt->width);
    for (std::size_t i = 0; i < slices.size(); ++i) {
      const auto begin = gt->values.begin() + static_cast<std::ptrdiff_t>(plane * static_cast<std::size_t>(slices[i]));
      BinaryMask g(gt->height, gt->width, std::vector<std::uint8_t>(begin, begin + static_cast<std::ptrdiff_t>(plane)), gt->spacing.y,
                   gt->spacing.x);
      BinaryMask p(gt->height, gt->width, masks[i], gt->spacing.y, gt->spacing.x);
      dice_sum += dice(p, g);
      const AssdResult a = assd(p, g);
      if (a.pred_empty) ++r.empty_predictions;
      if (a.value) {
        assd_sum += *a.value;
        ++assd_n;
      }
    }
    r.dice = dice_sum / static_cast<double>(slices.size());
    if (assd_n > 0) r.assd_mm = assd_sum / assd_n;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace moct::eval
