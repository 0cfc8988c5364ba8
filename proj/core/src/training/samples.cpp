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

#include "moctrans/training/samples.hpp"

#include <algorithm>

#include "moctrans/error.hpp"

namespace moct::train {

using data::LabelVolume;
using data::SliceSample;

LoadedSubject load_subject(const data::DatasetManifest& manifest, const SubjectRef& ref) {
  const data::DatasetRecord& d = manifest.dataset(ref.dataset);
  auto it = std::find_if(d.subjects.begin(), d.subjects.end(), [&](const auto& s) { return s.id == ref.subject; });
  if (it == d.subjects.end()) throw DataError("dataset '" + ref.dataset + "' has no subject '" + ref.subject + "'");
  LoadedSubject out;
  out.dataset = ref.dataset;
  out.subject = ref.subject;
  out.view = d.view;
  out.image = data::read_volume(manifest.resolve(it->image));
  out.normalized = data::zscore(out.image);
  auto load = [&](const std::map<std::string, std::string>& paths, std::map<std::string, LabelVolume>& into) {
    for (const auto& [organ, path] : paths) {
      LabelVolume l = data::read_labels(manifest.resolve(path));
      if (!l.same_dims(out.image.depth, out.image.height, out.image.width))
        throw DataError(path + ": label dims " + std::to_string(l.depth) + "x" + std::to_string(l.height) + "x" + std::to_string(l.width) +
                        " differ from the image");
      into.emplace(organ, std::move(l));
    }
  };
  load(it->labels, out.labels);
  load(it->eval_only, out.eval_only);
  return out;
}

std::vector<SliceSample> split_multiclass(const SliceSample& sample, const std::map<int, int>& class_to_task) {
  std::vector<SliceSample> out;
  for (const auto& [cls, task] : class_to_task) {
    if (cls == 0) continue;
    const auto value = static_cast<std::uint8_t>(cls);
    if (std::find(sample.target.begin(), sample.target.end(), value) == sample.target.end()) continue;
    SliceSample s;
    s.slab = sample.slab;
    s.target.resize(sample.target.size());
    std::transform(sample.target.begin(), sample.target.end(), s.target.begin(), [&](std::uint8_t v) { return v == value ? 1 : 0; });
    s.task_id = task;
    s.dataset = sample.dataset;
    s.subject = sample.subject;
    s.slice = sample.slice;
    out.push_back(std::move(s));
  }
  return out;
}

LabelVolume compose_labels(const LoadedSubject& subject, const std::map<std::string, int>& organ_class) {
  LabelVolume out(subject.image.depth, subject.image.height, subject.image.width, subject.image.spacing);
  for (const auto& [organ, cls] : organ_class) {
    const LabelVolume& l = subject.labels.at(organ);
    for (std::size_t i = 0; i < l.values.size(); ++i)
      if (l.values[i] != 0) out.values[i] = static_cast<std::uint8_t>(cls);
  }
  return out;
}

std::vector<SliceSample> training_samples(const LoadedSubject& subject, const data::DatasetManifest& manifest, Method method,
                                          const model::ModelConfig& config) {
  const data::DatasetRecord& d = manifest.dataset(subject.dataset);
  std::map<std::string, int> organ_class;
  std::map<int, int> class_task;
  for (const auto& [organ, mask] : subject.labels) {
    const int task = d.organ_tasks.at(organ);
    const int cls = method == Method::MoCtrans ? task : config.class_for_task(task);
    if (cls < 0) throw ConfigError("model has no output class for task " + std::to_string(task));
    organ_class[organ] = cls;
    class_task[cls] = task;
  }
  const LabelVolume labels = compose_labels(subject, organ_class);
  // extract_multiclass z-scores internally; feed the raw image.
  std::vector<SliceSample> multi = data::extract_multiclass(subject.image, labels, config.image_hw, subject.dataset, subject.subject);
  if (method != Method::MoCtrans) {
    for (SliceSample& s : multi) {
      // Base variants ignore the task id; record the first class present.
      for (const auto& [cls, task] : class_task)
        if (std::count(s.target.begin(), s.target.end(), static_cast<std::uint8_t>(cls)) > 0) {
          s.task_id = task;
          break;
        }
    }
    return multi;
  }
  std::vector<SliceSample> out;
  for (const SliceSample& s : multi)
    for (SliceSample& b : split_multiclass(s, class_task)) out.push_back(std::move(b));
  return out;
}

std::vector<SliceSample> task_samples(const LoadedSubject& subject, const data::DatasetManifest& manifest, int target_hw,
                                      bool include_eval_only) {
  const data::DatasetRecord& d = manifest.dataset(subject.dataset);
  std::vector<std::pair<int, const LabelVolume*>> masks;
  for (const auto& [organ, mask] : subject.labels) masks.emplace_back(d.organ_tasks.at(organ), &mask);
  if (include_eval_only)
    for (const auto& [organ, mask] : subject.eval_only) masks.emplace_back(d.organ_tasks.at(organ), &mask);
  std::sort(masks.begin(), masks.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<SliceSample> out;
  for (const auto& [task, mask] : masks)
    for (SliceSample& s : data::extract_samples(subject.image, *mask, task, target_hw, subject.dataset, subject.subject))
      out.push_back(std::move(s));
  return out;
}

}  // namespace moct::train
