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

#include <map>
#include <span>
#include <string>
#include <vector>

#include "moctrans/model/config.hpp"
#include "moctrans/synthdata/extract.hpp"
#include "moctrans/synthdata/manifest.hpp"
#include "moctrans/training/protocol.hpp"

namespace moct::train {

// A subject read from disk with its image already z-scored.
struct LoadedSubject {
  std::string dataset;
  std::string subject;
  std::string view;
  data::Volume image;  // original intensities
  data::Volume normalized;
  std::map<std::string, data::LabelVolume> labels;     // organ -> train mask
  std::map<std::string, data::LabelVolume> eval_only;  // organ -> evaluation mask
};

LoadedSubject load_subject(const data::DatasetManifest& manifest, const SubjectRef& ref);

// One binary sample per label value present in `sample.target`, carrying the
// task id `class_to_task` maps it to. Values absent from the map are
// treated as background.
std::vector<data::SliceSample> split_multiclass(const data::SliceSample& sample, const std::map<int, int>& class_to_task);

// Label volume whose value at each voxel is the class of the organ there,
// using organ -> class.
data::LabelVolume compose_labels(const LoadedSubject& subject, const std::map<std::string, int>& organ_class);

// Training samples for `method`:
//   mo_ctrans   per-organ binary samples with that organ's task id
//   base_*      one multi-class sample per non-empty slice, classes from `config`
std::vector<data::SliceSample> training_samples(const LoadedSubject& subject, const data::DatasetManifest& manifest, Method method,
                                                const model::ModelConfig& config);

// Binary per-task samples for evaluation on train labels, and on eval-only
// labels when requested. Every sample's target is 0/1.
std::vector<data::SliceSample> task_samples(const LoadedSubject& subject, const data::DatasetManifest& manifest, int target_hw,
                                            bool include_eval_only);

}  // namespace moct::train
