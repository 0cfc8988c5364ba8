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

#include <optional>
#include <string>
#include <vector>

#include "moctrans/model/model.hpp"
#include "moctrans/synthdata/manifest.hpp"
#include "moctrans/training/samples.hpp"

namespace moct::eval {

// Metrics for one (subject, task), aggregated over the slices whose ground
// truth is non-empty.
struct SubjectTaskResult {
  std::string dataset;
  std::string subject;
  int task_id = 0;
  bool eval_only = false;
  int slices = 0;
  double dice = 0;                    // mean slice Dice
  std::optional<double> assd_mm;      // mean over slices with a non-empty prediction
  int empty_predictions = 0;
};

struct EvalWarning {
  std::string dataset;
  std::string subject;
  int task_id = 0;
  std::string reason;
};

// Runs the model over every task of the subject's view: builds each slab,
// resizes to the model size, predicts, resizes the mask back (nearest) and
// scores it against train or eval-only ground truth. Tasks without ground
// truth or without an output class are skipped with a warning.
std::vector<SubjectTaskResult> evaluate_subject(model::MoCtrans<float>& model, const train::LoadedSubject& subject,
                                                const data::DatasetManifest& manifest, std::vector<EvalWarning>* warnings = nullptr);

// Per-slice masks at original resolution for `task_id`, one per slice.
std::vector<std::vector<std::uint8_t>> predict_volume(model::MoCtrans<float>& model, const data::Volume& image, int task_id);

}  // namespace moct::eval
