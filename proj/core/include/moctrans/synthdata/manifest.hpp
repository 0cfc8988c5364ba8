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
#include <map>
#include <string>
#include <vector>

#include "moctrans/synthdata/volume.hpp"

namespace moct::data {

// A segmentation task: one organ in one view. The same organ in a
// different view is a different task.
struct TaskSpec {
  int task_id = 0;
  std::string view;
  std::string organ;
  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct SubjectRecord {
  std::string id;
  std::string image;                            // relative to the manifest directory
  std::map<std::string, std::string> labels;    // organ -> train label path
  std::map<std::string, std::string> eval_only; // organ -> evaluation-only label path
  friend bool operator==(const SubjectRecord&, const SubjectRecord&) = default;
};

struct DatasetRecord {
  std::string name;
  std::string view;
  std::vector<SubjectRecord> subjects;
  // Organ -> task id for every organ labelled (for training or evaluation) in this dataset.
  std::map<std::string, int> organ_tasks;

  // Organs with train labels, ordered by task id.
  std::vector<std::string> train_organs() const;
  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  std::string scale;
  std::vector<TaskSpec> tasks;
  std::vector<DatasetRecord> datasets;
  std::string root;  // directory holding manifest.json; not serialized

  const DatasetRecord& dataset(const std::string& name) const;
  const TaskSpec& task(int task_id) const;
  std::string resolve(const std::string& relative) const;
  // Tasks whose view matches `view`, ordered by id.
  std::vector<TaskSpec> tasks_for_view(const std::string& view) const;

  // Checks task ids are contiguous from 1, (view, organ) pairs distinct,
  // organ maps consistent with the task list, and eval-only organs disjoint
  // from train labels. Throws DataError.
  void validate() const;
  // Additionally checks every referenced file exists.
  void validate_paths() const;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text, const std::string& root);

void write_manifest(const std::string& path, const DatasetManifest& m);
DatasetManifest read_manifest(const std::string& path);

}  // namespace moct::data
