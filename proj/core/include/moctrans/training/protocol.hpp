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
#include <string_view>
#include <vector>

#include "moctrans/model/config.hpp"
#include "moctrans/synthdata/manifest.hpp"

namespace moct::train {

enum class Method { MoCtrans, BaseMulti, BaseSingle };

std::string_view method_name(Method m);
Method parse_method(std::string_view name);

// w_k = (1/size_k) / mean_j(1/size_j).
std::map<std::string, double> dataset_weights(const std::map<std::string, std::size_t>& sizes);

struct SubjectRef {
  std::string dataset;
  std::string subject;
  friend auto operator<=>(const SubjectRef&, const SubjectRef&) = default;
};

struct FoldSplit {
  std::vector<SubjectRef> train, validation, test;
};

// Subject -> fold index, assigned per dataset.
struct FoldPlan {
  int k = 5;
  std::map<SubjectRef, int> fold_of;

  // test = fold f, validation = fold (f + 1) mod k, train = the rest.
  FoldSplit split(int fold) const;
};

// Per dataset: seeded shuffle, then dealt round-robin into k folds.
FoldPlan kfold_split(const std::map<std::string, std::vector<std::string>>& subjects, int k, std::uint64_t seed);
FoldPlan kfold_split(const data::DatasetManifest& manifest, int k, std::uint64_t seed);

struct TrainConfig {
  double lr = 1e-4;
  int epochs = 30;
  int batch_size = 4;
  std::uint64_t seed = 0;
  double smoothing = 1.0;
  // Empty means inverse-size weights from dataset_weights.
  std::map<std::string, double> weights;
  // Stop after this many optimizer steps in total; 0 = no limit.
  int max_steps = 0;

  // Throws ConfigError.
  void validate() const;
};

// Model config for a method: mo_ctrans keeps 2 classes; base_multi gets one
// class per task; base_single one class per organ of `dataset`.
model::ModelConfig config_for_method(model::ModelConfig base, Method method, const data::DatasetManifest& manifest,
                                     const std::string& dataset = {});

// Datasets a method trains on.
std::vector<std::string> method_datasets(Method method, const data::DatasetManifest& manifest, const std::string& dataset = {});

}  // namespace moct::train
