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

#include "moctrans/training/protocol.hpp"

#include <algorithm>
#include <random>

#include "moctrans/error.hpp"

namespace moct::train {

std::string_view method_name(Method m) {
  switch (m) {
    case Method::MoCtrans: return "mo_ctrans";
    case Method::BaseMulti: return "base_multi";
    case Method::BaseSingle: return "base_single";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  if (name == "mo_ctrans") return Method::MoCtrans;
  if (name == "base_multi") return Method::BaseMulti;
  if (name == "base_single") return Method::BaseSingle;
  throw ConfigError("unknown method '" + std::string(name) + "' (expected mo_ctrans, base_multi or base_single)");
}

std::map<std::string, double> dataset_weights(const std::map<std::string, std::size_t>& sizes) {
  if (sizes.empty()) throw ConfigError("dataset_weights: no datasets");
  double mean_inv = 0;
  for (const auto& [name, n] : sizes) {
    if (n == 0) throw ConfigError("dataset_weights: dataset '" + name + "' has no subjects");
    mean_inv += 1.0 / static_cast<double>(n);
  }
  mean_inv /= static_cast<double>(sizes.size());
  std::map<std::string, double> out;
  for (const auto& [name, n] : sizes) out[name] = (1.0 / static_cast<double>(n)) / mean_inv;
  return out;
}

FoldSplit FoldPlan::split(int fold) const {
  if (fold < 0 || fold >= k) throw ConfigError("fold " + std::to_string(fold) + " outside [0," + std::to_string(k) + ")");
  const int val = (fold + 1) % k;
  FoldSplit s;
  for (const auto& [ref, f] : fold_of) {
    if (f == fold) s.test.push_back(ref);
    else if (f == val) s.validation.push_back(ref);
    else s.train.push_back(ref);
  }
  return s;
}

FoldPlan kfold_split(const std::map<std::string, std::vector<std::string>>& subjects, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("kfold_split: k must be >= 2");
  FoldPlan plan;
  plan.k = k;
  std::uint64_t salt = 0;
  for (const auto& [dataset, ids] : subjects) {
    if (ids.size() < static_cast<std::size_t>(k))
      throw ConfigError("kfold_split: dataset '" + dataset + "' has " + std::to_string(ids.size()) + " subjects, fewer than k=" +
                        std::to_string(k));
    std::vector<std::string> order(ids);
    std::sort(order.begin(), order.end());
    std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * ++salt));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const bool fresh = plan.fold_of.emplace(SubjectRef{dataset, order[i]}, static_cast<int>(i % static_cast<std::size_t>(k))).second;
      if (!fresh) throw ConfigError("kfold_split: subject '" + order[i] + "' listed twice in '" + dataset + "'");
    }
  }
  return plan;
}

FoldPlan kfold_split(const data::DatasetManifest& manifest, int k, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> subjects;
  for (const auto& d : manifest.datasets)
    for (const auto& s : d.subjects) subjects[d.name].push_back(s.id);
  return kfold_split(subjects, k, seed);
}

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ConfigError("train.lr must be > 0");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (!(smoothing > 0)) throw ConfigError("train.smoothing must be > 0");
  if (max_steps < 0) throw ConfigError("train.max_steps must be >= 0");
  for (const auto& [name, w] : weights)
    if (!(w >= 0)) throw ConfigError("train weight for '" + name + "' must be >= 0");
}

std::vector<std::string> method_datasets(Method method, const data::DatasetManifest& manifest, const std::string& dataset) {
  if (method == Method::BaseSingle) {
    if (dataset.empty()) throw ConfigError("base_single needs a dataset");
    (void)manifest.dataset(dataset);
    return {dataset};
  }
  std::vector<std::string> out;
  for (const auto& d : manifest.datasets) out.push_back(d.name);
  return out;
}

model::ModelConfig config_for_method(model::ModelConfig base, Method method, const data::DatasetManifest& manifest,
                                     const std::string& dataset) {
  base.n_tasks = static_cast<int>(manifest.tasks.size());
  switch (method) {
    case Method::MoCtrans:
      base.variant = model::Variant::MoCtrans;
      base.n_classes = 2;
      base.class_tasks.clear();
      break;
    case Method::BaseMulti:
      base.variant = model::Variant::Base;
      base.n_classes = base.n_tasks + 1;
      base.class_tasks.assign(1, 0);
      for (const auto& t : manifest.tasks) base.class_tasks.push_back(t.task_id);
      break;
    case Method::BaseSingle: {
      const auto& d = manifest.dataset(method_datasets(method, manifest, dataset).front());
      base.variant = model::Variant::Base;
      base.class_tasks.assign(1, 0);
      for (const auto& organ : d.train_organs()) base.class_tasks.push_back(d.organ_tasks.at(organ));
      base.n_classes = static_cast<int>(base.class_tasks.size());
      break;
    }
  }
  base.validate();
  return base;
}

}  // namespace moct::train
