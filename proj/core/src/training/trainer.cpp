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

#include "moctrans/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <set>

#include "moctrans/error.hpp"
#include "moctrans/model/predict.hpp"
#include "moctrans/training/losses.hpp"
#include "moctrans/training/samples.hpp"

namespace moct::train {

using data::SliceSample;

Trainer::Trainer(model::MoCtrans<float> model, const TrainConfig& config) : model_(std::move(model)), config_(config) {
  config_.validate();
  adam_.config.lr = config_.lr;
}

double Trainer::step(std::span<const SliceSample* const> batch, std::span<const double> weights) {
  if (batch.empty()) throw ShapeError("Trainer::step: empty batch");
  if (weights.size() != batch.size()) throw ShapeError("Trainer::step: one weight per sample required");
  std::vector<const ad::Tensor<float>*> slabs;
  std::vector<int> tasks;
  std::vector<std::uint8_t> labels;
  for (const SliceSample* s : batch) {
    slabs.push_back(&s->slab);
    tasks.push_back(s->task_id);
    labels.insert(labels.end(), s->target.begin(), s->target.end());
  }
  model_.params().zero_grad();
  ad::Tape<float> tape;
  const ad::Var<float> logits = model_.forward(tape, model::stack_slabs(slabs), tasks, model::Mode::Train);
  const ad::Var<float> loss = combined_loss(logits, labels, config_.smoothing, weights);
  const double value = loss.value()[0];
  if (!std::isfinite(value)) throw NumericalError("non-finite loss at step " + std::to_string(steps_ + 1));
  tape.backward(loss);
  const auto named = model_.params().learnable();
  ad::adam_step<float>(named, adam_);
  ++steps_;
  return value;
}

std::map<int, double> task_dice(model::MoCtrans<float>& model, const std::vector<SliceSample>& samples) {
  std::map<int, std::vector<const SliceSample*>> by_task;
  for (const SliceSample& s : samples) by_task[s.task_id].push_back(&s);
  std::map<int, double> out;
  for (const auto& [task, group] : by_task) {
    std::vector<const ad::Tensor<float>*> slabs;
    for (const SliceSample* s : group) slabs.push_back(&s->slab);
    const auto masks = model::predict_task_masks(model, slabs, task);
    double acc = 0;
    for (std::size_t i = 0; i < group.size(); ++i) {
      std::size_t inter = 0, p = 0, g = 0;
      for (std::size_t j = 0; j < masks[i].size(); ++j) {
        p += masks[i][j];
        g += group[i]->target[j] != 0;
        inter += masks[i][j] && group[i]->target[j];
      }
      acc += p + g == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
    }
    out[task] = acc / static_cast<double>(group.size());
  }
  return out;
}

TrainResult train_run(const data::DatasetManifest& manifest, const FoldPlan& plan, const TrainRequest& request,
                      const std::function<void(const EpochRecord&)>& on_epoch) {
  const TrainConfig& cfg = request.train;
  cfg.validate();
  const model::ModelConfig config = config_for_method(request.model, request.method, manifest, request.dataset);
  const std::vector<std::string> datasets = method_datasets(request.method, manifest, request.dataset);
  const FoldSplit split = plan.split(request.fold);
  auto in_scope = [&](const SubjectRef& r) { return std::find(datasets.begin(), datasets.end(), r.dataset) != datasets.end(); };

  std::map<std::string, double> weights = cfg.weights;
  if (weights.empty()) {
    std::map<std::string, std::size_t> sizes;
    for (const auto& d : datasets) sizes[d] = manifest.dataset(d).subjects.size();
    weights = dataset_weights(sizes);
  }

  std::vector<SliceSample> train_set, val_set;
  std::set<int> tasks;
  for (const SubjectRef& r : split.train) {
    if (!in_scope(r)) continue;
    const LoadedSubject s = load_subject(manifest, r);
    for (SliceSample& x : training_samples(s, manifest, request.method, config)) train_set.push_back(std::move(x));
    for (const auto& [organ, mask] : s.labels) tasks.insert(manifest.dataset(r.dataset).organ_tasks.at(organ));
  }
  for (const SubjectRef& r : split.validation) {
    if (!in_scope(r)) continue;
    for (SliceSample& x : task_samples(load_subject(manifest, r), manifest, config.image_hw, false)) val_set.push_back(std::move(x));
  }
  if (train_set.empty()) throw DataError("fold " + std::to_string(request.fold) + " has no training slices");
  std::vector<double> sample_weight;
  for (const SliceSample& s : train_set) {
    auto it = weights.find(s.dataset);
    if (it == weights.end()) throw ConfigError("no loss weight for dataset '" + s.dataset + "'");
    sample_weight.push_back(it->second);
  }

  Trainer trainer(model::MoCtrans<float>::initialized(config, cfg.seed), cfg);
  TrainResult result;
  result.tasks.assign(tasks.begin(), tasks.end());
  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::vector<std::size_t> order(train_set.size());
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      if (cfg.max_steps > 0 && trainer.steps() >= cfg.max_steps) break;
      std::vector<const SliceSample*> batch;
      std::vector<double> w;
      for (std::size_t i = start; i < std::min(order.size(), start + batch_size); ++i) {
        batch.push_back(&train_set[order[i]]);
        w.push_back(sample_weight[order[i]]);
      }
      try {
        loss_sum += trainer.step(batch, w);
      } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches + 1) + ")");
      }
      ++batches;
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_train_loss = batches > 0 ? loss_sum / batches : 0.0;
    rec.val_dice = task_dice(trainer.model(), val_set);
    double acc = 0;
    for (int t : result.tasks) {
      auto it = rec.val_dice.find(t);
      acc += it == rec.val_dice.end() ? 0.0 : it->second;
    }
    rec.mean_val_dice = result.tasks.empty() ? 0.0 : acc / static_cast<double>(result.tasks.size());
    if (rec.mean_val_dice > result.best_val_dice) {
      result.best_val_dice = rec.mean_val_dice;
      result.best_epoch = epoch;
      result.best.params = trainer.model().params();
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (cfg.max_steps > 0 && trainer.steps() >= cfg.max_steps) break;
  }
  result.steps = trainer.steps();
  result.best.config = config;
  result.best.meta = {std::string(method_name(request.method)), datasets, request.fold, result.best_epoch};
  return result;
}

std::string history_csv(const TrainResult& result) {
  std::string out = "epoch,mean_train_loss";
  for (int t : result.tasks) out += ",val_dice_task_" + std::to_string(t);
  out += '\n';
  char buf[64];
  for (const EpochRecord& r : result.history) {
    out += std::to_string(r.epoch);
    std::snprintf(buf, sizeof buf, ",%.6f", r.mean_train_loss);
    out += buf;
    for (int t : result.tasks) {
      auto it = r.val_dice.find(t);
      if (it == r.val_dice.end()) {
        out += ",NA";
      } else {
        std::snprintf(buf, sizeof buf, ",%.6f", it->second);
        out += buf;
      }
    }
    out += '\n';
  }
  return out;
}

}  // namespace moct::train
