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

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "moctrans/autodiff/adam.hpp"
#include "moctrans/model/checkpoint.hpp"
#include "moctrans/model/model.hpp"
#include "moctrans/synthdata/extract.hpp"
#include "moctrans/training/protocol.hpp"

namespace moct::train {

// Owns a model and its optimizer state.
class Trainer {
 public:
  Trainer(model::MoCtrans<float> model, const TrainConfig& config);

  // One Adam step on the weighted combined loss of `batch`. Returns the
  // loss. Throws NumericalError if the loss or any gradient is non-finite.
  double step(std::span<const data::SliceSample* const> batch, std::span<const double> weights);

  model::MoCtrans<float>& model() { return model_; }
  int steps() const { return steps_; }

 private:
  model::MoCtrans<float> model_;
  TrainConfig config_;
  ad::AdamState<float> adam_;
  int steps_ = 0;
};

// Mean per-slice Dice of each task over binary `samples`.
std::map<int, double> task_dice(model::MoCtrans<float>& model, const std::vector<data::SliceSample>& samples);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double mean_train_loss = 0;
  std::map<int, double> val_dice;  // task -> mean slice Dice
  double mean_val_dice = 0;
};

struct TrainResult {
  model::Checkpoint best;
  std::vector<EpochRecord> history;
  std::vector<int> tasks;  // tasks with train labels, ascending
  int best_epoch = 0;
  double best_val_dice = -1;
  int steps = 0;
};

struct TrainRequest {
  Method method = Method::MoCtrans;
  std::string dataset;  // base_single only
  int fold = 0;
  model::ModelConfig model;  // architecture; classes and variant follow the method
  TrainConfig train;
};

// Trains on fold `fold`'s train subjects and keeps the parameters with the
// best mean validation Dice (first epoch wins ties).
TrainResult train_run(const data::DatasetManifest& manifest, const FoldPlan& plan, const TrainRequest& request,
                      const std::function<void(const EpochRecord&)>& on_epoch = {});

// epoch,mean_train_loss,val_dice_task_<k>... one row per epoch.
std::string history_csv(const TrainResult& result);

}  // namespace moct::train
