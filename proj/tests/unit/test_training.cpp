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

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>
#include <set>

#include "fixtures.hpp"
#include "moctrans/autodiff/gradcheck.hpp"
#include "moctrans/autodiff/ops.hpp"
#include "moctrans/error.hpp"
#include "moctrans/training/losses.hpp"
#include "moctrans/training/samples.hpp"
#include "moctrans/training/trainer.hpp"
#include "oracles.hpp"

using namespace moct;
using namespace moct::train;
using ad::Shape;
using ad::Tape;
using ad::Tensor;

namespace {

double scalar(const ad::Var<double>& v) { return v.value().data.at(0); }

// The 4-pixel image with 2 foreground pixels.
const std::vector<std::uint8_t> kFourPixel{0, 1, 1, 0};

}  // namespace

TEST(SoftDice, PerfectPredictionIsZero) {
  Tape<double> t;
  const auto target = one_hot<double>(kFourPixel, 1, 2, 2, 2);
  for (double eps : {1.0, 1e-6}) EXPECT_LE(scalar(soft_dice_loss(t.constant(target), target, eps)), 1e-12);
}

TEST(SoftDice, HalfProbabilityClosedForm) {
  Tape<double> t;
  Tensor<double> prob({1, 2, 2, 2}, 0.5);
  const auto target = one_hot<double>(kFourPixel, 1, 2, 2, 2);
  // Both classes: 1 - 2*(0.5*2) / (4*0.25 + 2) = 1/3.
  EXPECT_NEAR(scalar(soft_dice_loss(t.constant(prob), target, 1e-12)), 1.0 / 3.0, 1e-10);
}

TEST(SoftDice, RangeOverRandomInputs) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = 2 + trial % 4, hw = 1 + trial % 5;
    Tape<double> t;
    auto prob = ad::softmax(t.constant(oracle::random_tensor<double>({2, c, hw, hw}, std::uint64_t(trial), 3.0)), 1);
    std::vector<std::uint8_t> labels(2 * hw * hw);
    for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % c);
    const double loss = scalar(soft_dice_loss(prob, one_hot<double>(labels, 2, c, hw, hw), 1.0));
    EXPECT_GE(loss, 0.0);
    EXPECT_LE(loss, 1.0 + 1e-9);
  }
}

TEST(SoftDice, ShapeMismatchRejected) {
  Tape<double> t;
  EXPECT_THROW(soft_dice_loss(t.constant(Tensor<double>({1, 2, 2, 2})), Tensor<double>({1, 3, 2, 2}), 1.0), ShapeError);
}

TEST(CrossEntropy, UniformIsLn2) {
  Tape<double> t;
  EXPECT_NEAR(scalar(cross_entropy_loss(t.constant(Tensor<double>({1, 2, 2, 2})), std::span<const std::uint8_t>(kFourPixel))),
              std::numbers::ln2, 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectIsZero) {
  Tensor<double> logits({1, 2, 2, 2});
  for (std::size_t i = 0; i < 4; ++i) logits.data[kFourPixel[i] * 4 + i] = 1000.0;
  Tape<double> t;
  const double loss = scalar(cross_entropy_loss(t.constant(logits), std::span<const std::uint8_t>(kFourPixel)));
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 0.0, 1e-12);
}

TEST(CrossEntropy, MatchesDirectSummation) {
  const std::size_t n = 3, c = 4, h = 5, w = 6;
  const auto logits = oracle::random_tensor<double>({n, c, h, w}, 11, 4.0);
  std::vector<std::uint8_t> labels(n * h * w);
  std::mt19937_64 rng(12);
  for (auto& l : labels) l = static_cast<std::uint8_t>(rng() % c);
  double expect = 0;
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t i = 0; i < h * w; ++i) {
      double z = 0;
      for (std::size_t k = 0; k < c; ++k) z += std::exp(logits.data[(s * c + k) * h * w + i]);
      expect -= std::log(std::exp(logits.data[(s * c + labels[s * h * w + i]) * h * w + i]) / z);
    }
  expect /= double(n * h * w);
  Tape<double> t;
  EXPECT_NEAR(scalar(cross_entropy_loss(t.constant(logits), std::span<const std::uint8_t>(labels))), expect, 1e-5);
}

TEST(CrossEntropy, OutOfRangeLabelNamesPixel) {
  std::vector<std::uint8_t> labels{0, 0, 0, 0, 0, 2};  // 1x2x3 map, bad label at (y=1, x=2)
  Tape<double> t;
  try {
    cross_entropy_loss(t.constant(Tensor<double>({1, 2, 2, 3})), std::span<const std::uint8_t>(labels));
    FAIL();
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("y=1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("x=2"), std::string::npos) << msg;
  }
}

TEST(CombinedLoss, ClosedFormAndWeights) {
  Tape<double> t;
  auto logits = t.constant(Tensor<double>({1, 2, 2, 2}));
  const std::span<const std::uint8_t> labels(kFourPixel);
  const double one = scalar(combined_loss(logits, labels, 1e-12, 1.0));
  EXPECT_NEAR(one, (1.0 / 3.0 + std::numbers::ln2) / 2.0, 1e-10);
  EXPECT_EQ(scalar(combined_loss(logits, labels, 1e-12, 2.0)), 2.0 * one);
}

TEST(CombinedLoss, ZeroWeightGivesZeroGradient) {
  ad::Parameter<double> p{oracle::random_tensor<double>({1, 2, 2, 2}, 4), {}, true};
  Tape<double> t;
  auto loss = combined_loss(t.param(p), std::span<const std::uint8_t>(kFourPixel), 1.0, 0.0);
  EXPECT_EQ(scalar(loss), 0.0);
  t.backward(loss);
  for (double g : p.grad) EXPECT_EQ(g, 0.0);
}

TEST(CombinedLoss, PerSampleWeightsAreLinear) {
  const auto logits = oracle::random_tensor<double>({2, 3, 4, 4}, 5);
  std::vector<std::uint8_t> labels(32);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>(i % 3);
  Tape<double> t;
  auto x = t.constant(logits);
  const std::vector<double> w1{1.0, 0.0}, w2{0.0, 1.0}, both{0.3, 1.7};
  const double a = scalar(combined_loss(x, std::span<const std::uint8_t>(labels), 1.0, std::span<const double>(w1)));
  const double b = scalar(combined_loss(x, std::span<const std::uint8_t>(labels), 1.0, std::span<const double>(w2)));
  EXPECT_NEAR(scalar(combined_loss(x, std::span<const std::uint8_t>(labels), 1.0, std::span<const double>(both))), 0.3 * a + 1.7 * b,
              1e-12);
}

TEST(CombinedLoss, GradientMatchesFiniteDifferences) {
  ad::Parameter<double> p{oracle::random_tensor<double>({2, 3, 3, 3}, 6), {}, true};
  std::vector<std::uint8_t> labels(18);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint8_t>((i * 7) % 3);
  const std::vector<double> w{0.4, 1.6};
  const std::vector<ad::NamedParameter<double>> wrt{{"logits", &p}};
  auto r = ad::gradcheck(
      [&](Tape<double>& t) { return combined_loss(t.param(p), std::span<const std::uint8_t>(labels), 1.0, std::span<const double>(w)); },
      wrt);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(DatasetWeights, FullScaleSizes) {
  const auto w = dataset_weights({{"D1", 18}, {"D2", 17}, {"D3", 20}, {"D4", 100}});
  EXPECT_NEAR(w.at("D1"), 1.274, 1e-3);
  EXPECT_NEAR(w.at("D2"), 1.349, 1e-3);
  EXPECT_NEAR(w.at("D3"), 1.147, 1e-3);
  EXPECT_NEAR(w.at("D4"), 0.229, 1e-3);
}

TEST(DatasetWeights, EqualSizesGiveOnes) {
  for (const auto& [name, v] : dataset_weights({{"a", 7}, {"b", 7}, {"c", 7}})) EXPECT_DOUBLE_EQ(v, 1.0) << name;
}

TEST(DatasetWeights, MeanOneAndMonotone) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, std::size_t> sizes;
    const int k = 1 + trial % 6;
    for (int i = 0; i < k; ++i) sizes["d" + std::to_string(i)] = 1 + rng() % 200;
    const auto w = dataset_weights(sizes);
    double mean = 0;
    for (const auto& [n, v] : w) mean += v;
    EXPECT_NEAR(mean / k, 1.0, 1e-9);
    for (const auto& [a, sa] : sizes)
      for (const auto& [b, sb] : sizes)
        if (sa > sb) {
          EXPECT_LT(w.at(a), w.at(b));
        }
  }
}

TEST(DatasetWeights, EmptyRejected) { EXPECT_THROW(dataset_weights({}), ConfigError); }

namespace {

data::SliceSample labelled_sample(std::vector<std::uint8_t> target) {
  data::SliceSample s;
  s.slab = Tensor<float>({3, 2, 3}, 0.5f);
  s.target = std::move(target);
  s.dataset = "S2";
  s.subject = "S2_000";
  return s;
}

}  // namespace

TEST(SplitMulticlass, TwoOrgansGiveTwoBinarySamples) {
  const auto in = labelled_sample({0, 1, 1, 2, 0, 2});
  const auto out = split_multiclass(in, {{1, 1}, {2, 2}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].task_id, 1);
  EXPECT_EQ(out[0].target, (std::vector<std::uint8_t>{0, 1, 1, 0, 0, 0}));
  EXPECT_EQ(out[1].task_id, 2);
  EXPECT_EQ(out[1].target, (std::vector<std::uint8_t>{0, 0, 0, 1, 0, 1}));
  std::vector<std::uint8_t> uni(6);
  for (const auto& s : out) {
    EXPECT_EQ(s.slab, in.slab);
    for (std::size_t i = 0; i < 6; ++i) uni[i] |= s.target[i];
  }
  for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(uni[i], in.target[i] != 0);
}

TEST(SplitMulticlass, SingleOrganUnchanged) {
  auto in = labelled_sample({0, 1, 1, 0, 0, 1});
  const auto out = split_multiclass(in, {{1, 3}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].target, in.target);
  EXPECT_EQ(out[0].task_id, 3);
}

TEST(SplitMulticlass, TasksAreExactlyThePresentOrgans) {
  const auto out = split_multiclass(labelled_sample({0, 2, 2, 0, 0, 0}), {{1, 1}, {2, 2}});
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].task_id, 2);
}

TEST(KFold, TenSubjectsFivePairs) {
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("s" + std::to_string(i));
  const auto plan = kfold_split({{"A", ids}}, 5, 1);
  std::set<std::string> seen;
  for (int f = 0; f < 5; ++f) {
    const auto split = plan.split(f);
    EXPECT_EQ(split.test.size(), 2u);
    for (const auto& r : split.test) EXPECT_TRUE(seen.insert(r.subject).second) << r.subject;
  }
  EXPECT_EQ(seen.size(), 10u);
}

TEST(KFold, SplitsDisjointAndCovering) {
  const auto& m = fixture::desk_suite();
  const auto plan = kfold_split(m, 5, 7);
  std::map<SubjectRef, int> test_count;
  for (int f = 0; f < 5; ++f) {
    const auto s = plan.split(f);
    std::set<SubjectRef> all;
    for (const auto* part : {&s.train, &s.validation, &s.test})
      for (const auto& r : *part) EXPECT_TRUE(all.insert(r).second) << r.dataset << "/" << r.subject;
    EXPECT_EQ(all.size(), 42u);
    for (const auto& r : s.test) ++test_count[r];
  }
  EXPECT_EQ(test_count.size(), 42u);
  for (const auto& [r, c] : test_count) EXPECT_EQ(c, 1) << r.subject;
}

TEST(KFold, Deterministic) {
  const auto& m = fixture::desk_suite();
  EXPECT_EQ(kfold_split(m, 5, 7).fold_of, kfold_split(m, 5, 7).fold_of);
  EXPECT_NE(kfold_split(m, 5, 7).fold_of, kfold_split(m, 5, 8).fold_of);
}

TEST(KFold, SmallDatasetRejected) {
  EXPECT_THROW(kfold_split({{"A", {"a", "b", "c"}}}, 5, 1), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.lr = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.epochs = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Samples, OnlyNonEmptySlicesAndPresentOrgans) {
  const auto& m = fixture::desk_suite();
  const auto cfg = config_for_method(model::desk_config(), Method::MoCtrans, m);
  const auto s = load_subject(m, {"S2", "S2_000"});
  const auto samples = training_samples(s, m, Method::MoCtrans, cfg);
  std::map<int, int> per_task;
  for (const auto& x : samples) {
    ++per_task[x.task_id];
    EXPECT_GT(std::count(x.target.begin(), x.target.end(), std::uint8_t{1}), 0);
    for (auto v : x.target) EXPECT_LE(v, 1);
  }
  const auto count_nonempty = [](const data::LabelVolume& v) {
    int n = 0;
    for (int z = 0; z < v.depth; ++z) {
      bool any = false;
      for (int y = 0; y < v.height && !any; ++y)
        for (int x = 0; x < v.width && !any; ++x) any = v.at(z, y, x) != 0;
      n += any;
    }
    return n;
  };
  EXPECT_EQ(per_task.at(1), count_nonempty(s.labels.at("organ-L")));
  EXPECT_EQ(per_task.at(2), count_nonempty(s.labels.at("organ-S")));
}

TEST(Samples, EvalOnlyLabelsNeverTrain) {
  const auto& m = fixture::desk_suite();
  const auto cfg = config_for_method(model::desk_config(), Method::MoCtrans, m);
  const auto s = load_subject(m, {"S1", "S1_000"});
  for (const auto& x : training_samples(s, m, Method::MoCtrans, cfg)) EXPECT_EQ(x.task_id, 1);
  bool saw_eval = false;
  for (const auto& x : task_samples(s, m, 64, true)) saw_eval |= x.task_id == 2;
  EXPECT_TRUE(saw_eval);
}

TEST(Samples, BaseMultiUsesTaskClasses) {
  const auto& m = fixture::desk_suite();
  const auto cfg = config_for_method(model::desk_config(), Method::BaseMulti, m);
  EXPECT_EQ(cfg.n_classes, 5);
  const auto s = load_subject(m, {"S4", "S4_000"});
  std::set<int> values;
  for (const auto& x : training_samples(s, m, Method::BaseMulti, cfg))
    for (auto v : x.target) values.insert(v);
  EXPECT_EQ(values, (std::set<int>{0, 4}));
  const auto single = config_for_method(model::desk_config(), Method::BaseSingle, m, "S2");
  EXPECT_EQ(single.class_tasks, (std::vector<int>{0, 1, 2}));
}

namespace {

model::ModelConfig tiny(const data::DatasetManifest& m, Method method) {
  model::ModelConfig c;
  c.c_base = 4;
  c.m = 2;
  c.heads = 2;
  c.blocks_per_level = 1;
  c.image_hw = 16;
  return config_for_method(c, method, m);
}

}  // namespace

TEST(Trainer, OverfitsFourSamples) {
  const auto& m = fixture::desk_suite();
  const auto cfg = config_for_method(model::desk_config(), Method::MoCtrans, m);
  std::vector<data::SliceSample> pool;
  for (const char* id : {"S2_000", "S4_000"}) {
    auto s = training_samples(load_subject(m, {id[1] == '2' ? "S2" : "S4", id}), m, Method::MoCtrans, cfg);
    pool.push_back(s[s.size() / 2]);
    pool.push_back(s[s.size() / 2 + 1]);
  }
  TrainConfig tc;
  tc.lr = 1e-3;
  Trainer trainer(model::MoCtrans<float>::initialized(cfg, 1), tc);
  const std::vector<const data::SliceSample*> batch{&pool[0], &pool[1], &pool[2], &pool[3]};
  const std::vector<double> w(4, 1.0);
  std::vector<double> loss;
  for (int i = 0; i < 200; ++i) loss.push_back(trainer.step(batch, w));
  EXPECT_LT(loss.back(), 0.1);
  std::vector<double> avg;
  for (std::size_t i = 19; i < loss.size(); ++i) avg.push_back(std::accumulate(loss.begin() + long(i) - 19, loss.begin() + long(i) + 1, 0.0) / 20);
  // avg[j] ends at step j + 20; enforce from step 40 on.
  for (std::size_t j = 21; j < avg.size(); ++j) EXPECT_LE(avg[j], avg[j - 1]) << "step " << j + 20;
}

TEST(Trainer, NonFiniteLossAborts) {
  const auto& m = fixture::desk_suite();
  const auto cfg = tiny(m, Method::MoCtrans);
  auto net = model::MoCtrans<float>::initialized(cfg, 1);
  auto& w = net.params().at("head.bias").value.data;
  w[0] = std::numeric_limits<float>::quiet_NaN();
  Trainer trainer(std::move(net), TrainConfig{});
  auto samples = training_samples(load_subject(m, {"S4", "S4_001"}), m, Method::MoCtrans, cfg);
  const std::vector<const data::SliceSample*> batch{&samples[0]};
  const std::vector<double> one{1.0};
  EXPECT_THROW(trainer.step(batch, one), NumericalError);
}

TEST(TrainRun, DeterministicAndSelectsBest) {
  const auto& m = fixture::desk_suite();
  const auto plan = kfold_split(m, 5, 7);
  TrainRequest req;
  req.model = tiny(m, Method::MoCtrans);
  req.train.epochs = 3;
  req.train.seed = 3;
  req.train.lr = 1e-3;
  const auto a = train_run(m, plan, req);
  const auto b = train_run(m, plan, req);
  EXPECT_EQ(history_csv(a), history_csv(b));
  for (std::size_t i = 0; i < a.best.params.size(); ++i)
    EXPECT_EQ(a.best.params.entries()[i].param.value, b.best.params.entries()[i].param.value);
  ASSERT_EQ(a.history.size(), 3u);
  EXPECT_EQ(a.steps % 3, 0);
  EXPECT_EQ(a.tasks, (std::vector<int>{1, 2, 3, 4}));
  double best = -1;
  int first = 0;
  for (const auto& r : a.history)
    if (r.mean_val_dice > best) best = r.mean_val_dice, first = r.epoch;
  EXPECT_EQ(a.best_val_dice, best);
  EXPECT_EQ(a.best_epoch, first);
  EXPECT_GE(a.best_val_dice, a.history.back().mean_val_dice);
  EXPECT_EQ(a.best.meta.epoch, first);
}

TEST(TrainRun, MaxStepsStopsEarly) {
  const auto& m = fixture::desk_suite();
  TrainRequest req;
  req.model = tiny(m, Method::MoCtrans);
  req.train.epochs = 5;
  req.train.max_steps = 5;
  const auto r = train_run(m, kfold_split(m, 5, 7), req);
  EXPECT_EQ(r.steps, 5);
  EXPECT_EQ(r.history.size(), 1u);
}

TEST(TrainRun, HistoryCsvLayout) {
  TrainResult r;
  r.tasks = {1, 3};
  r.history.push_back({1, 0.5, {{1, 0.25}}, 0.125});
  EXPECT_EQ(history_csv(r), "epoch,mean_train_loss,val_dice_task_1,val_dice_task_3\n1,0.500000,0.250000,NA\n");
}
