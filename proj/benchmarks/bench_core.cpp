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

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "moctrans/autodiff/ops.hpp"
#include "moctrans/autodiff/tape.hpp"
#include "moctrans/eval/metrics.hpp"
#include "moctrans/model/model.hpp"
#include "moctrans/training/losses.hpp"

using namespace moct;
using ad::Shape;
using ad::Tensor;

namespace {

Tensor<float> random_tensor(Shape shape, std::uint64_t seed, float scale = 1.0f) {
  Tensor<float> t(shape);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, scale);
  for (float& v : t.data) v = g(rng);
  return t;
}

ad::Parameter<float> param(Shape shape, std::uint64_t seed, float scale) { return {random_tensor(shape, seed, scale), {}, true}; }

// Args: channels, spatial side. 3x3 kernel, padding 1, C -> C.
void BM_Conv2dForward(benchmark::State& state) {
  const auto c = std::size_t(state.range(0)), hw = std::size_t(state.range(1));
  const auto x = random_tensor({4, c, hw, hw}, 1);
  auto w = param({c, c, 3, 3}, 2, 0.1f), b = param({c}, 3, 0.1f);
  for (auto _ : state) {
    ad::Tape<float> t(false);
    benchmark::DoNotOptimize(ad::conv2d(t.constant(x), t.param(w), t.param(b), 1, 1).value().data.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(4 * c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForward)->Args({16, 64})->Args({32, 32})->Args({64, 16})->Args({128, 8})->Unit(benchmark::kMicrosecond);

void BM_Conv2dForwardBackward(benchmark::State& state) {
  const auto c = std::size_t(state.range(0)), hw = std::size_t(state.range(1));
  const auto x = random_tensor({4, c, hw, hw}, 1);
  auto w = param({c, c, 3, 3}, 2, 0.1f), b = param({c}, 3, 0.1f);
  for (auto _ : state) {
    ad::Tape<float> t;
    t.backward(ad::sum(ad::conv2d(t.constant(x), t.param(w), t.param(b), 1, 1)));
    benchmark::DoNotOptimize(w.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * std::int64_t(3 * 4 * c * c * 9 * hw * hw));
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({16, 64})->Args({32, 32})->Args({64, 16})->Args({128, 8})->Unit(benchmark::kMicrosecond);

// Args: token dim; 65 tokens (64 image tokens plus the task token), 4 heads.
void BM_AttentionForwardBackward(benchmark::State& state) {
  const auto d = std::size_t(state.range(0));
  const auto x = random_tensor({4, 65, d}, 4);
  std::vector<ad::Parameter<float>> p;
  for (std::uint64_t i = 0; i < 4; ++i) {
    p.push_back(param({d, d}, 10 + i, 0.05f));
    p.push_back(param({d}, 20 + i, 0.05f));
  }
  for (auto _ : state) {
    ad::Tape<float> t;
    ad::AttentionWeights<float> aw{t.param(p[0]), t.param(p[1]), t.param(p[2]), t.param(p[3]),
                                   t.param(p[4]), t.param(p[5]), t.param(p[6]), t.param(p[7])};
    t.backward(ad::sum(ad::multihead_attention(t.constant(x), aw, 4)));
    benchmark::DoNotOptimize(p[0].grad.data());
  }
}
BENCHMARK(BM_AttentionForwardBackward)->Arg(32)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);

// Desk model, batch of 4 slabs.
void BM_ModelForward(benchmark::State& state) {
  auto net = model::MoCtrans<float>::initialized(model::desk_config(), 1);
  const auto x = random_tensor({4, 3, 64, 64}, 5);
  const std::vector<int> tasks{1, 2, 3, 4};
  for (auto _ : state) {
    ad::Tape<float> t(false);
    benchmark::DoNotOptimize(net.forward(t, x, tasks, model::Mode::Eval).value().data.data());
  }
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelTrainStepGradients(benchmark::State& state) {
  auto net = model::MoCtrans<float>::initialized(model::desk_config(), 1);
  const auto x = random_tensor({4, 3, 64, 64}, 5);
  const std::vector<int> tasks{1, 2, 3, 4};
  std::vector<std::uint8_t> labels(4 * 64 * 64, 0);
  for (std::size_t i = 0; i < labels.size(); i += 3) labels[i] = 1;
  const std::vector<double> weights(4, 1.0);
  for (auto _ : state) {
    ad::Tape<float> t;
    auto logits = net.forward(t, x, tasks, model::Mode::Train);
    t.backward(train::combined_loss(logits, labels, 1.0, weights));
    benchmark::DoNotOptimize(net.params().entries().front().param.grad.data());
  }
}
BENCHMARK(BM_ModelTrainStepGradients)->Unit(benchmark::kMillisecond);

void BM_Assd(benchmark::State& state) {
  const int n = int(state.range(0));
  eval::BinaryMask a(n, n), b(n, n);
  for (int y = n / 4; y < 3 * n / 4; ++y)
    for (int x = n / 4; x < 3 * n / 4; ++x) a.set(y, x), b.set(y + 2 < n ? y + 2 : y, x);
  for (auto _ : state) benchmark::DoNotOptimize(eval::assd(a, b).value);
}
BENCHMARK(BM_Assd)->Arg(64)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
