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

#include "moctrans/autodiff/battery.hpp"

#include <cmath>
#include <deque>
#include <functional>
#include <memory>
#include <random>

#include "moctrans/autodiff/gradcheck.hpp"
#include "moctrans/autodiff/ops.hpp"
#include "moctrans/model/model.hpp"
#include "moctrans/training/losses.hpp"

namespace moct::ad {
namespace {

using P = Parameter<double>;

// Named random parameters for one check.
class Fixture {
 public:
  explicit Fixture(std::uint64_t seed) : rng_(seed) {}

  P& add(const std::string& name, Shape shape, double scale = 1.0) {
    Tensor<double> t(std::move(shape));
    std::normal_distribution<double> n(0.0, scale);
    for (double& v : t.data) v = n(rng_);
    P& p = store_.emplace_back();
    p.value = std::move(t);
    p.requires_grad = true;
    named_.push_back({name, &p});
    return p;
  }

  Tensor<double> random(Shape shape) {
    Tensor<double> t(std::move(shape));
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : t.data) v = n(rng_);
    return t;
  }

  std::mt19937_64& rng() { return rng_; }
  const std::vector<NamedParameter<double>>& named() const { return named_; }

 private:
  std::mt19937_64 rng_;
  std::deque<P> store_;
  std::vector<NamedParameter<double>> named_;
};

// sum(x * r) for a fixed random r, so every output element carries a
// distinct upstream gradient.
Var<double> project(const Var<double>& x, const Tensor<double>& r) {
  return sum(mul(x, x.tape()->constant(r)));
}

// ReLU whose backward ignores the mask.
Var<double> leaky_backward_relu(const Var<double>& x) {
  Tensor<double> out = x.value();
  for (double& v : out.data) v = v > 0 ? v : 0;
  const int xi = x.id();
  return x.tape()->record(OpKind::Custom, {xi}, std::move(out), [xi](Tape<double>& t, std::span<const double> g) {
    std::span<double> gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

struct CheckDef {
  std::string name;
  double threshold;
  // Builds the fixture for a seed and returns the loss builder over it.
  std::function<LossBuilder(Fixture&)> make;
  std::size_t max_elements = 0;
  bool composite = false;
  std::function<bool(const std::string&)> structural_zero = [](const std::string&) { return false; };
};

std::vector<CheckDef> primitive_checks(bool corrupt) {
  std::vector<CheckDef> c;
  c.push_back({"conv2d 3x3 pad1", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 6, 6});
                 P& w = f.add("w", {4, 3, 3, 3}, 0.5);
                 P& b = f.add("b", {4});
                 auto r = f.random({2, 4, 6, 6});
                 return [&, r](Tape<double>& t) { return project(conv2d(t.param(x), t.param(w), t.param(b), 1, 1), r); };
               }});
  c.push_back({"conv2d 3x3 stride2", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {1, 2, 7, 7});
                 P& w = f.add("w", {3, 2, 3, 3}, 0.5);
                 P& b = f.add("b", {3});
                 auto r = f.random({1, 3, 4, 4});
                 return [&, r](Tape<double>& t) { return project(conv2d(t.param(x), t.param(w), t.param(b), 2, 1), r); };
               }});
  c.push_back({"conv2d 1x1", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 4, 4});
                 P& w = f.add("w", {5, 3, 1, 1});
                 P& b = f.add("b", {5});
                 auto r = f.random({2, 5, 4, 4});
                 return [&, r](Tape<double>& t) { return project(conv2d(t.param(x), t.param(w), t.param(b)), r); };
               }});
  c.push_back({"batchnorm2d train", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 4, 4});
                 P& g = f.add("gamma", {3});
                 P& b = f.add("beta", {3});
                 auto r = f.random({2, 3, 4, 4});
                 return [&, r](Tape<double>& t) {
                   Tensor<double> rm({3}, 0.0), rv({3}, 1.0);
                   return project(batchnorm2d(t.param(x), t.param(g), t.param(b), rm, rv, {}), r);
                 };
               }});
  c.push_back({"batchnorm2d eval", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 3, 3});
                 P& g = f.add("gamma", {3});
                 P& b = f.add("beta", {3});
                 auto r = f.random({2, 3, 3, 3});
                 Tensor<double> rm = f.random({3}), rv({3}, 1.5);
                 return [&, r, rm, rv](Tape<double>& t) {
                   Tensor<double> m = rm, v = rv;
                   return project(batchnorm2d(t.param(x), t.param(g), t.param(b), m, v, {Mode::Eval, 0.1, 1e-5}), r);
                 };
               }});
  c.push_back({corrupt ? "relu (corrupted backward)" : "relu", kPrimitiveTolerance, [corrupt](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {3, 7});
                 auto r = f.random({3, 7});
                 return [&, r, corrupt](Tape<double>& t) {
                   return project(corrupt ? leaky_backward_relu(t.param(x)) : relu(t.param(x)), r);
                 };
               }});
  c.push_back({"add with fan-out", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& a = f.add("a", {4, 5});
                 P& b = f.add("b", {4, 5});
                 auto r = f.random({4, 5});
                 return [&, r](Tape<double>& t) {
                   Var<double> va = t.param(a);
                   return project(add(add(va, t.param(b)), va), r);
                 };
               }});
  c.push_back({"mul", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& a = f.add("a", {4, 5});
                 P& b = f.add("b", {4, 5});
                 auto r = f.random({4, 5});
                 return [&, r](Tape<double>& t) { return project(mul(t.param(a), t.param(b)), r); };
               }});
  c.push_back({"scale", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& a = f.add("a", {6});
                 auto r = f.random({6});
                 return [&, r](Tape<double>& t) { return project(scale(t.param(a), -1.7), r); };
               }});
  c.push_back({"broadcast_add", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 4});
                 P& b = f.add("b", {3, 4});
                 auto r = f.random({2, 3, 4});
                 return [&, r](Tape<double>& t) { return project(broadcast_add(t.param(x), t.param(b)), r); };
               }});
  c.push_back({"sum and mean", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& a = f.add("a", {3, 4});
                 P& b = f.add("b", {3, 4});
                 return [&](Tape<double>& t) {
                   Var<double> va = t.param(a);
                   return add(sum(mul(va, va)), scale(mean(mul(t.param(b), va)), 3.0));
                 };
               }});
  c.push_back({"maxpool2d", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 2, 6, 6});
                 auto r = f.random({2, 2, 3, 3});
                 return [&, r](Tape<double>& t) { return project(maxpool2d(t.param(x)), r); };
               }});
  c.push_back({"linear", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 5});
                 P& w = f.add("w", {4, 5});
                 P& b = f.add("b", {4});
                 auto r = f.random({2, 3, 4});
                 return [&, r](Tape<double>& t) { return project(linear(t.param(x), t.param(w), t.param(b)), r); };
               }});
  c.push_back({"linear without bias", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {3, 5});
                 P& w = f.add("w", {2, 5});
                 auto r = f.random({3, 2});
                 return [&, r](Tape<double>& t) { return project(linear(t.param(x), t.param(w)), r); };
               }});
  c.push_back({"softmax last axis", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {3, 6}, 2.0);
                 auto r = f.random({3, 6});
                 return [&, r](Tape<double>& t) { return project(softmax(t.param(x), -1), r); };
               }});
  c.push_back({"softmax class axis", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 2, 2}, 2.0);
                 auto r = f.random({2, 3, 2, 2});
                 return [&, r](Tape<double>& t) { return project(softmax(t.param(x), 1), r); };
               }});
  c.push_back({"layer_norm", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {4, 8});
                 P& g = f.add("gamma", {8});
                 P& b = f.add("beta", {8});
                 auto r = f.random({4, 8});
                 return [&, r](Tape<double>& t) { return project(layer_norm(t.param(x), t.param(g), t.param(b)), r); };
               }});
  c.push_back({"multihead_attention", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {5, 8});
                 std::vector<P*> w;
                 for (const char* n : {"wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"})
                   w.push_back(&f.add(n, n[0] == 'w' ? Shape{8, 8} : Shape{8}, n[0] == 'w' ? 0.4 : 0.2));
                 auto r = f.random({5, 8});
                 return [&, w, r](Tape<double>& t) {
                   AttentionWeights<double> aw{t.param(*w[0]), t.param(*w[1]), t.param(*w[2]), t.param(*w[3]),
                                               t.param(*w[4]), t.param(*w[5]), t.param(*w[6]), t.param(*w[7])};
                   return project(multihead_attention(t.param(x), aw, 2), r);
                 };
               },
               0, false, [](const std::string& n) { return n == "bk"; }});
  c.push_back({"patch_partition", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 3, 4, 4});
                 auto r = f.random({2, 4, 12});
                 return [&, r](Tape<double>& t) { return project(patch_partition(t.param(x), 2), r); };
               }});
  c.push_back({"patch_merge", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("x", {2, 4, 12});
                 auto r = f.random({2, 3, 4, 4});
                 return [&, r](Tape<double>& t) { return project(patch_merge(t.param(x), 2, 3, 4, 4), r); };
               }});
  c.push_back({"concat/add/slice rows", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& s = f.add("seq", {2, 4, 6});
                 P& tok = f.add("token", {2, 1, 6});
                 P& skip = f.add("skip", {2, 4, 6});
                 auto r = f.random({2, 3, 6});
                 return [&, r](Tape<double>& t) {
                   Var<double> seq = add_rows(concat_rows(t.param(s), t.param(tok)), t.param(skip));
                   return project(slice_rows(seq, 2, 3), r);
                 };
               }});
  c.push_back({"soft_dice", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("logits", {2, 3, 3, 3});
                 std::vector<std::uint8_t> labels(2 * 9);
                 for (auto& l : labels) l = static_cast<std::uint8_t>(f.rng()() % 3);
                 const Tensor<double> target = train::one_hot<double>(labels, 2, 3, 3, 3);
                 return [&, target](Tape<double>& t) { return train::soft_dice_loss(softmax(t.param(x), 1), target, 1.0); };
               }});
  c.push_back({"cross_entropy", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("logits", {2, 3, 3, 3});
                 std::vector<std::uint8_t> labels(2 * 9);
                 for (auto& l : labels) l = static_cast<std::uint8_t>(f.rng()() % 3);
                 return [&, labels](Tape<double>& t) { return train::cross_entropy_loss(t.param(x), labels); };
               }});
  c.push_back({"combined_loss weighted", kPrimitiveTolerance, [](Fixture& f) -> LossBuilder {
                 P& x = f.add("logits", {3, 2, 4, 4});
                 std::vector<std::uint8_t> labels(3 * 16);
                 for (auto& l : labels) l = static_cast<std::uint8_t>(f.rng()() % 2);
                 return [&, labels](Tape<double>& t) {
                   const std::vector<double> w{1.3, 0.2, 0.9};
                   return train::combined_loss(t.param(x), labels, 1.0, std::span<const double>(w));
                 };
               }});
  return c;
}

model::ModelConfig tiny_config() {
  model::ModelConfig c;
  c.c_base = 4;
  c.m = 2;
  c.levels = 4;
  c.heads = 2;
  c.ffn_expansion = 2;
  c.blocks_per_level = 1;
  c.n_tasks = 4;
  c.n_classes = 2;
  c.image_hw = 16;
  return c;
}

// Model parameters as 64-bit fixture entries; running statistics are kept
// aside and reset before every forward so each evaluation is identical.
struct ModelFixture {
  model::MoCtrans<double> net;
  model::ParameterStore<double> pristine;
  explicit ModelFixture(std::uint64_t seed)
      : net(tiny_config(), model::param_init(tiny_config(), seed).cast<double>()), pristine(net.params()) {}
  void reset_buffers() {
    for (auto& e : net.params().entries())
      if (!e.learnable) e.param.value = pristine.at(e.name).value;
  }
};

std::vector<CheckDef> composite_checks(std::vector<std::shared_ptr<ModelFixture>>& keep) {
  std::vector<CheckDef> c;
  c.push_back({"model forward + combined_loss (16x16)", kCompositeTolerance, [&keep](Fixture& f) -> LossBuilder {
                 auto m = std::make_shared<ModelFixture>(f.rng()());
                 keep.push_back(m);
                 const Tensor<double> slab = f.random({2, 3, 16, 16});
                 std::vector<std::uint8_t> labels(2 * 256);
                 for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = (i % 16 > 4 && i % 16 < 11 && (i / 16) % 16 > 5) ? 1 : 0;
                 return [m, slab, labels](Tape<double>& t) {
                   m->reset_buffers();
                   const std::vector<int> tasks{1, 3};
                   Var<double> logits = m->net.forward(t, slab, tasks, Mode::Train);
                   return train::combined_loss(logits, labels, 1.0, 1.0);
                 };
               },
               3, true, [](const std::string& n) {
                 return (n.rfind("enc", 0) == 0 && n.size() > 5 && n.compare(n.size() - 5, 5, ".bias") == 0) ||
                        n.find("attn.bk") != std::string::npos;
               }});
  return c;
}

}  // namespace

std::vector<BatteryCheck> run_gradcheck_battery(const BatteryOptions& options) {
  std::vector<std::shared_ptr<ModelFixture>> keep;
  std::vector<CheckDef> defs = primitive_checks(options.corrupt_backward);
  if (options.include_model)
    for (CheckDef& d : composite_checks(keep)) defs.push_back(std::move(d));
  std::vector<BatteryCheck> out;
  for (const CheckDef& def : defs) {
    BatteryCheck check;
    check.name = def.name;
    check.threshold = def.threshold;
    for (int s = 0; s < std::max(1, options.seeds); ++s) {
      const std::uint64_t seed = options.seed * 1000003ULL + static_cast<std::uint64_t>(s);
      Fixture f(seed);
      const LossBuilder build = def.make(f);
      std::vector<NamedParameter<double>> wrt = f.named();
      // Model checks differentiate the network's own parameters.
      if (!keep.empty() && wrt.empty())
        for (auto& np : keep.back()->net.params().learnable()) wrt.push_back(np);
      std::vector<NamedParameter<double>> zero;
      std::erase_if(wrt, [&](const NamedParameter<double>& np) {
        if (!def.structural_zero(np.name)) return false;
        zero.push_back(np);
        return true;
      });
      if (!zero.empty()) {
        for (auto& np : zero) np.param->zero_grad();
        Tape<double> tape;
        tape.backward(build(tape));
        for (const auto& np : zero)
          for (double g : np.param->grad) check.max_structural_zero = std::max(check.max_structural_zero, std::abs(g));
      }
      GradcheckOptions go;
      go.max_elements_per_tensor = def.max_elements;
      go.seed = seed;
      go.skip_kinks = def.composite;
      go.kink_tolerance = def.threshold;
      const GradcheckResult r = gradcheck(build, wrt, go);
      check.checked += r.checked;
      check.skipped_kinks += r.skipped;
      if (r.max_rel_error >= check.max_rel_error) {
        check.max_rel_error = r.max_rel_error;
        check.worst = r.worst;
        check.worst_analytic = r.worst_analytic;
        check.worst_numeric = r.worst_numeric;
      }
    }
    const double sampled = static_cast<double>(check.checked + check.skipped_kinks);
    check.passed = check.max_rel_error < check.threshold && check.max_structural_zero < kStructuralZeroTolerance &&
                   static_cast<double>(check.skipped_kinks) <= kMaxKinkFraction * sampled;
    out.push_back(std::move(check));
  }
  return out;
}

}  // namespace moct::ad
