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

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "moctrans/autodiff/battery.hpp"
#include "moctrans/cli/run_config.hpp"
#include "moctrans/error.hpp"
#include "moctrans/eval/evaluate.hpp"
#include "moctrans/eval/report.hpp"
#include "moctrans/model/checkpoint.hpp"
#include "moctrans/synthdata/generate.hpp"
#include "moctrans/synthdata/manifest.hpp"
#include "moctrans/training/samples.hpp"
#include "moctrans/training/trainer.hpp"

namespace fs = std::filesystem;
using namespace moct;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

int report_error(int code, std::string_view kind, const std::string& message) {
  nlohmann::json j{{"error", kind}, {"code", code}, {"message", message}};
  std::cerr << j.dump() << '\n';
  return code;
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("cannot write '" + path.string() + "'");
}

data::DatasetManifest load_manifest(const cli::RunConfig& rc) {
  const std::string path = (fs::path(rc.data_root) / "manifest.json").string();
  if (!fs::exists(path)) throw DataError("manifest not found at '" + path + "'");
  data::DatasetManifest m = data::read_manifest(path);
  m.validate_paths();
  return m;
}

std::string method_dir(const cli::RunConfig& rc) {
  return rc.method() == train::Method::BaseSingle ? rc.variant + "_" + rc.dataset : rc.variant;
}

int cmd_generate(const std::string& out, std::uint64_t seed, const std::string& scale) {
  const data::SuiteScale s = data::parse_scale(scale);
  data::generate_suite(out, seed, s);
  std::cout << (fs::path(out) / "manifest.json").string() << '\n';
  return kOk;
}

int cmd_train(const std::string& config_path, int fold, const std::string& variant, const std::string& dataset) {
  cli::RunConfig rc = cli::load_run_config(config_path);
  if (!variant.empty()) rc.variant = variant;
  if (!dataset.empty()) rc.dataset = dataset;
  const train::Method method = rc.method();
  if (method == train::Method::BaseSingle && rc.dataset.empty()) throw UsageError("base_single needs --dataset");
  if (fold < 0 || fold >= 5) throw UsageError("fold " + std::to_string(fold) + " outside [0,5)");
  const data::DatasetManifest manifest = load_manifest(rc);
  const train::FoldPlan plan = train::kfold_split(manifest, 5, rc.seed);

  train::TrainRequest req;
  req.method = method;
  req.dataset = rc.dataset;
  req.fold = fold;
  req.model = rc.model;
  req.train = rc.train;
  const train::TrainResult result = train::train_run(manifest, plan, req, [](const train::EpochRecord& r) {
    std::fprintf(stderr, "epoch %d loss %.5f val_dice %.4f\n", r.epoch, r.mean_train_loss, r.mean_val_dice);
  });
  const fs::path dir = fs::path(rc.output) / method_dir(rc) / ("fold" + std::to_string(fold));
  fs::create_directories(dir);
  model::save_checkpoint((dir / "best.ckpt").string(), result.best.config, result.best.meta, result.best.params);
  write_text(dir / "history.csv", train::history_csv(result));
  std::cout << "checkpoint " << (dir / "best.ckpt").string() << " (epoch " << result.best_epoch << ")\n";
  const train::EpochRecord& last = result.history.back();
  for (int t : result.tasks) {
    auto it = last.val_dice.find(t);
    std::printf("final val_dice task %d: %s\n", t, it == last.val_dice.end() ? "NA" : std::to_string(it->second).c_str());
  }
  return kOk;
}

int cmd_eval(const std::string& config_path, const std::vector<std::string>& checkpoints, const std::string& out_override) {
  const cli::RunConfig rc = cli::load_run_config(config_path);
  const data::DatasetManifest manifest = load_manifest(rc);
  const train::FoldPlan plan = train::kfold_split(manifest, 5, rc.seed);
  std::vector<eval::MethodResults> methods;
  std::map<std::string, std::size_t> by_method;
  std::map<std::string, train::LoadedSubject> cache;
  for (const std::string& path : checkpoints) {
    model::Checkpoint ck = model::load_checkpoint(path);
    if (ck.meta.fold < 0 || ck.meta.fold >= plan.k) throw DataError(path + ": checkpoint fold " + std::to_string(ck.meta.fold) + " invalid");
    model::MoCtrans<float> net(ck.config, std::move(ck.params));
    auto [it, fresh] = by_method.emplace(ck.meta.method, methods.size());
    if (fresh) methods.push_back({ck.meta.method, {}});
    eval::MethodResults& mr = methods[it->second];
    const std::set<std::string> scope(ck.meta.datasets.begin(), ck.meta.datasets.end());
    for (const train::SubjectRef& ref : plan.split(ck.meta.fold).test) {
      if (!scope.count(ref.dataset)) continue;
      const std::string key = ref.dataset + "/" + ref.subject;
      if (!cache.count(key)) cache.emplace(key, train::load_subject(manifest, ref));
      std::vector<eval::EvalWarning> warnings;
      for (auto& r : eval::evaluate_subject(net, cache.at(key), manifest, &warnings)) mr.results.push_back(std::move(r));
      for (const auto& w : warnings)
        std::fprintf(stderr, "warning: %s %s task %d: %s\n", w.dataset.c_str(), w.subject.c_str(), w.task_id, w.reason.c_str());
    }
  }
  const eval::MetricsReport report = eval::aggregate_report(methods);
  const fs::path dir = out_override.empty() ? fs::path(rc.output) / "eval" : fs::path(out_override);
  write_text(dir / "report.csv", eval::report_csv(report));
  std::cout << (dir / "report.csv").string() << '\n';
  if (methods.size() >= 2) {
    write_text(dir / "pairwise.csv", eval::pairwise_csv(report));
    std::cout << (dir / "pairwise.csv").string() << '\n';
  }
  return kOk;
}

int cmd_predict(const std::string& checkpoint, const std::string& image, int task, const std::string& out) {
  model::Checkpoint ck = model::load_checkpoint(checkpoint);
  if (ck.config.class_for_task(task) < 0)
    throw UsageError("task " + std::to_string(task) + " is not predicted by this checkpoint");
  model::MoCtrans<float> net(ck.config, std::move(ck.params));
  const data::Volume vol = data::read_volume(image);
  const auto masks = eval::predict_volume(net, vol, task);
  fs::create_directories(out);
  std::string index;
  char name[64];
  for (std::size_t z = 0; z < masks.size(); ++z) {
    std::snprintf(name, sizeof name, "slice_%03zu.pgm", z);
    std::string pgm = "P5 " + std::to_string(vol.width) + " " + std::to_string(vol.height) + " 255\n";
    std::size_t fg = 0;
    for (std::uint8_t v : masks[z]) {
      pgm += static_cast<char>(v ? 255 : 0);
      fg += v;
    }
    write_text(fs::path(out) / name, pgm);
    index += std::to_string(z) + " " + name + " " + std::to_string(fg) + "\n";
  }
  write_text(fs::path(out) / "index.txt", index);
  std::cout << masks.size() << " slices written to " << out << '\n';
  return kOk;
}

int cmd_gradcheck(int seeds, bool corrupt, bool skip_model) {
  ad::BatteryOptions opts;
  opts.seeds = seeds;
  opts.corrupt_backward = corrupt;
  opts.include_model = !skip_model;
  bool ok = true;
  for (const ad::BatteryCheck& c : ad::run_gradcheck_battery(opts)) {
    std::printf("%-40s max_rel_error %.3e threshold %.0e %s\n", c.name.c_str(), c.max_rel_error, c.threshold, c.passed ? "PASS" : "FAIL");
    ok = ok && c.passed;
  }
  if (!ok) return report_error(kNumerical, "numerical", "gradient check failed");
  std::printf("all gradient checks passed\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MO-CTranS segmentation toolkit"};
  app.require_subcommand(1);

  std::string gen_out, gen_scale = "desk";
  std::uint64_t gen_seed = 7;
  auto* gen = app.add_subcommand("generate", "write the synthetic dataset suite");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--scale", gen_scale, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));

  std::string train_config, train_variant, train_dataset;
  int train_fold = 0;
  auto* tr = app.add_subcommand("train", "train one method on one fold");
  tr->add_option("--config", train_config, "run config (TOML)")->required();
  tr->add_option("--fold", train_fold, "fold index in [0,5)")->required();
  tr->add_option("--variant", train_variant, "mo_ctrans, base_single or base_multi");
  tr->add_option("--dataset", train_dataset, "dataset for base_single");

  std::string eval_config, eval_out;
  std::vector<std::string> eval_ckpts;
  auto* ev = app.add_subcommand("eval", "evaluate checkpoints on their test folds");
  ev->add_option("--config", eval_config, "run config (TOML)")->required();
  ev->add_option("--checkpoints", eval_ckpts, "comma-separated checkpoint paths")->required()->delimiter(',');
  ev->add_option("--out", eval_out, "report directory (default <output>/eval)");

  std::string pred_ckpt, pred_image, pred_out;
  int pred_task = 0;
  auto* pr = app.add_subcommand("predict", "export per-slice masks as PGM");
  pr->add_option("--checkpoint", pred_ckpt, "checkpoint to load")->required();
  pr->add_option("--image", pred_image, "image volume (.mvol)")->required();
  pr->add_option("--task", pred_task, "task id to segment")->required();
  pr->add_option("--out", pred_out, "directory for slice_<z>.pgm masks")->required();

  int gc_seeds = 1;
  bool gc_corrupt = false, gc_skip_model = false;
  auto* gc = app.add_subcommand("gradcheck", "run the finite-difference gradient battery");
  gc->add_option("--seeds", gc_seeds, "random repetitions per check");
  gc->add_flag("--corrupt-backward", gc_corrupt, "negative control: break one backward pass");
  gc->add_flag("--skip-model", gc_skip_model, "primitives only");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    return report_error(kUsage, "usage", e.what());
  }

  try {
    if (*gen) return cmd_generate(gen_out, gen_seed, gen_scale);
    if (*tr) return cmd_train(train_config, train_fold, train_variant, train_dataset);
    if (*ev) return cmd_eval(eval_config, eval_ckpts, eval_out);
    if (*pr) return cmd_predict(pred_ckpt, pred_image, pred_task, pred_out);
    if (*gc) return cmd_gradcheck(gc_seeds, gc_corrupt, gc_skip_model);
  } catch (const DataError& e) {
    return report_error(kData, "data", e.what());
  } catch (const NumericalError& e) {
    return report_error(kNumerical, "numerical", e.what());
  } catch (const std::invalid_argument& e) {
    return report_error(kUsage, "usage", e.what());
  } catch (const std::exception& e) {
    return report_error(kData, "io", e.what());
  }
  return kUsage;
}
