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

#include "moctrans/synthdata/generate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

namespace moct::data {
namespace {

namespace fs = std::filesystem;

// Base geometry in normalized image coordinates; z extent as a fraction of depth.
struct OrganTemplate {
  std::string organ;
  double cx, cy, rx, ry;
  double rz_frac;
  double intensity;
};

struct ViewTemplate {
  double body_rx, body_ry;
  std::vector<OrganTemplate> organs;  // painted in order; later organs win overlaps
};

const ViewTemplate& view_template(const std::string& view) {
  static const ViewTemplate view_a{0.44, 0.38,
                                   {{"organ-L", 0.36, 0.46, 0.18, 0.16, 0.45, 0.55},
                                    {"organ-K", 0.38, 0.74, 0.06, 0.05, 0.30, 0.72},
                                    {"organ-K", 0.63, 0.74, 0.06, 0.05, 0.30, 0.72},
                                    {"organ-S", 0.71, 0.55, 0.10, 0.12, 0.36, 0.75}}};
  static const ViewTemplate view_b{0.40, 0.45,
                                   {{"organ-L", 0.34, 0.33, 0.17, 0.13, 0.45, 0.55},
                                    {"organ-K", 0.35, 0.66, 0.08, 0.12, 0.32, 0.72},
                                    {"organ-K", 0.65, 0.66, 0.08, 0.12, 0.32, 0.72},
                                    {"organ-S", 0.70, 0.31, 0.09, 0.12, 0.36, 0.76}}};
  if (view == "view-a") return view_a;
  if (view == "view-b") return view_b;
  throw DataError("unknown view '" + view + "'");
}

struct Blob {
  int region;
  double cx, cy, rx, ry, angle;
  double cz, rz;
  double a2, p2, a3, p3;
};

bool inside(const Blob& b, double z, double u, double v) {
  const double dz = std::abs(z - b.cz) / b.rz;
  if (dz >= 1.0) return false;
  const double profile = std::pow(1.0 - std::pow(dz, 6.0), 1.0 / 6.0);
  const double du = u - b.cx, dv = v - b.cy;
  const double ca = std::cos(b.angle), sa = std::sin(b.angle);
  const double a = (ca * du + sa * dv) / b.rx;
  const double c = (-sa * du + ca * dv) / b.ry;
  const double r = std::sqrt(a * a + c * c);
  const double theta = std::atan2(c, a);
  const double edge = profile * (1.0 + b.a2 * std::sin(2 * theta + b.p2) + b.a3 * std::sin(3 * theta + b.p3));
  return r < edge;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

SuiteScale parse_scale(const std::string& s) {
  if (s == "desk") return SuiteScale::Desk;
  if (s == "paper") return SuiteScale::Paper;
  throw ConfigError("unknown scale '" + s + "' (expected desk or paper)");
}

std::string scale_name(SuiteScale s) { return s == SuiteScale::Desk ? "desk" : "paper"; }

SuiteLayout suite_layout(SuiteScale scale) {
  if (scale == SuiteScale::Desk) return {12, 64, {7.0f, 7.0f, 7.0f}, {{"S1", 6}, {"S2", 6}, {"S3", 5}, {"S4", 25}}};
  return {35, 256, {7.0f, 1.75f, 1.75f}, {{"S1", 18}, {"S2", 17}, {"S3", 20}, {"S4", 100}}};
}

std::vector<TaskSpec> suite_tasks() {
  return {{1, "view-a", "organ-L"}, {2, "view-a", "organ-S"}, {3, "view-b", "organ-S"}, {4, "view-b", "organ-K"}};
}

GeneratedSubject generate_subject(const std::string& view, const SuiteLayout& layout, std::uint64_t seed) {
  const ViewTemplate& tmpl = view_template(view);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };
  std::normal_distribution<double> gauss(0.0, 1.0);

  const int depth = layout.depth, hw = layout.hw;
  const double shift_x = uniform(-0.03, 0.03), shift_y = uniform(-0.03, 0.03);
  const double size = uniform(0.92, 1.08);
  const double z_mid = (depth - 1) / 2.0 + uniform(-0.06, 0.06) * depth;

  std::vector<Blob> blobs;
  std::vector<double> region_intensity{0.05, 0.30};  // 0 outside body, 1 body
  std::vector<std::string> region_organ{"", ""};
  for (const OrganTemplate& o : tmpl.organs) {
    Blob b;
    b.region = static_cast<int>(region_intensity.size());
    b.cx = o.cx + shift_x + 0.015 * gauss(rng);
    b.cy = o.cy + shift_y + 0.015 * gauss(rng);
    b.rx = o.rx * size * uniform(0.9, 1.1);
    b.ry = o.ry * size * uniform(0.9, 1.1);
    b.angle = uniform(-0.25, 0.25);
    b.cz = z_mid + uniform(-0.04, 0.04) * depth;
    b.rz = o.rz_frac * depth * uniform(0.9, 1.1);
    b.a2 = uniform(0.0, 0.08);
    b.p2 = uniform(0.0, 2 * std::numbers::pi);
    b.a3 = uniform(0.0, 0.05);
    b.p3 = uniform(0.0, 2 * std::numbers::pi);
    blobs.push_back(b);
    region_intensity.push_back(o.intensity + 0.03 * gauss(rng));
    region_organ.push_back(o.organ);
  }
  const double body_rx = tmpl.body_rx * uniform(0.95, 1.05), body_ry = tmpl.body_ry * uniform(0.95, 1.05);
  const double bias_fx = uniform(0.5, 1.5), bias_fy = uniform(0.5, 1.5), bias_phase = uniform(0.0, 2 * std::numbers::pi);

  GeneratedSubject out;
  out.image = Volume(depth, hw, hw, layout.spacing);
  for (const OrganTemplate& o : tmpl.organs)
    if (out.organs.count(o.organ) == 0) out.organs.emplace(o.organ, LabelVolume(depth, hw, hw, layout.spacing));

  for (int z = 0; z < depth; ++z) {
    for (int y = 0; y < hw; ++y) {
      const double v = (y + 0.5) / hw;
      for (int x = 0; x < hw; ++x) {
        const double u = (x + 0.5) / hw;
        const double bu = (u - 0.5 - shift_x) / body_rx, bv = (v - 0.5 - shift_y) / body_ry;
        int region = bu * bu + bv * bv < 1.0 ? 1 : 0;
        if (region == 1)
          for (const Blob& b : blobs)
            if (inside(b, z, u, v)) region = b.region;
        const double bias = 1.0 + 0.08 * std::sin(2 * std::numbers::pi * (bias_fx * u + bias_fy * v) + bias_phase);
        out.image.at(z, y, x) = static_cast<float>(region_intensity[static_cast<std::size_t>(region)] * bias + 0.05 * gauss(rng));
        if (region >= 2) out.organs.at(region_organ[static_cast<std::size_t>(region)]).at(z, y, x) = 1;
      }
    }
  }
  return out;
}

DatasetManifest generate_suite(const std::string& root, std::uint64_t seed, SuiteScale scale) {
  const SuiteLayout layout = suite_layout(scale);
  struct Plan {
    std::string name, view;
    std::vector<std::string> labelled, eval_only;
  };
  const std::vector<Plan> plans{{"S1", "view-a", {"organ-L"}, {"organ-S"}},
                                {"S2", "view-a", {"organ-L", "organ-S"}, {}},
                                {"S3", "view-b", {"organ-S"}, {}},
                                {"S4", "view-b", {"organ-K"}, {}}};

  DatasetManifest m;
  m.seed = seed;
  m.scale = scale_name(scale);
  m.tasks = suite_tasks();
  m.root = root;

  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw DataError("cannot create output directory '" + root + "'");

  for (std::size_t di = 0; di < plans.size(); ++di) {
    const Plan& plan = plans[di];
    DatasetRecord d;
    d.name = plan.name;
    d.view = plan.view;
    for (const auto& t : m.tasks)
      if (t.view == plan.view) {
        const bool used = std::count(plan.labelled.begin(), plan.labelled.end(), t.organ) > 0 ||
                          std::count(plan.eval_only.begin(), plan.eval_only.end(), t.organ) > 0;
        if (used) d.organ_tasks[t.organ] = t.task_id;
      }
    const int count = layout.subject_counts.at(plan.name);
    for (int si = 0; si < count; ++si) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%03d", plan.name.c_str(), si);
      const std::uint64_t subject_seed = splitmix(splitmix(seed) ^ (static_cast<std::uint64_t>(di) << 32 | static_cast<std::uint64_t>(si)));
      const GeneratedSubject g = generate_subject(plan.view, layout, subject_seed);

      SubjectRecord s;
      s.id = id;
      const fs::path rel = fs::path(plan.name) / s.id;
      fs::create_directories(fs::path(root) / rel / "labels", ec);
      if (!plan.eval_only.empty()) fs::create_directories(fs::path(root) / rel / "eval_only", ec);
      if (ec) throw DataError("cannot create '" + (fs::path(root) / rel).string() + "'");
      s.image = (rel / "image.mvol").generic_string();
      write_mvol(m.resolve(s.image), g.image);
      for (const auto& organ : plan.labelled) {
        s.labels[organ] = (rel / "labels" / (organ + ".mvol")).generic_string();
        write_mvol(m.resolve(s.labels[organ]), g.organs.at(organ));
      }
      for (const auto& organ : plan.eval_only) {
        s.eval_only[organ] = (rel / "eval_only" / (organ + ".mvol")).generic_string();
        write_mvol(m.resolve(s.eval_only[organ]), g.organs.at(organ));
      }
      d.subjects.push_back(std::move(s));
    }
    m.datasets.push_back(std::move(d));
  }
  m.validate();
  write_manifest((fs::path(root) / "manifest.json").string(), m);
  return m;
}

}  // namespace moct::data
