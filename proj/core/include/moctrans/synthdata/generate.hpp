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

#include "moctrans/synthdata/manifest.hpp"

namespace moct::data {

enum class SuiteScale { Desk, Paper };

SuiteScale parse_scale(const std::string& s);
std::string scale_name(SuiteScale s);

struct SuiteLayout {
  int depth = 0;
  int hw = 0;
  Spacing spacing;
  std::map<std::string, int> subject_counts;  // S1..S4
};

// Desk: 12x64x64 volumes, {S1:6, S2:6, S3:5, S4:25}.
// Paper: 35x256x256 volumes, {S1:18, S2:17, S3:20, S4:100}.
SuiteLayout suite_layout(SuiteScale scale);

// Task ids: 1 view-a organ-L, 2 view-a organ-S, 3 view-b organ-S, 4 view-b organ-K.
std::vector<TaskSpec> suite_tasks();

// Writes <root>/<dataset>/<subject>/{image.mvol, labels/<organ>.mvol,
// eval_only/<organ>.mvol} and <root>/manifest.json. Byte-identical per seed.
//   S1 view-a, organ-L labelled, organ-S present but evaluation-only
//   S2 view-a, organ-L and organ-S labelled
//   S3 view-b, organ-S labelled (small)
//   S4 view-b, organ-K labelled (large)
DatasetManifest generate_suite(const std::string& root, std::uint64_t seed, SuiteScale scale);

// In-memory generation of one subject, for tests and tooling.
struct GeneratedSubject {
  Volume image;
  std::map<std::string, LabelVolume> organs;  // every organ drawn, labelled or not
};
GeneratedSubject generate_subject(const std::string& view, const SuiteLayout& layout, std::uint64_t seed);

}  // namespace moct::data
