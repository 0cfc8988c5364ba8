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

#include <filesystem>
#include <string>
#include <unistd.h>

#include "moctrans/synthdata/generate.hpp"

namespace fixture {

// Per-process scratch root, removed when the process exits.
inline const std::filesystem::path& scratch_root() {
  struct Root {
    std::filesystem::path path = std::filesystem::temp_directory_path() / ("moct_test_" + std::to_string(::getpid()));
    ~Root() {
      std::error_code ec;
      std::filesystem::remove_all(path, ec);
    }
  };
  static const Root root;
  return root.path;
}

inline std::filesystem::path scratch(const std::string& name) {
  const auto dir = scratch_root() / name;
  std::filesystem::create_directories(dir);
  return dir;
}

// Desk suite for seed 7, generated once per process.
inline const moct::data::DatasetManifest& desk_suite() {
  static const moct::data::DatasetManifest m =
      moct::data::generate_suite(scratch("suite").string(), 7, moct::data::SuiteScale::Desk);
  return m;
}

}  // namespace fixture
