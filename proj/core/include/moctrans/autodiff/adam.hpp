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
#include <span>
#include <string>
#include <vector>

#include "moctrans/autodiff/tensor.hpp"

namespace moct::ad {

template <typename T>
struct NamedParameter {
  std::string name;
  Parameter<T>* param = nullptr;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  AdamConfig config;
  std::int64_t t = 0;
  // Per-parameter first and second moment buffers, keyed by parameter name.
  std::map<std::string, std::vector<T>> first;
  std::map<std::string, std::vector<T>> second;
};

// One bias-corrected Adam update over every parameter in `params`. All
// gradients are validated before any value changes; a non-finite entry
// raises NumericalError naming the parameter.
template <typename T>
void adam_step(std::span<const NamedParameter<T>> params, AdamState<T>& state);

}  // namespace moct::ad
