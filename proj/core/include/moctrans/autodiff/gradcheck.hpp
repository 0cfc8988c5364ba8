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
#include <functional>
#include <span>
#include <string>

#include "moctrans/autodiff/adam.hpp"
#include "moctrans/autodiff/tape.hpp"

namespace moct::ad {

struct GradcheckOptions {
  double step = 1e-5;
  // 0 checks every element; otherwise a seeded random subset per tensor.
  std::size_t max_elements_per_tensor = 0;
  std::uint64_t seed = 0;
  // Skip elements whose one-sided slopes (f(x+h)-f(x))/h and (f(x)-f(x-h))/h
  // differ by more than kink_tolerance relative: the step straddles a
  // ReLU or max-pool switch, where no derivative exists.
  bool skip_kinks = false;
  double kink_tolerance = 1e-2;
};

struct GradcheckResult {
  double max_rel_error = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // elements dropped as kinks
  std::string worst;  // "<name>[<index>]" of the worst element
  double worst_analytic = 0;
  double worst_numeric = 0;
};

// Builds a scalar loss on the given tape. Must enroll every checked
// parameter with Tape::param and must not depend on hidden mutable state.
using LossBuilder = std::function<Var<double>(Tape<double>&)>;

// Central finite differences against the analytic gradient. Error per
// element is |a - f| / max(|a|, |f|, 1e-8); returns the maximum.
GradcheckResult gradcheck(const LossBuilder& build, std::span<const NamedParameter<double>> wrt,
                          const GradcheckOptions& options = {});

}  // namespace moct::ad
