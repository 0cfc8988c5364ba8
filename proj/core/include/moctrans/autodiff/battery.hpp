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
#include <string>
#include <vector>

namespace moct::ad {

inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kCompositeTolerance = 1e-3;
// Parameters whose gradient vanishes identically (a key bias under softmax,
// a conv bias feeding train-mode batch norm) are checked in absolute terms.
inline constexpr double kStructuralZeroTolerance = 1e-9;
// Composite checks may drop elements whose finite-difference step crosses a
// ReLU or max-pool switch, at most this fraction of those sampled.
inline constexpr double kMaxKinkFraction = 0.05;

struct BatteryOptions {
  std::uint64_t seed = 1;
  int seeds = 1;                 // randomized repetitions per check
  bool include_model = true;     // full model forward + combined loss
  // Negative control: routes the gradient of one ReLU through negative
  // inputs so that its check must fail.
  bool corrupt_backward = false;
};

struct BatteryCheck {
  std::string name;
  double threshold = 0;
  double max_rel_error = 0;  // worst over seeds
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst;
  double worst_analytic = 0;
  double worst_numeric = 0;
  // Largest |analytic gradient| over structurally-zero parameters; 0 if none.
  double max_structural_zero = 0;
  bool passed = false;
};

// Every primitive at kPrimitiveTolerance and the composites at
// kCompositeTolerance, in 64-bit arithmetic.
std::vector<BatteryCheck> run_gradcheck_battery(const BatteryOptions& options = {});

}  // namespace moct::ad
