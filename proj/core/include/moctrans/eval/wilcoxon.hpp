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

#include <span>
#include <vector>

namespace moct::eval {

struct WilcoxonResult {
  double p_value = 1.0;  // two-sided
  double w = 0;          // min(W+, W-)
  double w_plus = 0;
  int n = 0;             // nonzero differences
  bool exact = false;
};

// Mean ranks of |values|, ties averaged; ranks start at 1.
std::vector<double> signed_rank_magnitudes(std::span<const double> abs_values);

// Exact two-sided p by enumerating all 2^n sign assignments of `ranks`:
// the fraction whose min(W+, W-) <= w.
double wilcoxon_exact_p(std::span<const double> ranks, double w);

// Paired test on a_i - b_i. Zero differences are dropped; exact for n <= 12,
// otherwise normal approximation with tie and continuity corrections.
// Throws DataError with fewer than 5 nonzero differences.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr int kWilcoxonExactMaxN = 12;
inline constexpr int kWilcoxonMinN = 5;

}  // namespace moct::eval
