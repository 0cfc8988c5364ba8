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

#include "moctrans/eval/wilcoxon.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moctrans/error.hpp"

namespace moct::eval {

std::vector<double> signed_rank_magnitudes(std::span<const double> abs_values) {
  const std::size_t n = abs_values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return abs_values[a] < abs_values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && abs_values[order[j + 1]] == abs_values[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

double wilcoxon_exact_p(std::span<const double> ranks, double w) {
  const std::size_t n = ranks.size();
  if (n > 30) throw DataError("wilcoxon_exact_p: n=" + std::to_string(n) + " too large to enumerate");
  // Ranks are multiples of 0.5; work in doubled integers.
  std::vector<long> r2(n);
  long total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    r2[i] = std::lround(2 * ranks[i]);
    total += r2[i];
  }
  const long w2 = std::lround(2 * w);
  const std::uint64_t cases = std::uint64_t{1} << n;
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < cases; ++mask) {
    long plus = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) plus += r2[i];
    if (std::min(plus, total - plus) <= w2) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(cases);
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("wilcoxon: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()) + " paired values");
  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) diffs.push_back(a[i] - b[i]);
  const int n = static_cast<int>(diffs.size());
  if (n < kWilcoxonMinN)
    throw DataError("wilcoxon: " + std::to_string(n) + " nonzero differences, need at least " + std::to_string(kWilcoxonMinN));
  std::vector<double> mags(diffs.size());
  std::transform(diffs.begin(), diffs.end(), mags.begin(), [](double d) { return std::abs(d); });
  const std::vector<double> ranks = signed_rank_magnitudes(mags);
  WilcoxonResult r;
  r.n = n;
  double total = 0;
  for (std::size_t i = 0; i < diffs.size(); ++i) {
    total += ranks[i];
    if (diffs[i] > 0) r.w_plus += ranks[i];
  }
  r.w = std::min(r.w_plus, total - r.w_plus);
  if (n <= kWilcoxonExactMaxN) {
    r.exact = true;
    r.p_value = wilcoxon_exact_p(ranks, r.w);
    return r;
  }
  const double nn = n;
  const double mean = nn * (nn + 1) / 4.0;
  double var = nn * (nn + 1) * (2 * nn + 1) / 24.0;
  std::vector<double> sorted(ranks);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i);
    var -= (t * t * t - t) / 48.0;
    i = j;
  }
  const double z = std::max(0.0, std::abs(r.w - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

}  // namespace moct::eval
