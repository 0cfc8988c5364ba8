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

#include "moctrans/autodiff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace moct::ad {

GradcheckResult gradcheck(const LossBuilder& build, std::span<const NamedParameter<double>> wrt,
                          const GradcheckOptions& options) {
  for (const auto& np : wrt) np.param->zero_grad();
  {
    Tape<double> tape;
    Var<double> loss = build(tape);
    tape.backward(loss);
  }
  auto evaluate = [&] {
    Tape<double> tape(false);
    return build(tape).value()[0];
  };

  const double center = options.skip_kinks ? evaluate() : 0.0;
  GradcheckResult result;
  std::mt19937_64 rng(options.seed);
  for (const auto& np : wrt) {
    Parameter<double>& p = *np.param;
    const std::vector<double> analytic = p.grad;
    std::vector<std::size_t> order(p.value.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (options.max_elements_per_tensor != 0 && order.size() > options.max_elements_per_tensor) {
      std::shuffle(order.begin(), order.end(), rng);
      order.resize(options.max_elements_per_tensor);
    }
    for (std::size_t i : order) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = evaluate();
      p.value[i] = saved - options.step;
      const double down = evaluate();
      p.value[i] = saved;
      if (options.skip_kinks) {
        const double right = (up - center) / options.step, left = (center - down) / options.step;
        if (std::abs(right - left) > options.kink_tolerance * std::max({std::abs(right), std::abs(left), 1e-8})) {
          ++result.skipped;
          continue;
        }
      }
      const double fd = (up - down) / (2 * options.step);
      const double a = analytic[i];
      const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
      ++result.checked;
      if (err >= result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = np.name + "[" + std::to_string(i) + "]";
        result.worst_analytic = a;
        result.worst_numeric = fd;
      }
    }
  }
  return result;
}

}  // namespace moct::ad
