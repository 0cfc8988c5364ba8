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

#include "moctrans/autodiff/adam.hpp"

#include <cmath>

#include "moctrans/error.hpp"

namespace moct::ad {

template <typename T>
void adam_step(std::span<const NamedParameter<T>> params, AdamState<T>& state) {
  for (const auto& np : params) {
    const Parameter<T>& p = *np.param;
    if (p.grad.empty()) continue;
    if (p.grad.size() != p.value.size()) throw ShapeError("adam_step: gradient size mismatch for " + np.name);
    for (std::size_t i = 0; i < p.grad.size(); ++i) {
      if (!std::isfinite(p.grad[i])) {
        throw NumericalError("adam_step: non-finite gradient in parameter '" + np.name + "' at element " + std::to_string(i));
      }
    }
  }
  const AdamConfig& c = state.config;
  state.t += 1;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  // Complements taken in double: 1 - (float)0.999 is off by 1.3e-5 relative.
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T one_minus_b1 = static_cast<T>(1.0 - c.beta1), one_minus_b2 = static_cast<T>(1.0 - c.beta2);
  const T step = static_cast<T>(c.lr / bc1);
  const T inv_bc2 = static_cast<T>(1.0 / bc2);
  const T eps = static_cast<T>(c.eps);
  for (const auto& np : params) {
    Parameter<T>& p = *np.param;
    std::vector<T>& m = state.first[np.name];
    std::vector<T>& v = state.second[np.name];
    if (m.size() != p.value.size()) m.assign(p.value.size(), T(0));
    if (v.size() != p.value.size()) v.assign(p.value.size(), T(0));
    if (p.grad.empty()) continue;
    for (std::size_t i = 0; i < m.size(); ++i) {
      const T g = p.grad[i];
      m[i] = b1 * m[i] + one_minus_b1 * g;
      v[i] = b2 * v[i] + one_minus_b2 * g * g;
      p.value.data[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + eps);
    }
  }
}

template void adam_step(std::span<const NamedParameter<float>>, AdamState<float>&);
template void adam_step(std::span<const NamedParameter<double>>, AdamState<double>&);

}  // namespace moct::ad
