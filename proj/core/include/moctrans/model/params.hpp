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
#include <deque>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "moctrans/autodiff/adam.hpp"
#include "moctrans/autodiff/tensor.hpp"
#include "moctrans/error.hpp"
#include "moctrans/model/config.hpp"

namespace moct::model {

enum class InitKind { HeNormal, Zeros, Ones, PositionalNormal };

struct ParamSpec {
  std::string name;
  ad::Shape shape;
  InitKind init = InitKind::Zeros;
  std::size_t fan_in = 0;
  bool learnable = true;
};

// Every tensor the architecture owns, in creation order. Non-learnable
// entries are batch-norm running statistics.
std::vector<ParamSpec> parameter_layout(const ModelConfig& config);

// Named tensors in insertion order; each name appears exactly once.
template <typename T>
class ParameterStore {
 public:
  struct Entry {
    std::string name;
    ad::Parameter<T> param;
    bool learnable = true;
  };

  ad::Parameter<T>& add(std::string name, ad::Tensor<T> value, bool learnable = true) {
    if (index_.count(name) != 0) throw ConfigError("parameter '" + name + "' registered twice");
    index_.emplace(name, entries_.size());
    Entry& e = entries_.emplace_back();
    e.name = std::move(name);
    e.param.value = std::move(value);
    e.param.requires_grad = learnable;
    e.learnable = learnable;
    return e.param;
  }

  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  ad::Parameter<T>& at(std::string_view name) { return entries_[lookup(name)].param; }
  const ad::Parameter<T>& at(std::string_view name) const { return entries_[lookup(name)].param; }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::vector<ad::NamedParameter<T>> learnable() {
    std::vector<ad::NamedParameter<T>> out;
    for (Entry& e : entries_)
      if (e.learnable) out.push_back({e.name, &e.param});
    return out;
  }

  // Element count over learnable entries.
  std::size_t learnable_count() const {
    std::size_t n = 0;
    for (const Entry& e : entries_)
      if (e.learnable) n += e.param.value.size();
    return n;
  }

  void zero_grad() {
    for (Entry& e : entries_)
      if (e.learnable) e.param.zero_grad();
  }

  template <typename U>
  ParameterStore<U> cast() const {
    ParameterStore<U> out;
    for (const Entry& e : entries_) out.add(e.name, e.param.value.template cast<U>(), e.learnable);
    return out;
  }

 private:
  std::size_t lookup(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw ConfigError("no parameter named '" + std::string(name) + "'");
    return it->second;
  }

  std::deque<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Fan-in scaled normal weights (std sqrt(2/fan_in)), zero biases, unit
// norm scales, N(0, 0.02) positional embedding. Deterministic per seed.
ParameterStore<float> param_init(const ModelConfig& config, std::uint64_t seed);

// Learnable element count; task tokens and running statistics excluded.
std::size_t count_params(const ModelConfig& config);

// Throws ConfigError naming the first tensor that is missing or whose shape
// disagrees with the layout for `config`.
template <typename T>
void check_against_layout(const ParameterStore<T>& store, const ModelConfig& config);

}  // namespace moct::model
