// Copyright 2026 The kmunet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "kmunet/numerics/tensor.hpp"

namespace kmunet {

template <typename T>
using NamedTensor = std::pair<std::string, Tensor<T>>;

template <typename T>
using ParamList = std::vector<NamedTensor<T>>;

template <typename T>
std::size_t count_parameters(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& [name, t] : params) n += t.numel();
  return n;
}

// Deterministic parameter initialization. Values are drawn in double and
// rounded to T, so float and double models built from one seed agree up to
// that rounding.
template <typename T>
class Initializer {
 public:
  explicit Initializer(std::uint64_t seed) : rng_(seed) {}

  Tensor<T> uniform(Shape shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> values(shape_numel(shape));
    for (T& v : values) v = static_cast<T>(dist(rng_));
    return leaf(std::move(shape), std::move(values));
  }

  // He-uniform for a layer with `fan_in` inputs.
  Tensor<T> he_uniform(Shape shape, std::size_t fan_in) {
    return uniform(std::move(shape), std::sqrt(6.0 / static_cast<double>(fan_in)));
  }

  Tensor<T> constant(Shape shape, double value) {
    std::vector<T> values(shape_numel(shape), static_cast<T>(value));
    return leaf(std::move(shape), std::move(values));
  }

  double draw_uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  std::mt19937_64& rng() { return rng_; }

  static Tensor<T> leaf(Shape shape, std::vector<T> values) {
    Tensor<T> t(std::move(shape), std::move(values));
    t.set_requires_grad(true);
    return t;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace kmunet
