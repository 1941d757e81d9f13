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

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "kmunet/numerics/tensor.hpp"

namespace kmunet {

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  // Lower bound on the denominator of the relative error so coordinates with
  // a vanishing gradient are compared in absolute terms.
  double denominator_floor = 1e-3;
  // Coordinates checked per leaf; 0 checks all of them. Subsets are drawn
  // deterministically from `seed`.
  std::size_t max_coords_per_leaf = 0;
  std::uint64_t seed = 1;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  std::string worst_leaf;
  bool passed = true;
};

using NamedLeaf = std::pair<std::string, Tensor<double>>;

double relative_error(double analytic, double numeric, double denominator_floor);

// Compares reverse-mode gradients of the scalar function `f` with central
// differences over the listed leaves. `f` must rebuild its graph from the
// leaves on every call.
GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<NamedLeaf> leaves,
                           const GradCheckOptions& options = {});

// Single-input convenience form.
GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Tensor<double> x,
                           double step = 1e-6, double tolerance = 1e-5);

}  // namespace kmunet
