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

#include <cstddef>
#include <vector>

// B-spline basis by the textbook recursive definition on an explicit knot
// vector, with the 0/0 := 0 convention.

namespace kmunet::oracle {

inline double bspline_recursive(const std::vector<double>& t, std::size_t i, std::size_t k, double x) {
  if (k == 0) return (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  double left = 0.0, right = 0.0;
  if (t[i + k] != t[i]) left = (x - t[i]) / (t[i + k] - t[i]) * bspline_recursive(t, i, k - 1, x);
  if (t[i + k + 1] != t[i + 1]) {
    right = (t[i + k + 1] - x) / (t[i + k + 1] - t[i + 1]) * bspline_recursive(t, i + 1, k - 1, x);
  }
  return left + right;
}

// Uniform knots on [-r, r] with G intervals extended by k knots per side.
inline std::vector<double> uniform_knots(std::size_t grid, std::size_t k, double r) {
  std::vector<double> t(grid + 2 * k + 1);
  const double h = 2.0 * r / static_cast<double>(grid);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = -r + (static_cast<double>(i) - static_cast<double>(k)) * h;
  return t;
}

}  // namespace kmunet::oracle
