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
#include "kmunet/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace kmunet {

namespace {

double evaluate(const std::function<Tensor<double>()>& f) {
  Tensor<double> out = f();
  if (out.numel() != 1) throw ContractError("grad_check: function output must be scalar, got " + shape_string(out.shape()));
  return out.item();
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

double relative_error(double analytic, double numeric, double denominator_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), denominator_floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<Tensor<double>()>& f, std::vector<NamedLeaf> leaves,
                           const GradCheckOptions& options) {
  for (auto& [name, leaf] : leaves) {
    leaf.set_requires_grad(true);
    leaf.zero_grad();
  }
  {
    Tape<double> tape;
    Recording<double> rec(tape);
    Tensor<double> out = f();
    if (out.numel() != 1) {
      throw ContractError("grad_check: function output must be scalar, got " + shape_string(out.shape()));
    }
    tape.backward(out);
  }

  GradCheckReport report;
  std::mt19937_64 rng(options.seed);
  for (auto& [name, leaf] : leaves) {
    std::vector<double> analytic(leaf.numel(), 0.0);
    if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());

    GradCheckEntry entry;
    entry.name = name;
    auto values = leaf.mutable_values();
    for (std::size_t i : pick_coords(leaf.numel(), options.max_coords_per_leaf, rng)) {
      const double original = values[i];
      values[i] = original + options.step;
      const double up = evaluate(f);
      values[i] = original - options.step;
      const double down = evaluate(f);
      values[i] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double err = relative_error(analytic[i], numeric, options.denominator_floor);
      if (++entry.coords_checked == 1 || err > entry.max_rel_error) {
        entry.max_rel_error = err;
        entry.worst_index = i;
        entry.analytic = analytic[i];
        entry.numeric = numeric;
      }
    }
    if (report.worst_leaf.empty() || entry.max_rel_error > report.max_rel_error) {
      report.max_rel_error = entry.max_rel_error;
      report.worst_leaf = entry.name;
    }
    report.entries.push_back(std::move(entry));
    leaf.zero_grad();
  }
  report.passed = report.max_rel_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor<double>(const Tensor<double>&)>& f, Tensor<double> x,
                           double step, double tolerance) {
  GradCheckOptions options;
  options.step = step;
  options.tolerance = tolerance;
  return grad_check([&] { return f(x); }, {{"x", x}}, options);
}

}  // namespace kmunet
