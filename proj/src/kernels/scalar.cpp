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
#include "kmunet/kernels/kernels.hpp"

namespace kmunet::kernels::scalar {

namespace {

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
T scan_step(std::size_t n, const T* abar, const T* bbar, T x, const T* h_prev,
            T* h, const T* c) {
  T y = 0;
  for (std::size_t s = 0; s < n; ++s) {
    h[s] = abar[s] * h_prev[s] + bbar[s] * x;
    y += c[s] * h[s];
  }
  return y;
}

}  // namespace

template <typename T>
const KernelSet<T>& kernel_set() {
  static const KernelSet<T> set{&dot<T>, &axpy<T>, &scan_step<T>};
  return set;
}

template const KernelSet<float>& kernel_set<float>();
template const KernelSet<double>& kernel_set<double>();

}  // namespace kmunet::kernels::scalar
