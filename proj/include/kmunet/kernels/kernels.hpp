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
#include <string_view>

// Inner-loop arithmetic shared by the tensor operations. Every kernel has a
// portable scalar reference in kmunet::kernels::scalar and, on x86-64, an
// AVX2+FMA variant in kmunet::kernels::avx2. The variant is chosen once at
// startup from the CPU features (overridable with KM_SIMD=scalar|avx2) and
// can be switched explicitly for equivalence testing.

namespace kmunet::kernels {

enum class Isa { scalar, avx2 };

template <typename T>
struct KernelSet {
  // sum_i a[i] * b[i]
  T (*dot)(const T* a, const T* b, std::size_t n);
  // y[i] += alpha * x[i]
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  // One token of the diagonal state-space recurrence for one channel:
  //   h[s] = abar[s] * h_prev[s] + bbar[s] * x
  // returns sum_s c[s] * h[s].
  T (*scan_step)(std::size_t n, const T* abar, const T* bbar, T x,
                 const T* h_prev, T* h, const T* c);
};

namespace scalar {
template <typename T>
const KernelSet<T>& kernel_set();
}  // namespace scalar

namespace avx2 {
// Only valid when isa_supported(Isa::avx2).
template <typename T>
const KernelSet<T>& kernel_set();
}  // namespace avx2

bool isa_supported(Isa isa);
std::string_view isa_name(Isa isa);
Isa parse_isa(std::string_view name);

// The best supported variant, unless KM_SIMD names another supported one.
Isa detect_isa();

Isa active_isa();
void set_active_isa(Isa isa);

template <typename T>
const KernelSet<T>& kernels_for(Isa isa);

template <typename T>
const KernelSet<T>& active() {
  return kernels_for<T>(active_isa());
}

// Restores the previously active variant on scope exit.
class ScopedIsa {
 public:
  explicit ScopedIsa(Isa isa) : previous_(active_isa()) { set_active_isa(isa); }
  ~ScopedIsa() { set_active_isa(previous_); }
  ScopedIsa(const ScopedIsa&) = delete;
  ScopedIsa& operator=(const ScopedIsa&) = delete;

 private:
  Isa previous_;
};

}  // namespace kmunet::kernels
