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
#include <atomic>
#include <cstdlib>
#include <string>

#include "kmunet/error.hpp"
#include "kmunet/kernels/kernels.hpp"

namespace kmunet::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(KMUNET_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

std::atomic<Isa>& active_slot() {
  static std::atomic<Isa> slot{detect_isa()};
  return slot;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2: {
      static const bool has = cpu_has_avx2();
      return has;
    }
  }
  return false;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

Isa parse_isa(std::string_view name) {
  if (name == "scalar") return Isa::scalar;
  if (name == "avx2") return Isa::avx2;
  throw ConfigError("unknown SIMD variant '" + std::string(name) + "' (expected scalar or avx2)");
}

Isa detect_isa() {
  if (const char* env = std::getenv("KM_SIMD"); env != nullptr && *env != '\0') {
    Isa requested = parse_isa(env);
    if (isa_supported(requested)) return requested;
  }
  return isa_supported(Isa::avx2) ? Isa::avx2 : Isa::scalar;
}

Isa active_isa() { return active_slot().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw ConfigError("SIMD variant '" + std::string(isa_name(isa)) + "' is not supported on this CPU");
  }
  active_slot().store(isa, std::memory_order_relaxed);
}

template <typename T>
const KernelSet<T>& kernels_for(Isa isa) {
#if defined(KMUNET_HAVE_AVX2)
  if (isa == Isa::avx2 && isa_supported(Isa::avx2)) return avx2::kernel_set<T>();
#endif
  return scalar::kernel_set<T>();
}

template const KernelSet<float>& kernels_for<float>(Isa);
template const KernelSet<double>& kernels_for<double>(Isa);

}  // namespace kmunet::kernels
