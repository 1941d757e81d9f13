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
#include <immintrin.h>

#include "kmunet/kernels/kernels.hpp"

// Compiled with -mavx2 -mfma. Nothing in this file may run before the
// dispatcher has confirmed CPU support.

namespace kmunet::kernels::avx2 {

namespace {

inline float hsum(__m256 v) {
  __m128 lo = _mm256_castps256_ps128(v);
  __m128 hi = _mm256_extractf128_ps(v, 1);
  lo = _mm_add_ps(lo, hi);
  __m128 shuf = _mm_movehdup_ps(lo);
  __m128 sums = _mm_add_ps(lo, shuf);
  shuf = _mm_movehl_ps(shuf, sums);
  sums = _mm_add_ss(sums, shuf);
  return _mm_cvtss_f32(sums);
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d high64 = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f32(const float* a, const float* b, std::size_t n) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  }
  float acc = hsum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double dot_f64(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_f32(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 va = _mm256_set1_ps(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_ps(y + i, _mm256_fmadd_ps(va, _mm256_loadu_ps(x + i), _mm256_loadu_ps(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpy_f64(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

float scan_step_f32(std::size_t n, const float* abar, const float* bbar, float x,
                    const float* h_prev, float* h, const float* c) {
  const __m256 vx = _mm256_set1_ps(x);
  __m256 acc = _mm256_setzero_ps();
  std::size_t s = 0;
  for (; s + 8 <= n; s += 8) {
    __m256 hv = _mm256_mul_ps(_mm256_loadu_ps(abar + s), _mm256_loadu_ps(h_prev + s));
    hv = _mm256_fmadd_ps(_mm256_loadu_ps(bbar + s), vx, hv);
    _mm256_storeu_ps(h + s, hv);
    acc = _mm256_fmadd_ps(_mm256_loadu_ps(c + s), hv, acc);
  }
  float y = hsum(acc);
  for (; s < n; ++s) {
    h[s] = abar[s] * h_prev[s] + bbar[s] * x;
    y += c[s] * h[s];
  }
  return y;
}

double scan_step_f64(std::size_t n, const double* abar, const double* bbar, double x,
                     const double* h_prev, double* h, const double* c) {
  const __m256d vx = _mm256_set1_pd(x);
  __m256d acc = _mm256_setzero_pd();
  std::size_t s = 0;
  for (; s + 4 <= n; s += 4) {
    __m256d hv = _mm256_mul_pd(_mm256_loadu_pd(abar + s), _mm256_loadu_pd(h_prev + s));
    hv = _mm256_fmadd_pd(_mm256_loadu_pd(bbar + s), vx, hv);
    _mm256_storeu_pd(h + s, hv);
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(c + s), hv, acc);
  }
  double y = hsum(acc);
  for (; s < n; ++s) {
    h[s] = abar[s] * h_prev[s] + bbar[s] * x;
    y += c[s] * h[s];
  }
  return y;
}

}  // namespace

template <>
const KernelSet<float>& kernel_set<float>() {
  static const KernelSet<float> set{&dot_f32, &axpy_f32, &scan_step_f32};
  return set;
}

template <>
const KernelSet<double>& kernel_set<double>() {
  static const KernelSet<double> set{&dot_f64, &axpy_f64, &scan_step_f64};
  return set;
}

}  // namespace kmunet::kernels::avx2
