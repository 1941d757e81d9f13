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
#include "kmunet/s6/s6.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "kmunet/kernels/kernels.hpp"
#include "kmunet/numerics/ops.hpp"

namespace kmunet::s6 {

template <typename T>
void S6Params<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + "log_a", log_a);
  out.emplace_back(prefix + "d_skip", d_skip);
  out.emplace_back(prefix + "w_delta", w_delta);
  out.emplace_back(prefix + "b_delta", b_delta);
  out.emplace_back(prefix + "w_b", w_b);
  out.emplace_back(prefix + "b_b", b_b);
  out.emplace_back(prefix + "w_c", w_c);
  out.emplace_back(prefix + "b_c", b_c);
}

template <typename T>
std::size_t S6Params<T>::parameter_count(std::size_t d, std::size_t n) {
  return d * n + d + d * d + d + 2 * (n * d + n);
}

template <typename T>
S6Params<T> init_params(std::size_t d_model, std::size_t n_state, Initializer<T>& init) {
  if (d_model == 0 || n_state == 0) throw ConfigError("s6: d_model and n_state must be positive");
  S6Params<T> p;
  std::vector<T> log_a(d_model * n_state);
  for (std::size_t d = 0; d < d_model; ++d) {
    for (std::size_t n = 0; n < n_state; ++n) log_a[d * n_state + n] = static_cast<T>(std::log(static_cast<double>(n + 1)));
  }
  p.log_a = Initializer<T>::leaf({d_model, n_state}, std::move(log_a));
  p.d_skip = init.constant({d_model}, 1.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_model));
  p.w_delta = init.uniform({d_model, d_model}, bound);
  std::vector<T> b_delta(d_model);
  for (T& v : b_delta) {
    // Inverse softplus of a log-uniform step size in [1e-3, 1e-1].
    const double dt = std::exp(init.draw_uniform(std::log(1e-3), std::log(1e-1)));
    v = static_cast<T>(dt + std::log(-std::expm1(-dt)));
  }
  p.b_delta = Initializer<T>::leaf({d_model}, std::move(b_delta));
  p.w_b = init.uniform({n_state, d_model}, bound);
  p.b_b = init.constant({n_state}, 0.0);
  p.w_c = init.uniform({n_state, d_model}, bound);
  p.b_c = init.constant({n_state}, 0.0);
  return p;
}

template <typename T>
Projection<T> project(const Tensor<T>& x, const S6Params<T>& p) {
  if (x.rank() != 3 || x.dim(2) != p.d_model()) {
    throw DimensionError("s6 project: input " + shape_string(x.shape()) + " does not have feature size " +
                         std::to_string(p.d_model()));
  }
  return Projection<T>{softplus(linear(x, p.w_delta, p.b_delta)), linear(x, p.w_b, p.b_b),
                       linear(x, p.w_c, p.b_c)};
}

template <typename T>
Tensor<T> effective_a(const S6Params<T>& p) {
  return scale(exp(p.log_a), T{-1});
}

namespace {

// q = (exp(z) - 1) / a with z = delta * a, so that Bbar = q * b.
template <typename T>
T zoh_q(T delta, T a, T z) {
  if (std::abs(z) < static_cast<T>(kSeriesThreshold)) return delta * (T{1} + z / T{2});
  return std::expm1(z) / a;
}

// dq/da; the closed form cancels badly for small |z|.
template <typename T>
T zoh_dq_da(T delta, T a, T z, T e) {
  if (std::abs(z) < T(1e-3)) return delta * delta * (T{1} / T{2} + z / T{3} + z * z / T{8});
  return (z * e - std::expm1(z)) / (a * a);
}

}  // namespace

template <typename T>
Discretized<T> discretize(T delta, T a, T b) {
  const T z = delta * a;
  return Discretized<T>{std::exp(z), zoh_q(delta, a, z) * b};
}

template <typename T>
Tensor<T> selective_scan_core(const Tensor<T>& x, const Tensor<T>& delta, const Tensor<T>& a, const Tensor<T>& b,
                              const Tensor<T>& c, const Tensor<T>& d_skip) {
  if (x.rank() != 3) throw DimensionError("selective_scan: expected x[B,L,D], got " + shape_string(x.shape()));
  const std::size_t nb = x.dim(0), nl = x.dim(1), nd = x.dim(2);
  if (a.rank() != 2 || a.dim(0) != nd) {
    throw DimensionError("selective_scan: A " + shape_string(a.shape()) + " does not match D=" + std::to_string(nd));
  }
  const std::size_t ns = a.dim(1);
  if (delta.shape() != x.shape() || b.shape() != Shape{nb, nl, ns} || c.shape() != Shape{nb, nl, ns} ||
      d_skip.numel() != nd) {
    throw DimensionError("selective_scan: inconsistent shapes x" + shape_string(x.shape()) + " delta" +
                         shape_string(delta.shape()) + " B" + shape_string(b.shape()) + " C" +
                         shape_string(c.shape()) + " D" + shape_string(d_skip.shape()));
  }

  const auto& kern = kernels::active<T>();
  const T* xp = x.data();
  const T* dp = delta.data();
  const T* ap = a.data();
  const T* bp = b.data();
  const T* cp = c.data();
  const T* sp = d_skip.data();

  std::vector<T> y(x.numel());
  // States for every token, laid out [B, D, L, N].
  auto states = std::make_shared<std::vector<T>>(nb * nd * nl * ns);
  std::vector<T> abar(ns), bbar(ns), zeros(ns, T{0});
  for (std::size_t bi = 0; bi < nb; ++bi) {
    for (std::size_t d = 0; d < nd; ++d) {
      const T* arow = ap + d * ns;
      const T* h_prev = zeros.data();
      T* h = states->data() + (bi * nd + d) * nl * ns;
      for (std::size_t t = 0; t < nl; ++t) {
        const std::size_t tok = bi * nl + t;
        const T dt = dp[tok * nd + d];
        const T xv = xp[tok * nd + d];
        for (std::size_t s = 0; s < ns; ++s) {
          const T z = dt * arow[s];
          abar[s] = std::exp(z);
          bbar[s] = zoh_q(dt, arow[s], z) * bp[tok * ns + s];
        }
        T* h_t = h + t * ns;
        y[tok * nd + d] = kern.scan_step(ns, abar.data(), bbar.data(), xv, h_prev, h_t, cp + tok * ns) + sp[d] * xv;
        h_prev = h_t;
      }
    }
  }

  return attach("selective_scan", Tensor<T>(x.shape(), std::move(y)), {x, delta, a, b, c, d_skip},
                [x, delta, a, b, c, d_skip, states, nb, nl, nd, ns](std::span<const T> g) {
                  const T* xp = x.data();
                  const T* dp = delta.data();
                  const T* ap = a.data();
                  const T* bp = b.data();
                  const T* cp = c.data();
                  const T* sp = d_skip.data();
                  T* gx = x.requires_grad() ? x.grad_accumulator().data() : nullptr;
                  T* gdelta = delta.requires_grad() ? delta.grad_accumulator().data() : nullptr;
                  T* ga = a.requires_grad() ? a.grad_accumulator().data() : nullptr;
                  T* gb = b.requires_grad() ? b.grad_accumulator().data() : nullptr;
                  T* gc = c.requires_grad() ? c.grad_accumulator().data() : nullptr;
                  T* gs = d_skip.requires_grad() ? d_skip.grad_accumulator().data() : nullptr;

                  std::vector<T> carry(ns), zeros(ns, T{0});
                  for (std::size_t bi = 0; bi < nb; ++bi) {
                    for (std::size_t d = 0; d < nd; ++d) {
                      const T* arow = ap + d * ns;
                      const T* h = states->data() + (bi * nd + d) * nl * ns;
                      std::fill(carry.begin(), carry.end(), T{0});
                      for (std::size_t t = nl; t-- > 0;) {
                        const std::size_t tok = bi * nl + t;
                        const T gy = g[tok * nd + d];
                        const T dt = dp[tok * nd + d];
                        const T xv = xp[tok * nd + d];
                        const T* h_t = h + t * ns;
                        const T* h_prev = t > 0 ? h + (t - 1) * ns : zeros.data();
                        T gx_acc = gy * sp[d];
                        T gdelta_acc = 0;
                        for (std::size_t s = 0; s < ns; ++s) {
                          const T av = arow[s];
                          const T z = dt * av;
                          const T e = std::exp(z);
                          const T q = zoh_q(dt, av, z);
                          const T bv = bp[tok * ns + s];
                          const T gh = carry[s] + gy * cp[tok * ns + s];
                          if (gc != nullptr) gc[tok * ns + s] += gy * h_t[s];
                          const T g_abar = gh * h_prev[s];
                          const T g_bbar = gh * xv;
                          gx_acc += gh * q * bv;
                          gdelta_acc += g_abar * e * av + g_bbar * bv * e;
                          if (ga != nullptr) ga[d * ns + s] += g_abar * e * dt + g_bbar * bv * zoh_dq_da(dt, av, z, e);
                          if (gb != nullptr) gb[tok * ns + s] += g_bbar * q;
                          carry[s] = gh * e;
                        }
                        if (gx != nullptr) gx[tok * nd + d] += gx_acc;
                        if (gdelta != nullptr) gdelta[tok * nd + d] += gdelta_acc;
                        if (gs != nullptr) gs[d] += gy * xv;
                      }
                    }
                  }
                });
}

template <typename T>
Tensor<T> selective_scan(const Tensor<T>& x, const S6Params<T>& p) {
  Projection<T> proj = project(x, p);
  return selective_scan_core(x, proj.delta, effective_a(p), proj.b, proj.c, p.d_skip);
}

#define KMUNET_INSTANTIATE_S6(T)                                                                      \
  template struct S6Params<T>;                                                                       \
  template S6Params<T> init_params(std::size_t, std::size_t, Initializer<T>&);                       \
  template Projection<T> project(const Tensor<T>&, const S6Params<T>&);                              \
  template Tensor<T> effective_a(const S6Params<T>&);                                                \
  template Discretized<T> discretize(T, T, T);                                                       \
  template Tensor<T> selective_scan_core(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,       \
                                         const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);      \
  template Tensor<T> selective_scan(const Tensor<T>&, const S6Params<T>&);

KMUNET_INSTANTIATE_S6(float)
KMUNET_INSTANTIATE_S6(double)

}  // namespace kmunet::s6
