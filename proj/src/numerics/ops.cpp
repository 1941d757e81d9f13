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
#include "kmunet/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kmunet/kernels/kernels.hpp"

namespace kmunet {

namespace {

template <typename T>
void check_finite_impl(std::span<const T> values, const char* op) {
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value produced by ") + op);
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

// Accumulates `g` into t's gradient when t takes part in differentiation.
template <typename T, typename Fn>
void accumulate(const Tensor<T>& t, Fn&& fn) {
  if (t.requires_grad()) fn(t.grad_accumulator());
}

}  // namespace

void check_finite_or_throw(std::span<const float> values, const char* op) { check_finite_impl(values, op); }
void check_finite_or_throw(std::span<const double> values, const char* op) { check_finite_impl(values, op); }

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  std::vector<T> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return attach("add", Tensor<T>(a.shape(), std::move(out)), {a, b}, [a, b](std::span<const T> g) mutable {
    accumulate(a, [&](std::span<T> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
    accumulate(b, [&](std::span<T> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    });
  });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  std::vector<T> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return attach("sub", Tensor<T>(a.shape(), std::move(out)), {a, b}, [a, b](std::span<const T> g) mutable {
    accumulate(a, [&](std::span<T> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
    accumulate(b, [&](std::span<T> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    });
  });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  std::vector<T> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return attach("mul", Tensor<T>(a.shape(), std::move(out)), {a, b}, [a, b](std::span<const T> g) mutable {
    auto av = a.values();
    auto bv = b.values();
    accumulate(a, [&](std::span<T> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    });
    accumulate(b, [&](std::span<T> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    });
  });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.values().begin(), a.values().end());
  for (T& v : out) v *= factor;
  return attach("scale", Tensor<T>(a.shape(), std::move(out)), {a}, [a, factor](std::span<const T> g) mutable {
    accumulate(a, [&](std::span<T> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.values().begin(), x.values().end()));
  return attach("reshape", out, {x}, [x](std::span<const T> g) mutable {
    accumulate(x, [&](std::span<T> gx) {
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  const auto& kern = kernels::active<T>();
  std::vector<T> out(m * n, T{0});
  const T* ap = a.data();
  const T* bp = b.data();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) kern.axpy(n, ap[i * k + p], bp + p * n, out.data() + i * n);
  }
  return attach("matmul", Tensor<T>({m, n}, std::move(out)), {a, b},
                [a, b, m, k, n](std::span<const T> g) mutable {
                  const auto& kern = kernels::active<T>();
                  const T* ap = a.data();
                  const T* bp = b.data();
                  accumulate(a, [&](std::span<T> ga) {
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += kern.dot(g.data() + i * n, bp + p * n, n);
                    }
                  });
                  accumulate(b, [&](std::span<T> gb) {
                    for (std::size_t i = 0; i < m; ++i) {
                      for (std::size_t p = 0; p < k; ++p) kern.axpy(n, ap[i * k + p], g.data() + i * n, gb.data() + p * n);
                    }
                  });
                });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  if (weight.rank() != 2 || x.rank() < 1 || x.shape().back() != weight.dim(1)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  const std::size_t in = weight.dim(1), outd = weight.dim(0);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != outd)) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not match weight " +
                         shape_string(weight.shape()));
  }
  const std::size_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = outd;
  const auto& kern = kernels::active<T>();
  std::vector<T> out(rows * outd);
  const T* xp = x.data();
  const T* wp = weight.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < outd; ++o) {
      out[r * outd + o] = kern.dot(xp + r * in, wp + o * in, in) + (bias.defined() ? bias.values()[o] : T{0});
    }
  }
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return attach("linear", Tensor<T>(std::move(out_shape), std::move(out)), std::move(inputs),
                [x, weight, bias, rows, in, outd](std::span<const T> g) mutable {
                  const auto& kern = kernels::active<T>();
                  const T* xp = x.data();
                  const T* wp = weight.data();
                  accumulate(x, [&](std::span<T> gx) {
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t o = 0; o < outd; ++o) kern.axpy(in, g[r * outd + o], wp + o * in, gx.data() + r * in);
                    }
                  });
                  accumulate(weight, [&](std::span<T> gw) {
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t o = 0; o < outd; ++o) kern.axpy(in, g[r * outd + o], xp + r * in, gw.data() + o * in);
                    }
                  });
                  if (bias.defined()) {
                    accumulate(bias, [&](std::span<T> gb) {
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t o = 0; o < outd; ++o) gb[o] += g[r * outd + o];
                      }
                    });
                  }
                });
}

namespace {

struct ConvGeometry {
  std::size_t batch, cin, h, w;
  std::size_t cout, kh, kw;
  std::size_t groups, cin_g, cout_g;
  std::size_t stride, pad;
  std::size_t ho, wo;

  std::size_t patch() const { return cin_g * kh * kw; }
  std::size_t out_pixels() const { return ho * wo; }
  bool pointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                           const Conv2dOptions& opt) {
  if (x.rank() != 4 || weight.rank() != 4) {
    throw DimensionError("conv2d: expected x[B,C,H,W] and weight[O,C/g,kh,kw], got " + shape_string(x.shape()) +
                         " and " + shape_string(weight.shape()));
  }
  ConvGeometry g{};
  g.batch = x.dim(0);
  g.cin = x.dim(1);
  g.h = x.dim(2);
  g.w = x.dim(3);
  g.cout = weight.dim(0);
  g.kh = weight.dim(2);
  g.kw = weight.dim(3);
  g.groups = opt.groups;
  g.stride = opt.stride;
  g.pad = opt.padding;
  if (g.groups == 0 || g.stride == 0 || g.cin % g.groups != 0 || g.cout % g.groups != 0) {
    throw DimensionError("conv2d: " + std::to_string(g.cin) + " input and " + std::to_string(g.cout) +
                         " output channels are not divisible by groups=" + std::to_string(g.groups));
  }
  g.cin_g = g.cin / g.groups;
  g.cout_g = g.cout / g.groups;
  if (weight.dim(1) != g.cin_g) {
    throw DimensionError("conv2d: weight " + shape_string(weight.shape()) + " expects " +
                         std::to_string(weight.dim(1) * g.groups) + " input channels, x has " + std::to_string(g.cin));
  }
  if (g.h + 2 * g.pad < g.kh || g.w + 2 * g.pad < g.kw) {
    throw DimensionError("conv2d: kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                         " does not fit padded input " + shape_string(x.shape()));
  }
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != g.cout)) {
    throw DimensionError("conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                         std::to_string(g.cout) + " output channels");
  }
  g.ho = (g.h + 2 * g.pad - g.kh) / g.stride + 1;
  g.wo = (g.w + 2 * g.pad - g.kw) / g.stride + 1;
  return g;
}

// cols[q, p] for q = (c, i, j) over one group's input channels, p over output pixels.
template <typename T>
void im2col(const ConvGeometry& g, const T* x_group, T* cols) {
  const std::size_t np = g.out_pixels();
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    const T* xc = x_group + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        T* row = cols + ((c * g.kh + i) * g.kw + j) * np;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.wo + ox] = inside ? xc[iy * static_cast<std::ptrdiff_t>(g.w) + ix] : T{0};
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* cols, T* gx_group) {
  const std::size_t np = g.out_pixels();
  for (std::size_t c = 0; c < g.cin_g; ++c) {
    T* gxc = gx_group + c * g.h * g.w;
    for (std::size_t i = 0; i < g.kh; ++i) {
      for (std::size_t j = 0; j < g.kw; ++j) {
        const T* row = cols + ((c * g.kh + i) * g.kw + j) * np;
        for (std::size_t oy = 0; oy < g.ho; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + i) - static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.wo; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride + j) - static_cast<std::ptrdiff_t>(g.pad);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            gxc[iy * static_cast<std::ptrdiff_t>(g.w) + ix] += row[oy * g.wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, const Conv2dOptions& options) {
  const ConvGeometry g = conv_geometry(x, weight, bias, options);
  const auto& kern = kernels::active<T>();
  const std::size_t np = g.out_pixels();
  const std::size_t patch = g.patch();
  std::vector<T> out(g.batch * g.cout * np, T{0});
  std::vector<T> cols(g.pointwise() ? 0 : patch * np);
  const T* xp = x.data();
  const T* wp = weight.data();
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t grp = 0; grp < g.groups; ++grp) {
      const T* xg = xp + (b * g.cin + grp * g.cin_g) * g.h * g.w;
      const T* colp = xg;
      if (!g.pointwise()) {
        im2col(g, xg, cols.data());
        colp = cols.data();
      }
      for (std::size_t o = 0; o < g.cout_g; ++o) {
        const std::size_t oc = grp * g.cout_g + o;
        T* orow = out.data() + (b * g.cout + oc) * np;
        if (bias.defined()) std::fill(orow, orow + np, bias.values()[oc]);
        const T* wrow = wp + oc * patch;
        for (std::size_t q = 0; q < patch; ++q) kern.axpy(np, wrow[q], colp + q * np, orow);
      }
    }
  }
  std::vector<Tensor<T>> inputs{x, weight};
  if (bias.defined()) inputs.push_back(bias);
  return attach("conv2d", Tensor<T>({g.batch, g.cout, g.ho, g.wo}, std::move(out)), std::move(inputs),
                [x, weight, bias, g](std::span<const T> gout) mutable {
                  const auto& kern = kernels::active<T>();
                  const std::size_t np = g.out_pixels();
                  const std::size_t patch = g.patch();
                  std::vector<T> cols(g.pointwise() ? 0 : patch * np);
                  std::vector<T> gcols(x.requires_grad() ? patch * np : 0);
                  const T* xp = x.data();
                  const T* wp = weight.data();
                  T* gw = weight.requires_grad() ? weight.grad_accumulator().data() : nullptr;
                  T* gx = x.requires_grad() ? x.grad_accumulator().data() : nullptr;
                  T* gb = bias.defined() && bias.requires_grad() ? bias.grad_accumulator().data() : nullptr;
                  for (std::size_t b = 0; b < g.batch; ++b) {
                    for (std::size_t grp = 0; grp < g.groups; ++grp) {
                      const std::size_t xoff = (b * g.cin + grp * g.cin_g) * g.h * g.w;
                      const T* colp = xp + xoff;
                      if (gw != nullptr && !g.pointwise()) {
                        im2col(g, xp + xoff, cols.data());
                        colp = cols.data();
                      }
                      if (gx != nullptr) std::fill(gcols.begin(), gcols.end(), T{0});
                      for (std::size_t o = 0; o < g.cout_g; ++o) {
                        const std::size_t oc = grp * g.cout_g + o;
                        const T* grow = gout.data() + (b * g.cout + oc) * np;
                        if (gb != nullptr) {
                          T s = 0;
                          for (std::size_t p = 0; p < np; ++p) s += grow[p];
                          gb[oc] += s;
                        }
                        if (gw != nullptr) {
                          for (std::size_t q = 0; q < patch; ++q) gw[oc * patch + q] += kern.dot(grow, colp + q * np, np);
                        }
                        if (gx != nullptr) {
                          const T* wrow = wp + oc * patch;
                          for (std::size_t q = 0; q < patch; ++q) kern.axpy(np, wrow[q], grow, gcols.data() + q * np);
                        }
                      }
                      if (gx != nullptr) {
                        if (g.pointwise()) {
                          for (std::size_t i = 0; i < patch * np; ++i) gx[xoff + i] += gcols[i];
                        } else {
                          col2im_add(g, gcols.data(), gx + xoff);
                        }
                      }
                    }
                  }
                });
}

namespace {

// Shared by layernorm and group_norm: normalizes `count` contiguous blocks of
// `len` elements. `gamma_index(block, i)` gives the affine parameter index.
template <typename T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
void normalize_blocks(const T* x, std::size_t count, std::size_t len, T eps, NormCache<T>& cache) {
  cache.xhat.resize(count * len);
  cache.inv_std.resize(count);
  for (std::size_t blk = 0; blk < count; ++blk) {
    const T* xb = x + blk * len;
    T mu = 0;
    for (std::size_t i = 0; i < len; ++i) mu += xb[i];
    mu /= static_cast<T>(len);
    T var = 0;
    for (std::size_t i = 0; i < len; ++i) var += (xb[i] - mu) * (xb[i] - mu);
    var /= static_cast<T>(len);
    const T inv = T{1} / std::sqrt(var + eps);
    cache.inv_std[blk] = inv;
    for (std::size_t i = 0; i < len; ++i) cache.xhat[blk * len + i] = (xb[i] - mu) * inv;
  }
}

// gx = inv * (gxhat - mean(gxhat) - xhat * mean(gxhat * xhat)) per block.
template <typename T>
void normalize_backward(const NormCache<T>& cache, const std::vector<T>& gxhat, std::size_t count, std::size_t len,
                        std::span<T> gx) {
  for (std::size_t blk = 0; blk < count; ++blk) {
    const T* gh = gxhat.data() + blk * len;
    const T* xh = cache.xhat.data() + blk * len;
    T m1 = 0, m2 = 0;
    for (std::size_t i = 0; i < len; ++i) {
      m1 += gh[i];
      m2 += gh[i] * xh[i];
    }
    m1 /= static_cast<T>(len);
    m2 /= static_cast<T>(len);
    const T inv = cache.inv_std[blk];
    for (std::size_t i = 0; i < len; ++i) gx[blk * len + i] += inv * (gh[i] - m1 - xh[i] * m2);
  }
}

}  // namespace

template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.rank() == 0 || x.shape().empty()) throw DimensionError("layernorm: input has no axis to normalize");
  const std::size_t d = x.shape().back();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layernorm: affine parameters " + shape_string(gamma.shape()) + "/" +
                         shape_string(beta.shape()) + " do not match last axis of " + shape_string(x.shape()));
  }
  const std::size_t rows = x.numel() / d;
  NormCache<T> cache;
  normalize_blocks(x.data(), rows, d, eps, cache);
  std::vector<T> out(x.numel());
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < d; ++i) out[r * d + i] = cache.xhat[r * d + i] * gv[i] + bv[i];
  }
  return attach("layernorm", Tensor<T>(x.shape(), std::move(out)), {x, gamma, beta},
                [x, gamma, beta, cache = std::move(cache), rows, d](std::span<const T> g) mutable {
                  auto gv = gamma.values();
                  accumulate(gamma, [&](std::span<T> gg) {
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t i = 0; i < d; ++i) gg[i] += g[r * d + i] * cache.xhat[r * d + i];
                    }
                  });
                  accumulate(beta, [&](std::span<T> gb) {
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t i = 0; i < d; ++i) gb[i] += g[r * d + i];
                    }
                  });
                  accumulate(x, [&](std::span<T> gx) {
                    std::vector<T> gxhat(rows * d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t i = 0; i < d; ++i) gxhat[r * d + i] = g[r * d + i] * gv[i];
                    }
                    normalize_backward(cache, gxhat, rows, d, gx);
                  });
                });
}

template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  if (x.rank() != 4) throw DimensionError("group_norm: expected [B,C,H,W], got " + shape_string(x.shape()));
  const std::size_t batch = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (groups == 0 || c % groups != 0) {
    throw DimensionError("group_norm: " + std::to_string(c) + " channels not divisible into " +
                         std::to_string(groups) + " groups");
  }
  if (gamma.numel() != c || beta.numel() != c) {
    throw DimensionError("group_norm: affine parameters do not match " + std::to_string(c) + " channels");
  }
  const std::size_t count = batch * groups;
  const std::size_t len = (c / groups) * hw;
  NormCache<T> cache;
  normalize_blocks(x.data(), count, len, eps, cache);
  std::vector<T> out(x.numel());
  auto gv = gamma.values();
  auto bv = beta.values();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t ch = (i / hw) % c;
    out[i] = cache.xhat[i] * gv[ch] + bv[ch];
  }
  return attach("group_norm", Tensor<T>(x.shape(), std::move(out)), {x, gamma, beta},
                [x, gamma, beta, cache = std::move(cache), count, len, c, hw](std::span<const T> g) mutable {
                  auto gv = gamma.values();
                  accumulate(gamma, [&](std::span<T> gg) {
                    for (std::size_t i = 0; i < g.size(); ++i) gg[(i / hw) % c] += g[i] * cache.xhat[i];
                  });
                  accumulate(beta, [&](std::span<T> gb) {
                    for (std::size_t i = 0; i < g.size(); ++i) gb[(i / hw) % c] += g[i];
                  });
                  accumulate(x, [&](std::span<T> gx) {
                    std::vector<T> gxhat(g.size());
                    for (std::size_t i = 0; i < g.size(); ++i) gxhat[i] = g[i] * gv[(i / hw) % c];
                    normalize_backward(cache, gxhat, count, len, gx);
                  });
                });
}

std::string_view pointwise_name(Pointwise fn) {
  switch (fn) {
    case Pointwise::exp: return "exp";
    case Pointwise::sigmoid: return "sigmoid";
    case Pointwise::silu: return "silu";
    case Pointwise::relu: return "relu";
    case Pointwise::softplus: return "softplus";
  }
  return "unknown";
}

Pointwise parse_pointwise(std::string_view name) {
  for (Pointwise fn : {Pointwise::exp, Pointwise::sigmoid, Pointwise::silu, Pointwise::relu, Pointwise::softplus}) {
    if (pointwise_name(fn) == name) return fn;
  }
  throw ConfigError("unknown pointwise function '" + std::string(name) + "'");
}

template <typename T>
T sigmoid_value(T x) {
  if (x >= T{0}) return T{1} / (T{1} + std::exp(-x));
  const T e = std::exp(x);
  return e / (T{1} + e);
}

template <typename T>
T softplus_value(T x) {
  // log(1 + e^x) without overflow for large |x|.
  return x > T{0} ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <typename T>
T silu_value(T x) {
  return x * sigmoid_value(x);
}

template <typename T>
T silu_derivative(T x) {
  const T s = sigmoid_value(x);
  return s * (T{1} + x * (T{1} - s));
}

template <typename T>
Tensor<T> pointwise(Pointwise fn, const Tensor<T>& x) {
  auto xv = x.values();
  std::vector<T> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    const T v = xv[i];
    switch (fn) {
      case Pointwise::exp: out[i] = std::exp(v); break;
      case Pointwise::sigmoid: out[i] = sigmoid_value(v); break;
      case Pointwise::silu: out[i] = silu_value(v); break;
      case Pointwise::relu: out[i] = v > T{0} ? v : T{0}; break;
      case Pointwise::softplus: out[i] = softplus_value(v); break;
    }
  }
  Tensor<T> result(x.shape(), std::move(out));
  const char* name = pointwise_name(fn).data();
  return attach(name, result, {x}, [x, fn, result](std::span<const T> g) mutable {
    accumulate(x, [&](std::span<T> gx) {
      auto xv = x.values();
      auto y = result.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        T d = 0;
        switch (fn) {
          case Pointwise::exp: d = y[i]; break;
          case Pointwise::sigmoid: d = y[i] * (T{1} - y[i]); break;
          case Pointwise::silu: d = silu_derivative(xv[i]); break;
          case Pointwise::relu: d = xv[i] > T{0} ? T{1} : T{0}; break;
          case Pointwise::softplus: d = sigmoid_value(xv[i]); break;
        }
        gx[i] += g[i] * d;
      }
    });
  });
}

template <typename T>
Tensor<T> upsample_nearest2x(const Tensor<T>& x) {
  if (x.rank() != 4) throw DimensionError("upsample_nearest2x: expected [B,C,H,W], got " + shape_string(x.shape()));
  const std::size_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  std::vector<T> out(planes * 4 * h * w);
  const T* xp = x.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) out[(p * 2 * h + y) * 2 * w + xx] = xp[(p * h + y / 2) * w + xx / 2];
    }
  }
  return attach("upsample_nearest2x", Tensor<T>({x.dim(0), x.dim(1), 2 * h, 2 * w}, std::move(out)), {x},
                [x, planes, h, w](std::span<const T> g) mutable {
                  accumulate(x, [&](std::span<T> gx) {
                    for (std::size_t p = 0; p < planes; ++p) {
                      for (std::size_t y = 0; y < 2 * h; ++y) {
                        for (std::size_t xx = 0; xx < 2 * w; ++xx) {
                          gx[(p * h + y / 2) * w + xx / 2] += g[(p * 2 * h + y) * 2 * w + xx];
                        }
                      }
                    }
                  });
                });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  T s = 0;
  for (T v : x.values()) s += v;
  return attach("sum", Tensor<T>::scalar(s), {x}, [x](std::span<const T> g) mutable {
    accumulate(x, [&](std::span<T> gx) {
      for (T& v : gx) v += g[0];
    });
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights) {
  if (weights.size() != x.numel()) {
    throw DimensionError("weighted_sum: " + std::to_string(weights.size()) + " weights for tensor " +
                         shape_string(x.shape()));
  }
  T s = 0;
  auto xv = x.values();
  for (std::size_t i = 0; i < xv.size(); ++i) s += weights[i] * xv[i];
  std::vector<T> w(weights.begin(), weights.end());
  return attach("weighted_sum", Tensor<T>::scalar(s), {x}, [x, w = std::move(w)](std::span<const T> g) mutable {
    accumulate(x, [&](std::span<T> gx) {
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * w[i];
    });
  });
}

#define KMUNET_INSTANTIATE_OPS(T)                                                                       \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                                 \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Conv2dOptions&); \
  template Tensor<T> layernorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> group_norm(const Tensor<T>&, std::size_t, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> pointwise(Pointwise, const Tensor<T>&);                                           \
  template T sigmoid_value(T);                                                                         \
  template T softplus_value(T);                                                                        \
  template T silu_value(T);                                                                            \
  template T silu_derivative(T);                                                                       \
  template Tensor<T> upsample_nearest2x(const Tensor<T>&);                                             \
  template Tensor<T> sum(const Tensor<T>&);                                                            \
  template Tensor<T> mean(const Tensor<T>&);                                                           \
  template Tensor<T> weighted_sum(const Tensor<T>&, std::span<const T>);

KMUNET_INSTANTIATE_OPS(float)
KMUNET_INSTANTIATE_OPS(double)

}  // namespace kmunet
