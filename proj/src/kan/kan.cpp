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
#include "kmunet/kan/kan.hpp"

#include <array>
#include <cmath>

#include "kmunet/kernels/kernels.hpp"
#include "kmunet/numerics/ops.hpp"
#include "kmunet/scan/scan.hpp"

namespace kmunet::kan {

namespace {
constexpr std::size_t kMaxKnots = 128;
}

SplineGrid::SplineGrid(std::size_t intervals, std::size_t order, double range)
    : intervals_(intervals), order_(order), range_(range) {
  if (intervals == 0) throw ConfigError("kan: grid needs at least one interval");
  if (order == 0) throw ConfigError("kan: spline order must be at least 1");
  if (!(range > 0.0) || !std::isfinite(range)) throw ConfigError("kan: grid range must be positive and finite");
  if (intervals + 2 * order + 1 > kMaxKnots) throw ConfigError("kan: grid too large");
  const double step = 2.0 * range / static_cast<double>(intervals);
  knots_.resize(intervals + 2 * order + 1);
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    knots_[i] = -range + (static_cast<double>(i) - static_cast<double>(order)) * step;
  }
  knots_[order] = -range;
  knots_[order + intervals] = range;
}

std::vector<double> SplineGrid::interior_knots() const {
  return {knots_.begin() + static_cast<std::ptrdiff_t>(order_),
          knots_.begin() + static_cast<std::ptrdiff_t>(order_ + intervals_ + 1)};
}

template <typename T>
void SplineGrid::evaluate(T xin, T* out, T* derivative) const {
  const double raw = static_cast<double>(xin);
  const bool inside = raw >= -range_ && raw <= range_;
  const double x = clamp(raw);
  const std::vector<double>& t = knots_;
  const std::size_t pieces = t.size() - 1;
  std::array<double, kMaxKnots> b{};
  for (std::size_t i = 0; i < pieces; ++i) b[i] = (t[i] <= x && x < t[i + 1]) ? 1.0 : 0.0;
  for (std::size_t p = 1; p <= order_; ++p) {
    if (p == order_ && derivative != nullptr) {
      const double k = static_cast<double>(order_);
      for (std::size_t i = 0; i < basis_count(); ++i) {
        const double d = k * (b[i] / (t[i + p] - t[i]) - b[i + 1] / (t[i + p + 1] - t[i + 1]));
        derivative[i] = inside ? static_cast<T>(d) : T{0};
      }
    }
    for (std::size_t i = 0; i + p < pieces; ++i) {
      const double left = (x - t[i]) / (t[i + p] - t[i]);
      const double right = (t[i + p + 1] - x) / (t[i + p + 1] - t[i + 1]);
      b[i] = left * b[i] + right * b[i + 1];
    }
  }
  for (std::size_t i = 0; i < basis_count(); ++i) out[i] = static_cast<T>(b[i]);
}

template void SplineGrid::evaluate<float>(float, float*, float*) const;
template void SplineGrid::evaluate<double>(double, double*, double*) const;

std::vector<double> SplineGrid::greville() const {
  std::vector<double> xi(basis_count());
  for (std::size_t j = 0; j < xi.size(); ++j) {
    double s = 0.0;
    for (std::size_t m = 1; m <= order_; ++m) s += knots_[j + m];
    xi[j] = s / static_cast<double>(order_);
  }
  return xi;
}

std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  std::vector<double> out(grid.basis_count());
  grid.evaluate(x, out.data());
  return out;
}

template <typename T>
void KanLayer<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + "spline_coeffs", spline_coeffs);
  out.emplace_back(prefix + "base_weight", base_weight);
}

template <typename T>
std::size_t KanLayer<T>::parameter_count(std::size_t in_dim, std::size_t out_dim, const KanOptions& opt) {
  return out_dim * in_dim * (opt.grid + opt.order) + out_dim * in_dim;
}

template <typename T>
KanLayer<T> init_kan_layer(std::size_t in_dim, std::size_t out_dim, const KanOptions& opt, Initializer<T>& init) {
  if (in_dim == 0 || out_dim == 0) throw ConfigError("kan: layer dimensions must be positive");
  KanLayer<T> layer;
  layer.in_dim = in_dim;
  layer.out_dim = out_dim;
  layer.grid = SplineGrid(opt.grid, opt.order, opt.range);
  const std::size_t nb = layer.grid.basis_count();
  const double scale = 1.0 / std::sqrt(static_cast<double>(in_dim));
  Tensor<T> coeffs = init.uniform({out_dim, in_dim, nb}, 0.1 * scale);
  if (in_dim == out_dim) {
    const std::vector<double> xi = layer.grid.greville();
    auto cv = coeffs.mutable_values();
    for (std::size_t o = 0; o < out_dim; ++o) {
      for (std::size_t j = 0; j < nb; ++j) cv[(o * in_dim + o) * nb + j] += static_cast<T>(xi[j]);
    }
  }
  layer.spline_coeffs = coeffs;
  layer.base_weight = init.uniform({out_dim, in_dim}, scale);
  return layer;
}

template <typename T>
Tensor<T> kan_layer_forward(const Tensor<T>& z, const KanLayer<T>& layer) {
  if (z.rank() < 1 || z.shape().back() != layer.in_dim) {
    throw DimensionError("kan layer: input " + shape_string(z.shape()) + " does not end in in_dim=" +
                         std::to_string(layer.in_dim));
  }
  const std::size_t in = layer.in_dim, outd = layer.out_dim, nb = layer.grid.basis_count();
  const std::size_t rows = z.numel() / in;
  const std::size_t feat = in * nb;
  if (layer.spline_coeffs.shape() != Shape{outd, in, nb} || layer.base_weight.shape() != Shape{outd, in}) {
    throw DimensionError("kan layer: parameter shapes do not match the layer geometry");
  }

  auto basis = std::make_shared<std::vector<T>>(rows * feat);
  auto dbasis = std::make_shared<std::vector<T>>(rows * feat);
  std::vector<T> act(rows * in);
  const T* zp = z.data();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < in; ++i) {
      const T v = zp[r * in + i];
      layer.grid.evaluate(v, basis->data() + r * feat + i * nb, dbasis->data() + r * feat + i * nb);
      act[r * in + i] = silu_value(v);
    }
  }

  const auto& kern = kernels::active<T>();
  const T* cp = layer.spline_coeffs.data();
  const T* wp = layer.base_weight.data();
  Shape out_shape = z.shape();
  out_shape.back() = outd;
  std::vector<T> out(rows * outd);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t o = 0; o < outd; ++o) {
      out[r * outd + o] = kern.dot(wp + o * in, act.data() + r * in, in) + kern.dot(cp + o * feat, basis->data() + r * feat, feat);
    }
  }

  Tensor<T> coeffs = layer.spline_coeffs;
  Tensor<T> base = layer.base_weight;
  return attach("kan_layer", Tensor<T>(std::move(out_shape), std::move(out)), {z, coeffs, base},
                [z, coeffs, base, basis, dbasis, act = std::move(act), rows, in, outd, nb, feat](std::span<const T> g) {
                  const auto& kern = kernels::active<T>();
                  const T* cp = coeffs.data();
                  const T* wp = base.data();
                  T* gc = coeffs.requires_grad() ? coeffs.grad_accumulator().data() : nullptr;
                  T* gw = base.requires_grad() ? base.grad_accumulator().data() : nullptr;
                  T* gz = z.requires_grad() ? z.grad_accumulator().data() : nullptr;
                  std::vector<T> gfeat(gz != nullptr ? feat : 0);
                  std::vector<T> gact(gz != nullptr ? in : 0);
                  const T* zp = z.data();
                  for (std::size_t r = 0; r < rows; ++r) {
                    const T* fr = basis->data() + r * feat;
                    const T* ar = act.data() + r * in;
                    if (gz != nullptr) {
                      std::fill(gfeat.begin(), gfeat.end(), T{0});
                      std::fill(gact.begin(), gact.end(), T{0});
                    }
                    for (std::size_t o = 0; o < outd; ++o) {
                      const T go = g[r * outd + o];
                      if (go == T{0}) continue;
                      if (gc != nullptr) kern.axpy(feat, go, fr, gc + o * feat);
                      if (gw != nullptr) kern.axpy(in, go, ar, gw + o * in);
                      if (gz != nullptr) {
                        kern.axpy(feat, go, cp + o * feat, gfeat.data());
                        kern.axpy(in, go, wp + o * in, gact.data());
                      }
                    }
                    if (gz != nullptr) {
                      const T* dr = dbasis->data() + r * feat;
                      for (std::size_t i = 0; i < in; ++i) {
                        gz[r * in + i] += kern.dot(gfeat.data() + i * nb, dr + i * nb, nb) +
                                          gact[i] * silu_derivative(zp[r * in + i]);
                      }
                    }
                  }
                });
}

std::string_view token_mixer_name(TokenMixer mixer) { return mixer == TokenMixer::kan ? "kan" : "mlp"; }

TokenMixer parse_token_mixer(std::string_view name) {
  if (name == "kan") return TokenMixer::kan;
  if (name == "mlp") return TokenMixer::mlp;
  throw ConfigError("unknown token_mixer '" + std::string(name) + "' (expected kan or mlp)");
}

template <typename T>
void TokBlock<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  if (mixer == TokenMixer::kan) {
    for (std::size_t i = 0; i < kan.size(); ++i) kan[i].collect(prefix + "kan" + std::to_string(i) + ".", out);
  } else {
    out.emplace_back(prefix + "mlp.w1", mlp_w1);
    out.emplace_back(prefix + "mlp.b1", mlp_b1);
    out.emplace_back(prefix + "mlp.w2", mlp_w2);
    out.emplace_back(prefix + "mlp.b2", mlp_b2);
  }
  out.emplace_back(prefix + "dw.weight", dw_weight);
  out.emplace_back(prefix + "dw.bias", dw_bias);
  out.emplace_back(prefix + "ln.gamma", ln_gamma);
  out.emplace_back(prefix + "ln.beta", ln_beta);
}

template <typename T>
std::size_t TokBlock<T>::parameter_count(std::size_t dim, const TokBlockOptions& opt) {
  const std::size_t mixer = opt.mixer == TokenMixer::kan
                                ? opt.kan_depth * KanLayer<T>::parameter_count(dim, dim, opt.kan)
                                : 2 * dim * dim + 2 * dim;
  return mixer + dim * 9 + dim + 2 * dim;
}

template <typename T>
TokBlock<T> init_tok_block(std::size_t dim, const TokBlockOptions& opt, Initializer<T>& init) {
  if (dim == 0) throw ConfigError("tok block: dimension must be positive");
  if (opt.kan_depth == 0) throw ConfigError("tok block: kan_depth must be at least 1");
  TokBlock<T> block;
  block.mixer = opt.mixer;
  if (opt.mixer == TokenMixer::kan) {
    for (std::size_t i = 0; i < opt.kan_depth; ++i) block.kan.push_back(init_kan_layer(dim, dim, opt.kan, init));
  } else {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    block.mlp_w1 = init.uniform({dim, dim}, bound);
    block.mlp_b1 = init.constant({dim}, 0.0);
    block.mlp_w2 = init.uniform({dim, dim}, bound);
    block.mlp_b2 = init.constant({dim}, 0.0);
  }
  block.dw_weight = init.uniform({dim, 1, 3, 3}, 1.0 / 3.0);
  block.dw_bias = init.constant({dim}, 0.0);
  block.ln_gamma = init.constant({dim}, 1.0);
  block.ln_beta = init.constant({dim}, 0.0);
  return block;
}

template <typename T>
Tensor<T> token_mix(const Tensor<T>& z, const TokBlock<T>& block) {
  if (block.mixer == TokenMixer::kan) {
    Tensor<T> h = z;
    for (const auto& layer : block.kan) h = kan_layer_forward(h, layer);
    return h;
  }
  return linear(silu(linear(z, block.mlp_w1, block.mlp_b1)), block.mlp_w2, block.mlp_b2);
}

template <typename T>
Tensor<T> tok_block_forward(const Tensor<T>& z, const TokBlock<T>& block, std::size_t height, std::size_t width) {
  if (z.rank() != 3 || z.dim(1) != height * width || z.dim(2) != block.dim()) {
    throw DimensionError("tok block: tokens " + shape_string(z.shape()) + " do not form a " + std::to_string(height) +
                         "x" + std::to_string(width) + " map of dimension " + std::to_string(block.dim()));
  }
  const std::size_t d = block.dim();
  Tensor<T> mixed = scan::fold(token_mix(z, block), scan::ScanDirection::tl_br, height, width);
  Tensor<T> conv = conv2d(mixed, block.dw_weight, block.dw_bias, {1, 1, d});
  return layernorm(add(z, scan::unfold(conv, scan::ScanDirection::tl_br)), block.ln_gamma, block.ln_beta);
}

template <typename T>
Tensor<T> tok_kan_forward(const Tensor<T>& z, const TokBlock<T>& block, std::size_t height, std::size_t width) {
  if (block.mixer != TokenMixer::kan) throw ContractError("tok_kan_forward needs a KAN-mixer block");
  return tok_block_forward(z, block, height, width);
}

template <typename T>
Tensor<T> tok_mlp_forward(const Tensor<T>& z, const TokBlock<T>& block, std::size_t height, std::size_t width) {
  if (block.mixer != TokenMixer::mlp) throw ContractError("tok_mlp_forward needs an MLP-mixer block");
  return tok_block_forward(z, block, height, width);
}

#define KMUNET_INSTANTIATE_KAN(T)                                                                               \
  template struct KanLayer<T>;                                                                                 \
  template KanLayer<T> init_kan_layer(std::size_t, std::size_t, const KanOptions&, Initializer<T>&);           \
  template Tensor<T> kan_layer_forward(const Tensor<T>&, const KanLayer<T>&);                                  \
  template struct TokBlock<T>;                                                                                 \
  template TokBlock<T> init_tok_block(std::size_t, const TokBlockOptions&, Initializer<T>&);                   \
  template Tensor<T> token_mix(const Tensor<T>&, const TokBlock<T>&);                                          \
  template Tensor<T> tok_block_forward(const Tensor<T>&, const TokBlock<T>&, std::size_t, std::size_t);        \
  template Tensor<T> tok_kan_forward(const Tensor<T>&, const TokBlock<T>&, std::size_t, std::size_t);          \
  template Tensor<T> tok_mlp_forward(const Tensor<T>&, const TokBlock<T>&, std::size_t, std::size_t);

KMUNET_INSTANTIATE_KAN(float)
KMUNET_INSTANTIATE_KAN(double)

}  // namespace kmunet::kan
