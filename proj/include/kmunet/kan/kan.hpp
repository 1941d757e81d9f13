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
#include <string>
#include <string_view>
#include <vector>

#include "kmunet/numerics/params.hpp"
#include "kmunet/numerics/tensor.hpp"

// Kolmogorov-Arnold layers: every input-output edge carries a learnable
// univariate function, here a B-spline plus a silu residual path. The
// tokenized block applies such a layer per token, mixes neighbouring tokens
// with a depthwise 3x3 convolution and closes with a residual + layer norm.

namespace kmunet::kan {

// Uniform knot vector for degree-`order` B-splines on [-range, range] split
// into `intervals` pieces, extended by `order` knots on each side.
class SplineGrid {
 public:
  SplineGrid(std::size_t intervals, std::size_t order, double range);

  std::size_t intervals() const { return intervals_; }
  std::size_t order() const { return order_; }
  double range() const { return range_; }
  std::size_t basis_count() const { return intervals_ + order_; }
  // All intervals + 2*order + 1 knots.
  const std::vector<double>& knots() const { return knots_; }
  // The intervals + 1 knots spanning [-range, range].
  std::vector<double> interior_knots() const;

  double clamp(double x) const { return x < -range_ ? -range_ : (x > range_ ? range_ : x); }

  // Basis values at clamp(x) by the Cox-de Boor recursion; `out` has
  // basis_count() entries. When `derivative` is non-null it receives
  // d(basis)/dx, zero outside the grid range.
  template <typename T>
  void evaluate(T x, T* out, T* derivative = nullptr) const;

  // Greville abscissae; using them as coefficients reproduces f(x) = x.
  std::vector<double> greville() const;

 private:
  std::size_t intervals_;
  std::size_t order_;
  double range_;
  std::vector<double> knots_;
};

std::vector<double> bspline_basis(double x, const SplineGrid& grid);

struct KanOptions {
  std::size_t grid = 5;
  std::size_t order = 3;
  double range = 1.0;
};

template <typename T>
struct KanLayer {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  SplineGrid grid{5, 3, 1.0};
  Tensor<T> spline_coeffs;  // [out, in, grid + order]
  Tensor<T> base_weight;    // [out, in], applied to silu(z)

  void collect(const std::string& prefix, ParamList<T>& out) const;
  static std::size_t parameter_count(std::size_t in_dim, std::size_t out_dim, const KanOptions& opt);
};

// When in_dim == out_dim the diagonal splines start at the identity on the
// grid range; everything else is small noise.
template <typename T>
KanLayer<T> init_kan_layer(std::size_t in_dim, std::size_t out_dim, const KanOptions& opt, Initializer<T>& init);

// out[o] = sum_i base_weight[o,i] silu(z_i) + sum_j spline_coeffs[o,i,j] B_j(z_i)
template <typename T>
Tensor<T> kan_layer_forward(const Tensor<T>& z, const KanLayer<T>& layer);

enum class TokenMixer { kan, mlp };

std::string_view token_mixer_name(TokenMixer mixer);
TokenMixer parse_token_mixer(std::string_view name);

struct TokBlockOptions {
  TokenMixer mixer = TokenMixer::kan;
  KanOptions kan;
  std::size_t kan_depth = 1;
};

template <typename T>
struct TokBlock {
  TokenMixer mixer = TokenMixer::kan;
  std::vector<KanLayer<T>> kan;  // D -> D layers
  Tensor<T> mlp_w1, mlp_b1, mlp_w2, mlp_b2;  // [D,D],[D],[D,D],[D]
  Tensor<T> dw_weight, dw_bias;  // [D,1,3,3], [D]
  Tensor<T> ln_gamma, ln_beta;   // [D]

  std::size_t dim() const { return ln_gamma.numel(); }
  void collect(const std::string& prefix, ParamList<T>& out) const;
  static std::size_t parameter_count(std::size_t dim, const TokBlockOptions& opt);
};

template <typename T>
TokBlock<T> init_tok_block(std::size_t dim, const TokBlockOptions& opt, Initializer<T>& init);

// Phi applied per token (the KAN stack or the two-layer silu MLP).
template <typename T>
Tensor<T> token_mix(const Tensor<T>& z, const TokBlock<T>& block);

// LN(Z + DwConv(Phi(Z))) with Z[B, H*W, D] in row-major token order.
template <typename T>
Tensor<T> tok_block_forward(const Tensor<T>& z, const TokBlock<T>& block, std::size_t height, std::size_t width);

// tok_block_forward for a block of the matching mixer kind.
template <typename T>
Tensor<T> tok_kan_forward(const Tensor<T>& z, const TokBlock<T>& block, std::size_t height, std::size_t width);
template <typename T>
Tensor<T> tok_mlp_forward(const Tensor<T>& z, const TokBlock<T>& block, std::size_t height, std::size_t width);

}  // namespace kmunet::kan
