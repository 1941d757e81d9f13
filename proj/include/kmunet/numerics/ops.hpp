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

#include "kmunet/numerics/tensor.hpp"

// Differentiable tensor operations. Each one records its backward rule on the
// active tape (see Recording) when an input requires a gradient.

namespace kmunet {

// Elementwise, same shapes.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);

// Same values, new shape with the same element count.
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// [m,k] x [k,n] -> [m,n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// x[..., in] * weight[out, in]^T + bias[out]. `bias` may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

// Cross-correlation with zero padding. x[B,Cin,H,W], weight[Cout,Cin/groups,kh,kw],
// bias[Cout] or undefined.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                 const Conv2dOptions& options = {});

// Normalizes over the last axis, then applies gamma/beta of that axis size.
template <typename T>
Tensor<T> layernorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5));

// Per-sample normalization over (channels/groups, H, W) blocks of x[B,C,H,W]
// with per-channel affine parameters.
template <typename T>
Tensor<T> group_norm(const Tensor<T>& x, std::size_t groups, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

enum class Pointwise { exp, sigmoid, silu, relu, softplus };

std::string_view pointwise_name(Pointwise fn);
Pointwise parse_pointwise(std::string_view name);

template <typename T> Tensor<T> pointwise(Pointwise fn, const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x) { return pointwise(Pointwise::exp, x); }
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x) { return pointwise(Pointwise::sigmoid, x); }
template <typename T> Tensor<T> silu(const Tensor<T>& x) { return pointwise(Pointwise::silu, x); }
template <typename T> Tensor<T> relu(const Tensor<T>& x) { return pointwise(Pointwise::relu, x); }
template <typename T> Tensor<T> softplus(const Tensor<T>& x) { return pointwise(Pointwise::softplus, x); }

// Scalar helpers, also used by fused operations elsewhere.
template <typename T> T sigmoid_value(T x);
template <typename T> T softplus_value(T x);
template <typename T> T silu_value(T x);
template <typename T> T silu_derivative(T x);

// x[B,C,H,W] -> [B,C,2H,2W], each pixel repeated over a 2x2 block.
template <typename T> Tensor<T> upsample_nearest2x(const Tensor<T>& x);

// Reductions to shape [1].
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
// sum_i weights[i] * x[i]; weights are constants.
template <typename T> Tensor<T> weighted_sum(const Tensor<T>& x, std::span<const T> weights);

}  // namespace kmunet
