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

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kmunet/kan/kan.hpp"
#include "kmunet/model/config.hpp"
#include "kmunet/numerics/params.hpp"
#include "kmunet/numerics/tensor.hpp"
#include "kmunet/sem/sem.hpp"

// The segmentation network. Encoder: a stride-1 stem, three conv stages
// (stride-2 ConvBlock + SEM) and two token stages (patch merge + Tok block);
// a Tok-block bottleneck; a mirrored decoder of patch expansions with
// additive skips, ending in a stride-1 ConvBlock; a 1x1 head producing logits.

namespace kmunet::model {

// conv3x3 (no bias) -> group norm -> silu
template <typename T>
struct ConvBlock {
  Tensor<T> weight;  // [Cout, Cin, 3, 3]
  Tensor<T> gamma, beta;
  std::size_t stride = 1;

  void collect(const std::string& prefix, ParamList<T>& out) const;
};

// Stride-2 3x3 conv (merge) or nearest 2x upsample + 1x1 conv (expand).
template <typename T>
struct Resample {
  Tensor<T> weight, bias;

  void collect(const std::string& prefix, ParamList<T>& out) const;
};

// Largest divisor of `channels` not above 4.
std::size_t norm_groups(std::size_t channels);

template <typename T>
struct KmUnet {
  ModelConfig cfg;
  ConvBlock<T> stem;
  std::array<ConvBlock<T>, 3> enc_conv;
  std::array<sem::SemParams<T>, 3> enc_sem;
  std::array<Resample<T>, 2> merge;  // C3 -> D4, D4 -> D5
  std::array<kan::TokBlock<T>, 2> enc_tok;
  kan::TokBlock<T> bottleneck;
  // expand[0]: D5 -> D4, [1]: D4 -> C3, [2]: C3 -> C2, [3]: C2 -> C1, [4]: C1 -> C1
  std::array<Resample<T>, 5> expand;
  kan::TokBlock<T> dec_tok;
  std::array<ConvBlock<T>, 3> dec_conv;  // indexed like enc_conv (C1, C2, C3)
  std::array<sem::SemParams<T>, 3> dec_sem;
  ConvBlock<T> dec_stem;  // full resolution, after the last skip
  Resample<T> head;

  // Stable names in a fixed order.
  ParamList<T> parameters() const;
};

// Stage outputs kept by forward() when requested.
template <typename T>
struct ForwardTrace {
  std::vector<Tensor<T>> encoder;  // five stages, resolution H/2 .. H/32
  Tensor<T> bottleneck;
};

template <typename T>
KmUnet<T> build(const ModelConfig& cfg, std::uint64_t seed);

template <typename T>
Tensor<T> forward(const KmUnet<T>& m, const Tensor<T>& x, ForwardTrace<T>* trace = nullptr);

// Building blocks, exposed for tests.
template <typename T>
Tensor<T> conv_block(const Tensor<T>& x, const ConvBlock<T>& b);
template <typename T>
Tensor<T> patch_merge(const Tensor<T>& x, const Resample<T>& r);
template <typename T>
Tensor<T> patch_expand(const Tensor<T>& x, const Resample<T>& r);
// Map [B,D,H,W] -> tokens -> Tok block -> map.
template <typename T>
Tensor<T> token_stage(const Tensor<T>& x, const kan::TokBlock<T>& block);

// Closed-form parameter count from the layer formulas.
std::size_t parameter_count(const ModelConfig& cfg);

// Analytic multiply-accumulate estimate of one forward pass on a
// 1 x in_channels x H x W input (normalization and pointwise ops excluded).
std::uint64_t estimate_macs(const ModelConfig& cfg, std::size_t height, std::size_t width);

// Copies parameter values between models with identical configs.
template <typename To, typename From>
KmUnet<To> convert(const KmUnet<From>& m);

}  // namespace kmunet::model
