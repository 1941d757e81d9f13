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
#include <vector>

#include "kmunet/numerics/params.hpp"
#include "kmunet/numerics/tensor.hpp"
#include "kmunet/s6/s6.hpp"
#include "kmunet/scan/scan.hpp"

// Selective-scan multi-scale attention block: directional S6 feature
// extraction merged by summation, then a two-branch (1x1 + 3x3) grouped
// convolution gate.

namespace kmunet::sem {

struct SemConfig {
  std::vector<scan::ScanDirection> directions{scan::ScanDirection::tl_br, scan::ScanDirection::tr_bl,
                                              scan::ScanDirection::br_tl, scan::ScanDirection::bl_tr};
  std::size_t channels = 8;
  std::size_t n_state = 16;
  // Channel groups folded into the batch axis before the attention convs.
  std::size_t attention_groups = 4;

  void validate() const;
};

template <typename T>
struct SemParams {
  std::vector<s6::S6Params<T>> branches;  // one per configured direction
  Tensor<T> w1, b1;  // [C/G, C/G, 1, 1], [C/G]
  Tensor<T> w3, b3;  // [C/G, C/G, 3, 3], [C/G]

  void collect(const std::string& prefix, const SemConfig& cfg, ParamList<T>& out) const;
  static std::size_t parameter_count(const SemConfig& cfg);
};

template <typename T>
SemParams<T> init_params(const SemConfig& cfg, Initializer<T>& init);

// sum over directions of fold(selective_scan(unfold(X, dir)), dir)
template <typename T>
Tensor<T> sem_extract(const Tensor<T>& x, const SemConfig& cfg, const SemParams<T>& params);

// Y = reshape_back(sigmoid(conv1x1(X') + conv3x3(X')) * X'), X' = X with channel
// groups moved into the batch axis.
template <typename T>
Tensor<T> multiscale_attention(const Tensor<T>& x, const SemConfig& cfg, const SemParams<T>& params);

template <typename T>
Tensor<T> sem_forward(const Tensor<T>& x, const SemConfig& cfg, const SemParams<T>& params);

}  // namespace kmunet::sem
