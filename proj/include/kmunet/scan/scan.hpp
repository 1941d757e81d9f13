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

#include "kmunet/numerics/tensor.hpp"

// Serialization of 2-D feature maps into token sequences along fixed
// traversal orders, and the inverse mapping.

namespace kmunet::scan {

enum class ScanDirection {
  tl_br,      // row-major
  tr_bl,      // columns right-to-left, each top-to-bottom
  br_tl,      // reversed row-major
  bl_tr,      // reversed tr_bl
  spiral_in,  // clockwise ring walk from (0,0) toward the center
};

inline constexpr ScanDirection kAllDirections[] = {ScanDirection::tl_br, ScanDirection::tr_bl, ScanDirection::br_tl,
                                                   ScanDirection::bl_tr, ScanDirection::spiral_in};

std::string_view direction_name(ScanDirection dir);
ScanDirection parse_direction(std::string_view name);
// Comma-separated list, e.g. "tl_br,br_tl". Duplicates are rejected.
std::vector<ScanDirection> parse_directions(std::string_view list);
std::string format_directions(const std::vector<ScanDirection>& dirs);

// order[t] is the row-major grid index visited at sequence position t;
// inverse[order[t]] == t.
struct ScanPermutation {
  std::vector<std::size_t> order;
  std::vector<std::size_t> inverse;
};

ScanPermutation permutation_for(ScanDirection dir, std::size_t height, std::size_t width);

// Cached permutation table shared by all threads.
const ScanPermutation& cached_permutation(ScanDirection dir, std::size_t height, std::size_t width);

// Ring index (distance to the nearest border) of a grid cell.
inline std::size_t ring_of(std::size_t row, std::size_t col, std::size_t height, std::size_t width) {
  const std::size_t a = row < height - 1 - row ? row : height - 1 - row;
  const std::size_t b = col < width - 1 - col ? col : width - 1 - col;
  return a < b ? a : b;
}

// X[B,C,H,W] -> [B,H*W,C]; token t holds the channels at grid cell order[t].
template <typename T>
Tensor<T> unfold(const Tensor<T>& x, ScanDirection dir);

// Exact inverse of unfold: seq[B,L,C] with L == H*W -> [B,C,H,W].
template <typename T>
Tensor<T> fold(const Tensor<T>& seq, ScanDirection dir, std::size_t height, std::size_t width);

// Elementwise sum of equally shaped branch outputs.
template <typename T>
Tensor<T> rmerge(const std::vector<Tensor<T>>& branches);

}  // namespace kmunet::scan
