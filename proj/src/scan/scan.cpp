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
#include "kmunet/scan/scan.hpp"

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

#include "kmunet/numerics/ops.hpp"

namespace kmunet::scan {

std::string_view direction_name(ScanDirection dir) {
  switch (dir) {
    case ScanDirection::tl_br: return "tl_br";
    case ScanDirection::tr_bl: return "tr_bl";
    case ScanDirection::br_tl: return "br_tl";
    case ScanDirection::bl_tr: return "bl_tr";
    case ScanDirection::spiral_in: return "spiral_in";
  }
  return "unknown";
}

ScanDirection parse_direction(std::string_view name) {
  for (ScanDirection dir : kAllDirections) {
    if (direction_name(dir) == name) return dir;
  }
  throw ConfigError("unknown scan direction '" + std::string(name) +
                    "' (expected tl_br, tr_bl, br_tl, bl_tr or spiral_in)");
}

std::vector<ScanDirection> parse_directions(std::string_view list) {
  std::vector<ScanDirection> dirs;
  std::size_t start = 0;
  while (start <= list.size()) {
    std::size_t end = list.find(',', start);
    if (end == std::string_view::npos) end = list.size();
    std::string_view item = list.substr(start, end - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      ScanDirection dir = parse_direction(item);
      for (ScanDirection seen : dirs) {
        if (seen == dir) throw ConfigError("scan direction '" + std::string(item) + "' listed twice");
      }
      dirs.push_back(dir);
    }
    start = end + 1;
  }
  if (dirs.empty()) throw ConfigError("at least one scan direction is required");
  return dirs;
}

std::string format_directions(const std::vector<ScanDirection>& dirs) {
  std::string out;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    if (i != 0) out += ",";
    out += direction_name(dirs[i]);
  }
  return out;
}

namespace {

std::vector<std::size_t> spiral_order(std::size_t h, std::size_t w) {
  std::vector<std::size_t> order;
  order.reserve(h * w);
  std::size_t top = 0, left = 0, bottom = h - 1, right = w - 1;
  while (top <= bottom && left <= right) {
    for (std::size_t c = left; c <= right; ++c) order.push_back(top * w + c);
    for (std::size_t r = top + 1; r <= bottom; ++r) order.push_back(r * w + right);
    if (top < bottom && left < right) {
      for (std::size_t c = right; c-- > left;) order.push_back(bottom * w + c);
      for (std::size_t r = bottom; --r > top;) order.push_back(r * w + left);
    }
    if (bottom == 0 || right == 0) break;
    ++top;
    ++left;
    --bottom;
    --right;
  }
  return order;
}

std::vector<std::size_t> column_order_right_to_left(std::size_t h, std::size_t w) {
  std::vector<std::size_t> order;
  order.reserve(h * w);
  for (std::size_t c = w; c-- > 0;) {
    for (std::size_t r = 0; r < h; ++r) order.push_back(r * w + c);
  }
  return order;
}

}  // namespace

ScanPermutation permutation_for(ScanDirection dir, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) {
    throw DimensionError("scan: map dimensions must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
  const std::size_t n = height * width;
  ScanPermutation perm;
  switch (dir) {
    case ScanDirection::tl_br:
    case ScanDirection::br_tl:
      perm.order.resize(n);
      for (std::size_t t = 0; t < n; ++t) perm.order[t] = dir == ScanDirection::tl_br ? t : n - 1 - t;
      break;
    case ScanDirection::tr_bl:
      perm.order = column_order_right_to_left(height, width);
      break;
    case ScanDirection::bl_tr:
      perm.order = column_order_right_to_left(height, width);
      std::reverse(perm.order.begin(), perm.order.end());
      break;
    case ScanDirection::spiral_in:
      perm.order = spiral_order(height, width);
      break;
  }
  perm.inverse.resize(n);
  for (std::size_t t = 0; t < n; ++t) perm.inverse[perm.order[t]] = t;
  return perm;
}

const ScanPermutation& cached_permutation(ScanDirection dir, std::size_t height, std::size_t width) {
  static std::mutex mutex;
  static std::map<std::tuple<ScanDirection, std::size_t, std::size_t>, std::unique_ptr<ScanPermutation>> table;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = table[{dir, height, width}];
  if (!slot) slot = std::make_unique<ScanPermutation>(permutation_for(dir, height, width));
  return *slot;
}

template <typename T>
Tensor<T> unfold(const Tensor<T>& x, ScanDirection dir) {
  if (x.rank() != 4) throw DimensionError("unfold: expected [B,C,H,W], got " + shape_string(x.shape()));
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3), l = h * w;
  const ScanPermutation& perm = cached_permutation(dir, h, w);
  std::vector<T> out(x.numel());
  const T* xp = x.data();
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t t = 0; t < l; ++t) {
      const std::size_t cell = perm.order[t];
      for (std::size_t ch = 0; ch < c; ++ch) out[(bi * l + t) * c + ch] = xp[(bi * c + ch) * l + cell];
    }
  }
  return attach("unfold", Tensor<T>({b, l, c}, std::move(out)), {x}, [x, &perm, b, c, l](std::span<const T> g) {
    if (!x.requires_grad()) return;
    auto gx = x.grad_accumulator();
    for (std::size_t bi = 0; bi < b; ++bi) {
      for (std::size_t t = 0; t < l; ++t) {
        const std::size_t cell = perm.order[t];
        for (std::size_t ch = 0; ch < c; ++ch) gx[(bi * c + ch) * l + cell] += g[(bi * l + t) * c + ch];
      }
    }
  });
}

template <typename T>
Tensor<T> fold(const Tensor<T>& seq, ScanDirection dir, std::size_t height, std::size_t width) {
  if (seq.rank() != 3 || seq.dim(1) != height * width) {
    throw DimensionError("fold: sequence " + shape_string(seq.shape()) + " does not hold a " +
                         std::to_string(height) + "x" + std::to_string(width) + " map");
  }
  const std::size_t b = seq.dim(0), c = seq.dim(2), l = height * width;
  const ScanPermutation& perm = cached_permutation(dir, height, width);
  std::vector<T> out(seq.numel());
  const T* sp = seq.data();
  for (std::size_t bi = 0; bi < b; ++bi) {
    for (std::size_t t = 0; t < l; ++t) {
      const std::size_t cell = perm.order[t];
      for (std::size_t ch = 0; ch < c; ++ch) out[(bi * c + ch) * l + cell] = sp[(bi * l + t) * c + ch];
    }
  }
  return attach("fold", Tensor<T>({b, c, height, width}, std::move(out)), {seq},
                [seq, &perm, b, c, l](std::span<const T> g) {
                  if (!seq.requires_grad()) return;
                  auto gs = seq.grad_accumulator();
                  for (std::size_t bi = 0; bi < b; ++bi) {
                    for (std::size_t t = 0; t < l; ++t) {
                      const std::size_t cell = perm.order[t];
                      for (std::size_t ch = 0; ch < c; ++ch) gs[(bi * l + t) * c + ch] += g[(bi * c + ch) * l + cell];
                    }
                  }
                });
}

template <typename T>
Tensor<T> rmerge(const std::vector<Tensor<T>>& branches) {
  if (branches.empty()) throw ContractError("rmerge: at least one branch is required");
  for (const auto& br : branches) {
    if (br.shape() != branches.front().shape()) {
      throw ContractError("rmerge: branch shape " + shape_string(br.shape()) + " differs from " +
                          shape_string(branches.front().shape()));
    }
  }
  std::vector<T> out(branches.front().values().begin(), branches.front().values().end());
  for (std::size_t k = 1; k < branches.size(); ++k) {
    auto v = branches[k].values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
  }
  return attach("rmerge", Tensor<T>(branches.front().shape(), std::move(out)), branches,
                [branches](std::span<const T> g) {
                  for (const auto& br : branches) {
                    if (!br.requires_grad()) continue;
                    auto gb = br.grad_accumulator();
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                  }
                });
}

template Tensor<float> unfold(const Tensor<float>&, ScanDirection);
template Tensor<double> unfold(const Tensor<double>&, ScanDirection);
template Tensor<float> fold(const Tensor<float>&, ScanDirection, std::size_t, std::size_t);
template Tensor<double> fold(const Tensor<double>&, ScanDirection, std::size_t, std::size_t);
template Tensor<float> rmerge(const std::vector<Tensor<float>>&);
template Tensor<double> rmerge(const std::vector<Tensor<double>>&);

}  // namespace kmunet::scan
