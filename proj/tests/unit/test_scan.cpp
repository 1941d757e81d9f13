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
#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "kmunet/numerics/ops.hpp"
#include "kmunet/scan/scan.hpp"

using namespace kmunet;
using namespace kmunet::scan;
using D = double;

namespace {

std::vector<D> tokens_of(const Tensor<D>& seq) { return {seq.values().begin(), seq.values().end()}; }

// Independent spiral walk by shrinking bounds.
std::vector<std::size_t> spiral_oracle(std::size_t h, std::size_t w) {
  std::vector<std::size_t> out;
  long top = 0, bottom = static_cast<long>(h) - 1, left = 0, right = static_cast<long>(w) - 1;
  while (top <= bottom && left <= right) {
    for (long c = left; c <= right; ++c) out.push_back(top * w + c);
    for (long r = top + 1; r <= bottom; ++r) out.push_back(r * w + right);
    if (top < bottom) {
      for (long c = right - 1; c >= left; --c) out.push_back(bottom * w + c);
    }
    if (left < right) {
      for (long r = bottom - 1; r > top; --r) out.push_back(r * w + left);
    }
    ++top, --bottom, ++left, --right;
  }
  return out;
}

}  // namespace

TEST_SUITE("scan") {
  TEST_CASE("direction names round-trip") {
    for (ScanDirection d : kAllDirections) CHECK(parse_direction(direction_name(d)) == d);
    CHECK_THROWS_AS(parse_direction("zigzag"), ConfigError);
    CHECK(parse_directions("tl_br, br_tl").size() == 2);
    CHECK_THROWS_AS(parse_directions("tl_br,tl_br"), ConfigError);
    CHECK_THROWS_AS(parse_directions(""), ConfigError);
    CHECK(format_directions({ScanDirection::tl_br, ScanDirection::spiral_in}) == "tl_br,spiral_in");
  }

  TEST_CASE("permutations are bijections with consistent inverses") {
    for (ScanDirection d : kAllDirections) {
      for (std::size_t h = 1; h <= 16; ++h) {
        for (std::size_t w = 1; w <= 16; ++w) {
          const ScanPermutation p = permutation_for(d, h, w);
          std::vector<std::size_t> sorted = p.order;
          std::sort(sorted.begin(), sorted.end());
          bool ok = sorted.size() == h * w;
          for (std::size_t i = 0; ok && i < sorted.size(); ++i) ok = sorted[i] == i;
          for (std::size_t i = 0; ok && i < p.order.size(); ++i) ok = p.inverse[p.order[i]] == i;
          CHECK_MESSAGE(ok, direction_name(d), " ", h, "x", w);
        }
      }
    }
    CHECK_THROWS_AS(permutation_for(ScanDirection::tl_br, 0, 3), DimensionError);
  }

  TEST_CASE("hand-enumerated orders") {
    CHECK(permutation_for(ScanDirection::spiral_in, 3, 3).order == std::vector<std::size_t>{0, 1, 2, 5, 8, 7, 6, 3, 4});
    CHECK(permutation_for(ScanDirection::tr_bl, 2, 2).order == std::vector<std::size_t>{1, 3, 0, 2});
    CHECK(permutation_for(ScanDirection::bl_tr, 2, 2).order == std::vector<std::size_t>{2, 0, 3, 1});
    CHECK(permutation_for(ScanDirection::br_tl, 2, 3).order == std::vector<std::size_t>{5, 4, 3, 2, 1, 0});
  }

  TEST_CASE("spiral matches an independent bounds walk") {
    for (std::size_t h = 1; h <= 12; ++h)
      for (std::size_t w = 1; w <= 12; ++w) CHECK(permutation_for(ScanDirection::spiral_in, h, w).order == spiral_oracle(h, w));
  }

  TEST_CASE("spiral visits each ring before the next") {
    for (std::size_t h = 1; h <= 12; ++h) {
      for (std::size_t w = 1; w <= 12; ++w) {
        const auto order = permutation_for(ScanDirection::spiral_in, h, w).order;
        std::size_t prev = 0;
        bool ok = true;
        for (std::size_t idx : order) {
          const std::size_t r = ring_of(idx / w, idx % w, h, w);
          ok = ok && r >= prev;
          prev = r;
        }
        CHECK(ok);
      }
    }
  }

  TEST_CASE("unfold examples") {
    const Tensor<D> x({1, 1, 2, 2}, {1, 2, 3, 4});
    CHECK(tokens_of(unfold(x, ScanDirection::tl_br)) == std::vector<D>{1, 2, 3, 4});
    CHECK(tokens_of(unfold(x, ScanDirection::br_tl)) == std::vector<D>{4, 3, 2, 1});
    CHECK(tokens_of(unfold(x, ScanDirection::tr_bl)) == std::vector<D>{2, 4, 1, 3});
    const auto f = fold(Tensor<D>({1, 4, 1}, {4, 3, 2, 1}), ScanDirection::br_tl, 2, 2);
    CHECK(tokens_of(f) == std::vector<D>{1, 2, 3, 4});
    std::vector<D> sp{0, 1, 2, 5, 8, 7, 6, 3, 4};
    CHECK(tokens_of(fold(Tensor<D>({1, 9, 1}, sp), ScanDirection::spiral_in, 3, 3)) ==
          std::vector<D>{0, 1, 2, 3, 4, 5, 6, 7, 8});
  }

  TEST_CASE("tl_br unfold is the channels-last transpose") {
    std::mt19937_64 rng(1);
    const auto x = testing::random_tensor<D>({2, 3, 4, 5}, rng);
    const auto s = unfold(x, ScanDirection::tl_br);
    CHECK(s.shape() == Shape{2, 20, 3});
    for (std::size_t b = 0; b < 2; ++b)
      for (std::size_t t = 0; t < 20; ++t)
        for (std::size_t c = 0; c < 3; ++c) CHECK(s.values()[(b * 20 + t) * 3 + c] == x.values()[(b * 3 + c) * 20 + t]);
  }

  TEST_CASE("fold and unfold are inverse for every direction") {
    std::mt19937_64 rng(2);
    for (ScanDirection d : kAllDirections) {
      for (std::size_t h = 1; h <= 7; ++h) {
        const auto x = testing::random_tensor<D>({2, 3, h, 5}, rng);
        CHECK(testing::bit_equal(fold(unfold(x, d), d, h, 5), x));
        const auto s = testing::random_tensor<D>({2, h * 5, 3}, rng);
        CHECK(testing::bit_equal(unfold(fold(s, d, h, 5), d), s));
      }
    }
    CHECK_THROWS_AS(fold(Tensor<D>({1, 5, 2}), ScanDirection::tl_br, 2, 3), DimensionError);
  }

  TEST_CASE("constant maps give constant sequences") {
    const auto x = Tensor<D>::full({1, 2, 3, 4}, 0.25);
    for (ScanDirection d : kAllDirections) {
      const auto seq = unfold(x, d);
      for (D v : seq.values()) CHECK(v == 0.25);
    }
  }

  TEST_CASE("rmerge sums branches") {
    std::mt19937_64 rng(3);
    std::vector<Tensor<D>> branches;
    for (int i = 0; i < 4; ++i) branches.push_back(testing::random_tensor<D>({1, 2, 3, 3}, rng));
    const auto s = rmerge(branches);
    for (std::size_t i = 0; i < s.numel(); ++i) {
      D acc = 0;
      for (const auto& b : branches) acc += b.values()[i];
      CHECK(s.values()[i] == doctest::Approx(acc).epsilon(1e-15));
    }
    CHECK(testing::bit_equal(rmerge(std::vector<Tensor<D>>{branches[0]}), branches[0]));
    const auto z = rmerge(std::vector<Tensor<D>>{branches[0], scale(branches[0], -1.0)});
    for (D v : z.values()) CHECK(v == 0.0);
    CHECK_THROWS_AS(rmerge(std::vector<Tensor<D>>{}), ContractError);
    CHECK_THROWS_AS(rmerge(std::vector<Tensor<D>>{branches[0], Tensor<D>({1, 2, 3, 4})}), ContractError);
  }

  TEST_CASE("rmerge commutes with fold for a shared direction") {
    std::mt19937_64 rng(4);
    const auto a = testing::random_tensor<D>({1, 12, 2}, rng), b = testing::random_tensor<D>({1, 12, 2}, rng);
    const auto d = ScanDirection::spiral_in;
    const auto lhs = rmerge(std::vector<Tensor<D>>{fold(a, d, 3, 4), fold(b, d, 3, 4)});
    const auto rhs = fold(add(a, b), d, 3, 4);
    CHECK(testing::bit_equal(lhs, rhs));
  }

  TEST_CASE("cached permutations equal fresh ones") {
    for (ScanDirection d : kAllDirections) CHECK(cached_permutation(d, 5, 7).order == permutation_for(d, 5, 7).order);
  }
}
