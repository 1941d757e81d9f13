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
#include <fstream>
#include <set>

#include "helpers.hpp"
#include "kmunet/data/data.hpp"

using namespace kmunet;

namespace {

double foreground(const data::Sample& s) {
  double f = 0;
  for (float v : s.mask.values()) f += v;
  return f / double(s.mask.numel());
}

void write_bytes(const std::string& path, const std::string& bytes) { std::ofstream(path, std::ios::binary) << bytes; }

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("synthetic generation is deterministic and independent of n") {
    const auto a = data::gen_synthetic(5, 32, 64, 11), b = data::gen_synthetic(5, 32, 64, 11);
    const auto c = data::gen_synthetic(2, 32, 64, 11), d = data::gen_synthetic(2, 32, 64, 12);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(a[i].id == b[i].id);
      CHECK(testing::bit_equal(a[i].image, b[i].image));
      CHECK(testing::bit_equal(a[i].mask, b[i].mask));
    }
    CHECK(testing::bit_equal(a[1].image, c[1].image));
    CHECK_FALSE(testing::bit_equal(a[0].image, d[0].image));
    CHECK(a[0].image.shape() == Shape{3, 32, 64});
    CHECK(a[0].mask.shape() == Shape{1, 32, 64});
    CHECK(a[3].id == "syn00003");
    CHECK_THROWS_AS(data::gen_synthetic(0, 32, 32, 1), ConfigError);
  }

  TEST_CASE("masks are binary with foreground in range over 1000 samples") {
    for (std::size_t i = 0; i < 1000; ++i) {
      const auto s = data::generate_sample(i, 32, 32, 5);
      CHECK_NOTHROW(data::require_binary(s.mask.values(), "mask"));
      const double f = foreground(s);
      CHECK(f >= data::kMinForeground);
      CHECK(f <= data::kMaxForeground);
      for (float v : s.image.values()) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
      }
    }
  }

  TEST_CASE("augmentations are bijections with the expected cycles") {
    using A = data::Augmentation;
    const auto s = data::generate_sample(0, 32, 32, 2);
    auto same = [](const data::Sample& x, const data::Sample& y) {
      return testing::bit_equal(x.image, y.image) && testing::bit_equal(x.mask, y.mask);
    };
    CHECK(same(data::apply_augmentation(s, A::identity), s));
    CHECK(same(data::apply_augmentation(data::apply_augmentation(s, A::hflip), A::hflip), s));
    CHECK(same(data::apply_augmentation(data::apply_augmentation(s, A::vflip), A::vflip), s));
    CHECK(same(data::apply_augmentation(data::apply_augmentation(s, A::rot180), A::rot180), s));
    CHECK(same(data::apply_augmentation(data::apply_augmentation(s, A::rot90), A::rot270), s));
    CHECK(same(data::apply_augmentation(data::apply_augmentation(s, A::rot90), A::rot90),
               data::apply_augmentation(s, A::rot180)));
    CHECK(same(data::apply_augmentation(data::apply_augmentation(s, A::hflip), A::vflip),
               data::apply_augmentation(s, A::rot180)));
    CHECK_FALSE(same(data::apply_augmentation(s, A::hflip), s));
    for (auto a : data::allowed_augmentations(32, 32)) {
      const auto t = data::apply_augmentation(s, a);
      CHECK(foreground(t) == foreground(s));
      auto sorted = [](const Tensor<float>& x) {
        std::vector<float> v(x.values().begin(), x.values().end());
        std::sort(v.begin(), v.end());
        return v;
      };
      CHECK(sorted(t.image) == sorted(s.image));
    }
  }

  TEST_CASE("rot90 moves the top-right pixel to the top-left") {
    std::vector<float> m(16, 0.0f);
    m[0 * 4 + 3] = 1.0f;  // row 0, col 3
    data::Sample s{"x", Tensor<float>({3, 4, 4}), Tensor<float>({1, 4, 4}, m)};
    const auto r = data::apply_augmentation(s, data::Augmentation::rot90);
    CHECK(r.mask.values()[0] == 1.0f);
    const auto t = data::apply_augmentation(s, data::Augmentation::rot270);
    CHECK(t.mask.values()[3 * 4 + 3] == 1.0f);
  }

  TEST_CASE("non-square samples skip quarter turns") {
    const auto allowed = data::allowed_augmentations(32, 64);
    CHECK(std::find(allowed.begin(), allowed.end(), data::Augmentation::rot90) == allowed.end());
    CHECK(std::find(allowed.begin(), allowed.end(), data::Augmentation::rot180) != allowed.end());
    CHECK(data::allowed_augmentations(16, 16).size() == 6);
    const auto s = data::generate_sample(1, 32, 64, 1);
    std::mt19937_64 rng(1);
    for (int i = 0; i < 50; ++i) CHECK(data::augment(s, rng).mask.shape() == s.mask.shape());
  }

  TEST_CASE("split is a seeded 80/20 partition") {
    const auto samples = data::gen_synthetic(10, 32, 32, 1);
    const auto sp = data::split(samples, 0.8, 3);
    CHECK(sp.train.size() == 8);
    CHECK(sp.val.size() == 2);
    std::set<std::string> ids;
    for (const auto& s : sp.train) ids.insert(s.id);
    for (const auto& s : sp.val) CHECK(ids.insert(s.id).second);
    CHECK(ids.size() == 10);
    const auto again = data::split(samples, 0.8, 3);
    for (std::size_t i = 0; i < 2; ++i) CHECK(again.val[i].id == sp.val[i].id);
    CHECK_THROWS_AS(data::split(samples, 1.0, 3), ConfigError);
    CHECK_THROWS_AS(data::split(data::gen_synthetic(1, 32, 32, 1), 0.8, 3), ConfigError);
  }

  TEST_CASE("shuffled indices are a permutation") {
    auto idx = data::shuffled_indices(100, 9);
    CHECK(idx != data::shuffled_indices(100, 10));
    std::sort(idx.begin(), idx.end());
    for (std::size_t i = 0; i < 100; ++i) CHECK(idx[i] == i);
  }

  TEST_CASE("PNM round trip and channel handling") {
    const auto dir = testing::temp_dir("pnm");
    data::Pnm rgb{3, 2, 3, {}};
    for (std::size_t i = 0; i < 18; ++i) rgb.pixels.push_back(std::uint8_t(i * 14));
    data::write_pnm(dir + "/a.ppm", rgb);
    const auto back = data::read_pnm(dir + "/a.ppm");
    CHECK(back.width == 3);
    CHECK(back.height == 2);
    CHECK(back.channels == 3);
    CHECK(back.pixels == rgb.pixels);
    const auto img = data::load_image(dir + "/a.ppm");
    CHECK(img.shape() == Shape{3, 2, 3});
    CHECK(img.values()[0] == 0.0f);
    CHECK(img.values()[6] == doctest::Approx(14.0 / 255.0));  // channel 1, pixel 0

    data::Pnm gray{2, 1, 1, {200, 100}};
    data::write_pnm(dir + "/m.pgm", gray);
    const auto mask = data::load_mask(dir + "/m.pgm");
    CHECK(mask.values()[0] == 1.0f);
    CHECK(mask.values()[1] == 0.0f);
    const auto g3 = data::load_image(dir + "/m.pgm");
    CHECK(g3.values()[0] == g3.values()[2]);
    CHECK(g3.values()[0] == g3.values()[4]);
    CHECK_THROWS_AS(data::load_mask(dir + "/a.ppm"), IoError);
  }

  TEST_CASE("malformed PNM files are I/O errors") {
    const auto dir = testing::temp_dir("pnm_bad");
    write_bytes(dir + "/p2.pgm", "P2\n2 1\n255\n0 0\n");
    write_bytes(dir + "/max.pgm", std::string("P5\n2 1\n65535\n") + std::string(4, '\0'));
    write_bytes(dir + "/short.pgm", "P5\n4 4\n255\nab");
    write_bytes(dir + "/junk.pgm", "P5\nfoo 1\n255\n");
    for (const char* f : {"p2.pgm", "max.pgm", "short.pgm", "junk.pgm", "absent.pgm"}) {
      INFO(f);
      CHECK_THROWS_AS(data::read_pnm(dir + "/" + f), IoError);
    }
    write_bytes(dir + "/c.pgm", "P5\n# comment\n2 1\n255\nAB");
    CHECK(data::read_pnm(dir + "/c.pgm").pixels == std::vector<std::uint8_t>{'A', 'B'});
  }

  TEST_CASE("image and mask size mismatch is an I/O error") {
    const auto dir = testing::temp_dir("pair");
    data::write_pnm(dir + "/i.pgm", {2, 2, 1, {0, 0, 0, 0}});
    data::write_pnm(dir + "/m.pgm", {3, 2, 1, {0, 0, 0, 0, 0, 0}});
    CHECK_THROWS_AS(data::load_pair(dir + "/i.pgm", dir + "/m.pgm"), IoError);
  }

  TEST_CASE("dataset directory round trip") {
    const auto dir = testing::temp_dir("ds");
    const auto samples = data::gen_synthetic(3, 32, 64, 4);
    data::write_dataset(dir, samples);
    const auto back = data::read_dataset(dir);
    REQUIRE(back.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(back[i].id == samples[i].id);
      CHECK(testing::bit_equal(back[i].mask, samples[i].mask));
      CHECK(testing::max_abs_diff(back[i].image.values(), samples[i].image.values()) <= 0.5 / 255.0 + 1e-6);
    }
    const auto resized = data::read_dataset(dir, data::Size2{32, 32});
    CHECK(resized[0].mask.shape() == Shape{1, 32, 32});
    CHECK_THROWS_AS(data::read_dataset(dir + "/nope"), IoError);
  }

  TEST_CASE("size parsing") {
    const auto s = data::parse_size("96x64");
    CHECK(s.height == 96);
    CHECK(s.width == 64);
    for (const char* bad : {"64", "x64", "64x", "6a4x64", "64x64x1"}) CHECK_THROWS_AS(data::parse_size(bad), ConfigError);
  }

  TEST_CASE("stacking builds batches") {
    const auto samples = data::gen_synthetic(3, 32, 32, 2);
    const auto x = data::stack_images<float>(samples, {2, 0});
    const auto y = data::stack_masks<double>(samples, {1});
    CHECK(x.shape() == Shape{2, 3, 32, 32});
    CHECK(y.shape() == Shape{1, 1, 32, 32});
    CHECK(x.values()[0] == samples[2].image.values()[0]);
  }
}
