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
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kmunet/numerics/tensor.hpp"

namespace kmunet::data {

struct Sample {
  std::string id;
  Tensor<float> image;  // [3, H, W], values in [0, 1]
  Tensor<float> mask;   // [1, H, W], values in {0, 1}

  std::size_t height() const { return mask.dim(1); }
  std::size_t width() const { return mask.dim(2); }
};

// Throws ContractError unless every value is exactly 0 or 1.
void require_binary(std::span<const float> mask, const char* what);

std::uint64_t splitmix64(std::uint64_t x);

// Each sample draws from its own generator seeded by splitmix64 of (seed,
// index), so sample i does not depend on n.
Sample generate_sample(std::size_t index, std::size_t height, std::size_t width, std::uint64_t seed);
std::vector<Sample> gen_synthetic(std::size_t n, std::size_t height, std::size_t width, std::uint64_t seed);

inline constexpr double kMinForeground = 0.02;
inline constexpr double kMaxForeground = 0.60;

enum class Augmentation { identity, hflip, vflip, rot90, rot180, rot270 };

// Right-angle rotations by 90/270 only for square samples.
std::vector<Augmentation> allowed_augmentations(std::size_t height, std::size_t width);
Sample apply_augmentation(const Sample& s, Augmentation a);
Sample augment(const Sample& s, std::mt19937_64& rng);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// Fisher-Yates shuffle of indices, first lround(ratio * n) go to train.
std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed);
Split split(const std::vector<Sample>& samples, double ratio, std::uint64_t seed);

// 8-bit binary PNM (P5 gray, P6 RGB) with maxval 255.
struct Pnm {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> pixels;  // interleaved, row-major
};

Pnm read_pnm(const std::string& path);
void write_pnm(const std::string& path, const Pnm& img);

struct Size2 {
  std::size_t height;
  std::size_t width;
};

// Gray images are replicated to three channels; mask pixels >= 128 become 1.
Tensor<float> load_image(const std::string& path, std::optional<Size2> resize = std::nullopt);
Tensor<float> load_mask(const std::string& path, std::optional<Size2> resize = std::nullopt);
Sample load_pair(const std::string& image_path, const std::string& mask_path,
                 std::optional<Size2> resize = std::nullopt);
void save_mask(const Tensor<float>& mask, const std::string& path);
void save_image(const Tensor<float>& image, const std::string& path);
// Writes a [H, W] map with values in [0, 1] as an 8-bit P5 image.
void save_gray(std::span<const float> values, std::size_t height, std::size_t width, const std::string& path);

// images/<id>.ppm, masks/<id>.pgm and index.txt with one id per line.
void write_dataset(const std::string& dir, const std::vector<Sample>& samples);
std::vector<Sample> read_dataset(const std::string& dir, std::optional<Size2> resize = std::nullopt);

// Parses "HxW".
Size2 parse_size(const std::string& text);

template <typename T>
Tensor<T> stack_images(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);
template <typename T>
Tensor<T> stack_masks(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices);

}  // namespace kmunet::data
