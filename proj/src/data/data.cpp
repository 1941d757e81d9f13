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
#include "kmunet/data/data.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "kmunet/error.hpp"

namespace kmunet::data {

namespace fs = std::filesystem;

void require_binary(std::span<const float> mask, const char* what) {
  for (float v : mask) {
    if (v != 0.0f && v != 1.0f) throw ContractError(std::string(what) + ": mask values must be 0 or 1");
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

void validate_dims(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || height % 32 != 0 || width % 32 != 0) {
    throw ConfigError("size " + std::to_string(height) + "x" + std::to_string(width) +
                      ": dimensions must be divisible by 32");
  }
}

// Fills `mask` with 1 to 3 ellipses or star-shaped polygons.
void draw_shapes(std::mt19937_64& rng, std::size_t height, std::size_t width, std::vector<float>& mask) {
  std::fill(mask.begin(), mask.end(), 0.0f);
  const double m = static_cast<double>(std::min(height, width));
  const std::size_t count = 1 + pick(rng, 3);
  for (std::size_t s = 0; s < count; ++s) {
    const double cy = uniform(rng, 0.15, 0.85) * static_cast<double>(height);
    const double cx = uniform(rng, 0.15, 0.85) * static_cast<double>(width);
    if (rng() & 1u) {
      const double a = uniform(rng, 0.08, 0.3) * m, b = uniform(rng, 0.08, 0.3) * m;
      const double theta = uniform(rng, 0.0, std::numbers::pi);
      const double c = std::cos(theta), sn = std::sin(theta);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
          const double u = (c * dx + sn * dy) / a, v = (-sn * dx + c * dy) / b;
          if (u * u + v * v <= 1.0) mask[y * width + x] = 1.0f;
        }
      }
    } else {
      const std::size_t verts = 3 + pick(rng, 5);
      const double radius = uniform(rng, 0.1, 0.3) * m;
      const double phase = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      std::vector<double> px(verts), py(verts);
      for (std::size_t k = 0; k < verts; ++k) {
        const double ang = phase + 2.0 * std::numbers::pi * (static_cast<double>(k) + uniform(rng, -0.3, 0.3)) /
                                       static_cast<double>(verts);
        const double r = radius * uniform(rng, 0.6, 1.0);
        px[k] = cx + r * std::cos(ang);
        py[k] = cy + r * std::sin(ang);
      }
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double qx = static_cast<double>(x) + 0.5, qy = static_cast<double>(y) + 0.5;
          bool inside = false;
          for (std::size_t i = 0, j = verts - 1; i < verts; j = i++) {
            if ((py[i] > qy) != (py[j] > qy) && qx < (px[j] - px[i]) * (qy - py[i]) / (py[j] - py[i]) + px[i]) {
              inside = !inside;
            }
          }
          if (inside) mask[y * width + x] = 1.0f;
        }
      }
    }
  }
}

}  // namespace

Sample generate_sample(std::size_t index, std::size_t height, std::size_t width, std::uint64_t seed) {
  validate_dims(height, width);
  std::mt19937_64 rng(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index) + 1)));
  const std::size_t pixels = height * width;
  std::vector<float> mask(pixels);
  for (int attempt = 0;; ++attempt) {
    if (attempt == 10000) throw NumericError("synthetic generator: no admissible mask after 10000 attempts");
    draw_shapes(rng, height, width, mask);
    const auto fg = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1.0f));
    const double frac = static_cast<double>(fg) / static_cast<double>(pixels);
    if (fg > 0 && fg < pixels && frac >= kMinForeground && frac <= kMaxForeground) break;
  }

  std::vector<float> image(3 * pixels);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t c = 0; c < 3; ++c) {
    const double bg = uniform(rng, 0.15, 0.85);
    const double delta = uniform(rng, 0.3, 0.5);
    const double fg = bg >= 0.5 ? bg - delta : bg + delta;
    for (std::size_t i = 0; i < pixels; ++i) {
      const double v = (mask[i] != 0.0f ? fg : bg) + noise(rng);
      image[c * pixels + i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  char id[32];
  std::snprintf(id, sizeof(id), "syn%05zu", index);
  return {id, Tensor<float>({3, height, width}, std::move(image)), Tensor<float>({1, height, width}, std::move(mask))};
}

std::vector<Sample> gen_synthetic(std::size_t n, std::size_t height, std::size_t width, std::uint64_t seed) {
  if (n == 0) throw ConfigError("gen_synthetic: n must be positive");
  validate_dims(height, width);
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(generate_sample(i, height, width, seed));
  return out;
}

std::vector<Augmentation> allowed_augmentations(std::size_t height, std::size_t width) {
  if (height == width) {
    return {Augmentation::identity, Augmentation::hflip,  Augmentation::vflip,
            Augmentation::rot90,    Augmentation::rot180, Augmentation::rot270};
  }
  return {Augmentation::identity, Augmentation::hflip, Augmentation::vflip, Augmentation::rot180};
}

namespace {

// Output pixel (y, x) of an h x w result reads source pixel map(y, x).
Tensor<float> remap(const Tensor<float>& t, Augmentation a) {
  const std::size_t c = t.dim(0), h = t.dim(1), w = t.dim(2);
  const bool swap = a == Augmentation::rot90 || a == Augmentation::rot270;
  const std::size_t oh = swap ? w : h, ow = swap ? h : w;
  std::vector<float> out(t.numel());
  auto in = t.values();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t sy = y, sx = x;
        switch (a) {
          case Augmentation::identity: break;
          case Augmentation::hflip: sx = w - 1 - x; break;
          case Augmentation::vflip: sy = h - 1 - y; break;
          case Augmentation::rot180: sy = h - 1 - y; sx = w - 1 - x; break;
          case Augmentation::rot90: sy = x; sx = w - 1 - y; break;  // counter-clockwise
          case Augmentation::rot270: sy = h - 1 - x; sx = y; break;
        }
        out[(ch * oh + y) * ow + x] = in[(ch * h + sy) * w + sx];
      }
    }
  }
  return Tensor<float>({c, oh, ow}, std::move(out));
}

}  // namespace

Sample apply_augmentation(const Sample& s, Augmentation a) {
  if ((a == Augmentation::rot90 || a == Augmentation::rot270) && s.height() != s.width()) {
    throw ContractError("augment: 90/270 degree rotation needs a square sample");
  }
  return {s.id, remap(s.image, a), remap(s.mask, a)};
}

Sample augment(const Sample& s, std::mt19937_64& rng) {
  const auto options = allowed_augmentations(s.height(), s.width());
  return apply_augmentation(s, options[pick(rng, options.size())]);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[pick(rng, i)]);
  return idx;
}

Split split(const std::vector<Sample>& samples, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie strictly between 0 and 1");
  const std::size_t n = samples.size();
  const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train >= n) {
    throw ConfigError("split of " + std::to_string(n) + " samples at ratio " + std::to_string(ratio) +
                      " leaves one side empty");
  }
  const auto idx = shuffled_indices(n, seed);
  Split out;
  for (std::size_t i = 0; i < n; ++i) (i < n_train ? out.train : out.val).push_back(samples[idx[i]]);
  return out;
}

namespace {

// Next header token, skipping whitespace and '#' comments.
std::string header_token(std::istream& in, const std::string& path) {
  std::string tok;
  int ch;
  while ((ch = in.get()) != EOF) {
    if (ch == '#') {
      while ((ch = in.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  if (tok.empty()) throw IoError(path + ": truncated PNM header");
  return tok;
}

std::size_t header_number(std::istream& in, const std::string& path) {
  const std::string tok = header_token(in, path);
  std::size_t v = 0;
  for (char c : tok) {
    if (c < '0' || c > '9' || v > 1000000) throw IoError(path + ": malformed PNM header field '" + tok + "'");
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  return v;
}

std::vector<std::size_t> nearest_index(std::size_t src, std::size_t dst) {
  std::vector<std::size_t> idx(dst);
  for (std::size_t i = 0; i < dst; ++i) idx[i] = i * src / dst;
  return idx;
}

Pnm resized(const Pnm& img, std::optional<Size2> size) {
  if (!size || (size->height == img.height && size->width == img.width)) return img;
  if (size->height == 0 || size->width == 0) throw ConfigError("resize target must be positive");
  Pnm out{size->width, size->height, img.channels, std::vector<std::uint8_t>(size->width * size->height * img.channels)};
  const auto ys = nearest_index(img.height, size->height), xs = nearest_index(img.width, size->width);
  for (std::size_t y = 0; y < out.height; ++y) {
    for (std::size_t x = 0; x < out.width; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        out.pixels[(y * out.width + x) * img.channels + c] = img.pixels[(ys[y] * img.width + xs[x]) * img.channels + c];
      }
    }
  }
  return out;
}

std::uint8_t to_byte(float v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0));
}

}  // namespace

Pnm read_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open");
  const std::string magic = header_token(in, path);
  if (magic != "P5" && magic != "P6") throw IoError(path + ": unsupported PNM type '" + magic + "' (need P5 or P6)");
  Pnm img;
  img.channels = magic == "P6" ? 3 : 1;
  img.width = header_number(in, path);
  img.height = header_number(in, path);
  const std::size_t maxval = header_number(in, path);
  if (img.width == 0 || img.height == 0) throw IoError(path + ": zero image dimension");
  if (maxval != 255) throw IoError(path + ": only 8-bit PNM (maxval 255) is supported");
  img.pixels.resize(img.width * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (static_cast<std::size_t>(in.gcount()) != img.pixels.size()) throw IoError(path + ": truncated pixel data");
  return img;
}

void write_pnm(const std::string& path, const Pnm& img) {
  if (img.channels != 1 && img.channels != 3) throw ContractError("write_pnm: channels must be 1 or 3");
  if (img.pixels.size() != img.width * img.height * img.channels) throw ContractError("write_pnm: pixel count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << (img.channels == 3 ? "P6" : "P5") << "\n" << img.width << " " << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}

Tensor<float> load_image(const std::string& path, std::optional<Size2> resize) {
  const Pnm img = resized(read_pnm(path), resize);
  const std::size_t pixels = img.width * img.height;
  std::vector<float> values(3 * pixels);
  for (std::size_t c = 0; c < 3; ++c) {
    const std::size_t src = img.channels == 3 ? c : 0;
    for (std::size_t i = 0; i < pixels; ++i) values[c * pixels + i] = static_cast<float>(img.pixels[i * img.channels + src]) / 255.0f;
  }
  return Tensor<float>({3, img.height, img.width}, std::move(values));
}

Tensor<float> load_mask(const std::string& path, std::optional<Size2> resize) {
  const Pnm img = resized(read_pnm(path), resize);
  if (img.channels != 1) throw IoError(path + ": masks must be P5 grayscale");
  std::vector<float> values(img.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = img.pixels[i] >= 128 ? 1.0f : 0.0f;
  return Tensor<float>({1, img.height, img.width}, std::move(values));
}

Sample load_pair(const std::string& image_path, const std::string& mask_path, std::optional<Size2> resize) {
  if (!resize) {
    Tensor<float> image = load_image(image_path);
    Tensor<float> mask = load_mask(mask_path);
    if (image.dim(1) != mask.dim(1) || image.dim(2) != mask.dim(2)) {
      throw IoError(image_path + " is " + std::to_string(image.dim(1)) + "x" + std::to_string(image.dim(2)) + " but " +
                    mask_path + " is " + std::to_string(mask.dim(1)) + "x" + std::to_string(mask.dim(2)));
    }
    return {fs::path(image_path).stem().string(), image, mask};
  }
  const Pnm a = read_pnm(image_path), b = read_pnm(mask_path);
  if (a.width != b.width || a.height != b.height) {
    throw IoError(image_path + " and " + mask_path + " differ in size");
  }
  return {fs::path(image_path).stem().string(), load_image(image_path, resize), load_mask(mask_path, resize)};
}

void save_mask(const Tensor<float>& mask, const std::string& path) {
  if (mask.rank() != 3 || mask.dim(0) != 1) throw DimensionError("save_mask: expected [1,H,W], got " + shape_string(mask.shape()));
  require_binary(mask.values(), "save_mask");
  Pnm img{mask.dim(2), mask.dim(1), 1, {}};
  for (float v : mask.values()) img.pixels.push_back(v != 0.0f ? 255 : 0);
  write_pnm(path, img);
}

void save_image(const Tensor<float>& image, const std::string& path) {
  if (image.rank() != 3 || image.dim(0) != 3) throw DimensionError("save_image: expected [3,H,W], got " + shape_string(image.shape()));
  const std::size_t h = image.dim(1), w = image.dim(2), pixels = h * w;
  Pnm img{w, h, 3, std::vector<std::uint8_t>(3 * pixels)};
  auto v = image.values();
  for (std::size_t i = 0; i < pixels; ++i) {
    for (std::size_t c = 0; c < 3; ++c) img.pixels[i * 3 + c] = to_byte(v[c * pixels + i]);
  }
  write_pnm(path, img);
}

void save_gray(std::span<const float> values, std::size_t height, std::size_t width, const std::string& path) {
  if (values.size() != height * width) throw DimensionError("save_gray: value count does not match size");
  Pnm img{width, height, 1, std::vector<std::uint8_t>(values.size())};
  for (std::size_t i = 0; i < values.size(); ++i) img.pixels[i] = to_byte(values[i]);
  write_pnm(path, img);
}

void write_dataset(const std::string& dir, const std::vector<Sample>& samples) {
  std::error_code ec;
  fs::create_directories(fs::path(dir) / "images", ec);
  if (!ec) fs::create_directories(fs::path(dir) / "masks", ec);
  if (ec) throw IoError(dir + ": cannot create dataset directories (" + ec.message() + ")");
  std::string index;
  for (const auto& s : samples) {
    save_image(s.image, (fs::path(dir) / "images" / (s.id + ".ppm")).string());
    save_mask(s.mask, (fs::path(dir) / "masks" / (s.id + ".pgm")).string());
    index += s.id + "\n";
  }
  const std::string index_path = (fs::path(dir) / "index.txt").string();
  std::ofstream out(index_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(index_path + ": cannot open for writing");
  out << index;
  if (!out) throw IoError(index_path + ": write failed");
}

std::vector<Sample> read_dataset(const std::string& dir, std::optional<Size2> resize) {
  const std::string index_path = (fs::path(dir) / "index.txt").string();
  std::ifstream in(index_path);
  if (!in) throw IoError(index_path + ": cannot open dataset index");
  std::vector<Sample> out;
  std::string id;
  while (std::getline(in, id)) {
    while (!id.empty() && (id.back() == '\r' || id.back() == ' ')) id.pop_back();
    if (id.empty()) continue;
    Sample s = load_pair((fs::path(dir) / "images" / (id + ".ppm")).string(),
                         (fs::path(dir) / "masks" / (id + ".pgm")).string(), resize);
    s.id = id;
    out.push_back(std::move(s));
  }
  if (out.empty()) throw ConfigError(dir + ": dataset is empty");
  return out;
}

Size2 parse_size(const std::string& text) {
  const auto x = text.find('x');
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    const std::string hs = text.substr(0, x), ws = text.substr(x + 1);
    const unsigned long h = std::stoul(hs, &used);
    if (used != hs.size()) throw std::invalid_argument(text);
    const unsigned long w = std::stoul(ws, &used);
    if (used != ws.size()) throw std::invalid_argument(text);
    return {h, w};
  } catch (const std::logic_error&) {
    throw ConfigError("size '" + text + "' is not of the form HxW");
  }
}

template <typename T>
Tensor<T> stack_images(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("stack_images: empty batch");
  const Shape one = samples.at(indices[0]).image.shape();
  std::vector<T> values;
  values.reserve(indices.size() * shape_numel(one));
  for (std::size_t i : indices) {
    const auto& img = samples.at(i).image;
    if (img.shape() != one) throw DimensionError("stack_images: samples differ in shape");
    for (float v : img.values()) values.push_back(static_cast<T>(v));
  }
  return Tensor<T>({indices.size(), one[0], one[1], one[2]}, std::move(values));
}

template <typename T>
Tensor<T> stack_masks(const std::vector<Sample>& samples, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw ContractError("stack_masks: empty batch");
  const Shape one = samples.at(indices[0]).mask.shape();
  std::vector<T> values;
  values.reserve(indices.size() * shape_numel(one));
  for (std::size_t i : indices) {
    const auto& m = samples.at(i).mask;
    if (m.shape() != one) throw DimensionError("stack_masks: samples differ in shape");
    for (float v : m.values()) values.push_back(static_cast<T>(v));
  }
  return Tensor<T>({indices.size(), one[0], one[1], one[2]}, std::move(values));
}

template Tensor<float> stack_images(const std::vector<Sample>&, const std::vector<std::size_t>&);
template Tensor<double> stack_images(const std::vector<Sample>&, const std::vector<std::size_t>&);
template Tensor<float> stack_masks(const std::vector<Sample>&, const std::vector<std::size_t>&);
template Tensor<double> stack_masks(const std::vector<Sample>&, const std::vector<std::size_t>&);

}  // namespace kmunet::data
