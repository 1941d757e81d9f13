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
#include "kmunet/model/model.hpp"

#include "kmunet/error.hpp"
#include "kmunet/numerics/ops.hpp"
#include "kmunet/scan/scan.hpp"

namespace kmunet::model {

std::size_t norm_groups(std::size_t channels) {
  for (std::size_t g = 4; g > 1; --g) {
    if (channels % g == 0) return g;
  }
  return 1;
}

template <typename T>
void ConvBlock<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + "conv.weight", weight);
  out.emplace_back(prefix + "norm.gamma", gamma);
  out.emplace_back(prefix + "norm.beta", beta);
}

template <typename T>
void Resample<T>::collect(const std::string& prefix, ParamList<T>& out) const {
  out.emplace_back(prefix + "weight", weight);
  out.emplace_back(prefix + "bias", bias);
}

template <typename T>
ParamList<T> KmUnet<T>::parameters() const {
  ParamList<T> out;
  stem.collect("stem.", out);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "enc" + std::to_string(i + 1) + ".";
    enc_conv[i].collect(p, out);
    enc_sem[i].collect(p + "sem.", cfg.sem_for(cfg.conv_channels[i]), out);
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string p = "enc" + std::to_string(i + 4) + ".";
    merge[i].collect(p + "merge.", out);
    enc_tok[i].collect(p + "tok.", out);
  }
  bottleneck.collect("bottleneck.", out);
  for (std::size_t i = 0; i < 5; ++i) expand[i].collect("dec" + std::to_string(4 - i) + ".expand.", out);
  dec_tok.collect("dec4.tok.", out);
  for (std::size_t i = 0; i < 3; ++i) {
    const std::string p = "dec" + std::to_string(i + 1) + ".";
    dec_conv[i].collect(p, out);
    dec_sem[i].collect(p + "sem.", cfg.sem_for(cfg.conv_channels[i]), out);
  }
  dec_stem.collect("dec0.", out);
  head.collect("head.", out);
  return out;
}

namespace {

template <typename T>
ConvBlock<T> make_conv_block(std::size_t cin, std::size_t cout, std::size_t stride, Initializer<T>& init) {
  ConvBlock<T> b;
  b.weight = init.he_uniform({cout, cin, 3, 3}, cin * 9);
  b.gamma = init.constant({cout}, 1.0);
  b.beta = init.constant({cout}, 0.0);
  b.stride = stride;
  return b;
}

template <typename T>
Resample<T> make_resample(std::size_t cin, std::size_t cout, std::size_t k, Initializer<T>& init) {
  Resample<T> r;
  r.weight = init.he_uniform({cout, cin, k, k}, cin * k * k);
  r.bias = init.constant({cout}, 0.0);
  return r;
}

}  // namespace

template <typename T>
KmUnet<T> build(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Initializer<T> init(seed);
  const auto& c = cfg.conv_channels;
  const auto& d = cfg.token_dims;
  const kan::TokBlockOptions tok = cfg.tok_options();
  KmUnet<T> m;
  m.cfg = cfg;
  m.stem = make_conv_block(cfg.in_channels, c[0], 1, init);
  for (std::size_t i = 0; i < 3; ++i) {
    m.enc_conv[i] = make_conv_block(i == 0 ? c[0] : c[i - 1], c[i], 2, init);
    m.enc_sem[i] = sem::init_params(cfg.sem_for(c[i]), init);
  }
  m.merge[0] = make_resample(c[2], d[0], 3, init);
  m.enc_tok[0] = kan::init_tok_block(d[0], tok, init);
  m.merge[1] = make_resample(d[0], d[1], 3, init);
  m.enc_tok[1] = kan::init_tok_block(d[1], tok, init);
  m.bottleneck = kan::init_tok_block(d[1], tok, init);
  m.expand[0] = make_resample(d[1], d[0], 1, init);
  m.expand[1] = make_resample(d[0], c[2], 1, init);
  m.expand[2] = make_resample(c[2], c[1], 1, init);
  m.expand[3] = make_resample(c[1], c[0], 1, init);
  m.expand[4] = make_resample(c[0], c[0], 1, init);
  m.dec_tok = kan::init_tok_block(d[0], tok, init);
  for (std::size_t i = 0; i < 3; ++i) {
    m.dec_conv[i] = make_conv_block(c[i], c[i], 1, init);
    m.dec_sem[i] = sem::init_params(cfg.sem_for(c[i]), init);
  }
  m.dec_stem = make_conv_block(c[0], c[0], 1, init);
  m.head = make_resample(c[0], cfg.out_channels, 1, init);
  return m;
}

template <typename T>
Tensor<T> conv_block(const Tensor<T>& x, const ConvBlock<T>& b) {
  const Tensor<T> y = conv2d(x, b.weight, Tensor<T>{}, {b.stride, 1, 1});
  return silu(group_norm(y, norm_groups(y.dim(1)), b.gamma, b.beta));
}

template <typename T>
Tensor<T> patch_merge(const Tensor<T>& x, const Resample<T>& r) {
  if (x.rank() != 4 || x.dim(2) % 2 != 0 || x.dim(3) % 2 != 0) {
    throw DimensionError("patch merge: needs an even-sized [B,C,H,W] map, got " + shape_string(x.shape()));
  }
  return conv2d(x, r.weight, r.bias, {2, 1, 1});
}

template <typename T>
Tensor<T> patch_expand(const Tensor<T>& x, const Resample<T>& r) {
  return conv2d(upsample_nearest2x(x), r.weight, r.bias);
}

template <typename T>
Tensor<T> token_stage(const Tensor<T>& x, const kan::TokBlock<T>& block) {
  const std::size_t h = x.dim(2), w = x.dim(3);
  const Tensor<T> z = kan::tok_block_forward(scan::unfold(x, scan::ScanDirection::tl_br), block, h, w);
  return scan::fold(z, scan::ScanDirection::tl_br, h, w);
}

template <typename T>
Tensor<T> forward(const KmUnet<T>& m, const Tensor<T>& x, ForwardTrace<T>* trace) {
  const ModelConfig& cfg = m.cfg;
  if (x.rank() != 4 || x.dim(1) != cfg.in_channels) {
    throw DimensionError("model: expected input [B," + std::to_string(cfg.in_channels) + ",H,W], got " +
                         shape_string(x.shape()));
  }
  if (x.dim(2) % ModelConfig::kDivisor != 0 || x.dim(3) % ModelConfig::kDivisor != 0) {
    throw DimensionError("model: input " + std::to_string(x.dim(2)) + "x" + std::to_string(x.dim(3)) +
                         ": dimensions must be divisible by 32");
  }
  std::array<Tensor<T>, 5> skip;
  const Tensor<T> s0 = conv_block(x, m.stem);
  Tensor<T> h = s0;
  for (std::size_t i = 0; i < 3; ++i) {
    h = sem::sem_forward(conv_block(h, m.enc_conv[i]), cfg.sem_for(cfg.conv_channels[i]), m.enc_sem[i]);
    skip[i] = h;
  }
  for (std::size_t i = 0; i < 2; ++i) {
    h = token_stage(patch_merge(h, m.merge[i]), m.enc_tok[i]);
    skip[3 + i] = h;
  }
  h = token_stage(h, m.bottleneck);
  if (trace != nullptr) {
    trace->encoder.assign(skip.begin(), skip.end());
    trace->bottleneck = h;
  }

  h = token_stage(add(patch_expand(h, m.expand[0]), skip[3]), m.dec_tok);
  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t i = 2 - k;
    h = add(patch_expand(h, m.expand[1 + k]), skip[i]);
    h = sem::sem_forward(conv_block(h, m.dec_conv[i]), cfg.sem_for(cfg.conv_channels[i]), m.dec_sem[i]);
  }
  h = conv_block(add(patch_expand(h, m.expand[4]), s0), m.dec_stem);
  return conv2d(h, m.head.weight, m.head.bias);
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const auto& c = cfg.conv_channels;
  const auto& d = cfg.token_dims;
  const auto conv_block_count = [](std::size_t cin, std::size_t cout) { return cout * cin * 9 + 2 * cout; };
  const auto resample_count = [](std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k * k + cout; };
  const auto sem_count = [&](std::size_t ch) { return sem::SemParams<float>::parameter_count(cfg.sem_for(ch)); };
  const auto tok_count = [&](std::size_t dim) { return kan::TokBlock<float>::parameter_count(dim, cfg.tok_options()); };

  std::size_t n = conv_block_count(cfg.in_channels, c[0]);
  for (std::size_t i = 0; i < 3; ++i) {
    n += conv_block_count(i == 0 ? c[0] : c[i - 1], c[i]) + sem_count(c[i]);
    n += conv_block_count(c[i], c[i]) + sem_count(c[i]);
  }
  n += resample_count(c[2], d[0], 3) + resample_count(d[0], d[1], 3);
  n += 2 * tok_count(d[0]) + 2 * tok_count(d[1]);
  n += resample_count(d[1], d[0], 1) + resample_count(d[0], c[2], 1) + resample_count(c[2], c[1], 1) +
       resample_count(c[1], c[0], 1) + resample_count(c[0], c[0], 1);
  n += conv_block_count(c[0], c[0]) + resample_count(c[0], cfg.out_channels, 1);
  return n;
}

std::uint64_t estimate_macs(const ModelConfig& cfg, std::size_t height, std::size_t width) {
  cfg.validate();
  if (height % ModelConfig::kDivisor != 0 || width % ModelConfig::kDivisor != 0) {
    throw DimensionError("mac estimate: dimensions must be divisible by 32");
  }
  using u64 = std::uint64_t;
  const auto& c = cfg.conv_channels;
  const auto& d = cfg.token_dims;
  const auto conv = [](u64 cin, u64 cout, u64 k, u64 pixels) { return cout * cin * k * k * pixels; };
  const auto sem_macs = [&](u64 ch, u64 pixels) {
    const u64 n = cfg.n_state;
    const u64 per_dir = pixels * (ch * ch + 2 * n * ch + 3 * ch * n + ch);
    const u64 g = cfg.sem_attention_groups, cg = ch / g;
    return per_dir * cfg.sem_directions.size() + g * pixels * cg * cg * 10 + pixels * ch;
  };
  const auto tok_macs = [&](u64 dim, u64 tokens) {
    const u64 nb = cfg.kan_grid + cfg.kan_order;
    const u64 mix = cfg.token_mixer == kan::TokenMixer::kan ? cfg.kan_depth * tokens * dim * dim * (nb + 1)
                                                            : 2 * tokens * dim * dim;
    return mix + tokens * dim * 9;
  };
  const u64 px = static_cast<u64>(height) * width;
  const auto at = [&](int level) { return px >> (2 * level); };

  u64 macs = conv(cfg.in_channels, c[0], 3, at(0));
  for (int i = 0; i < 3; ++i) {
    macs += conv(i == 0 ? c[0] : c[i - 1], c[i], 3, at(i + 1)) + sem_macs(c[i], at(i + 1));
    macs += conv(c[i], c[i], 3, at(i + 1)) + sem_macs(c[i], at(i + 1));
  }
  macs += conv(c[2], d[0], 3, at(4)) + conv(d[0], d[1], 3, at(5));
  macs += 2 * tok_macs(d[0], at(4)) + 2 * tok_macs(d[1], at(5));
  macs += conv(d[1], d[0], 1, at(4)) + conv(d[0], c[2], 1, at(3)) + conv(c[2], c[1], 1, at(2)) +
          conv(c[1], c[0], 1, at(1)) + conv(c[0], c[0], 1, at(0));
  macs += conv(c[0], c[0], 3, at(0)) + conv(c[0], cfg.out_channels, 1, at(0));
  return macs;
}

template <typename To, typename From>
KmUnet<To> convert(const KmUnet<From>& m) {
  KmUnet<To> out = build<To>(m.cfg, 0);
  const ParamList<From> src = m.parameters();
  ParamList<To> dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto values = src[i].second.values();
    auto target = dst[i].second.mutable_values();
    for (std::size_t j = 0; j < values.size(); ++j) target[j] = static_cast<To>(values[j]);
  }
  return out;
}

#define KMUNET_INSTANTIATE_MODEL(T)                                                        \
  template struct ConvBlock<T>;                                                            \
  template struct Resample<T>;                                                             \
  template struct KmUnet<T>;                                                               \
  template KmUnet<T> build<T>(const ModelConfig&, std::uint64_t);                          \
  template Tensor<T> forward(const KmUnet<T>&, const Tensor<T>&, ForwardTrace<T>*);        \
  template Tensor<T> conv_block(const Tensor<T>&, const ConvBlock<T>&);                    \
  template Tensor<T> patch_merge(const Tensor<T>&, const Resample<T>&);                    \
  template Tensor<T> patch_expand(const Tensor<T>&, const Resample<T>&);                   \
  template Tensor<T> token_stage(const Tensor<T>&, const kan::TokBlock<T>&);

KMUNET_INSTANTIATE_MODEL(float)
KMUNET_INSTANTIATE_MODEL(double)

template KmUnet<double> convert<double, float>(const KmUnet<float>&);
template KmUnet<float> convert<float, double>(const KmUnet<double>&);
template KmUnet<float> convert<float, float>(const KmUnet<float>&);
template KmUnet<double> convert<double, double>(const KmUnet<double>&);

}  // namespace kmunet::model
