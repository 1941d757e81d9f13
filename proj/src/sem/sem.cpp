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
#include "kmunet/sem/sem.hpp"

#include <cmath>

#include "kmunet/numerics/ops.hpp"

namespace kmunet::sem {

void SemConfig::validate() const {
  if (directions.empty()) throw ConfigError("sem: at least one scan direction is required");
  if (channels == 0 || n_state == 0) throw ConfigError("sem: channels and n_state must be positive");
  if (attention_groups == 0 || channels % attention_groups != 0) {
    throw ConfigError("sem: " + std::to_string(channels) + " channels are not divisible by attention_groups=" +
                      std::to_string(attention_groups));
  }
}

template <typename T>
void SemParams<T>::collect(const std::string& prefix, const SemConfig& cfg, ParamList<T>& out) const {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    branches[i].collect(prefix + "s6." + std::string(scan::direction_name(cfg.directions[i])) + ".", out);
  }
  out.emplace_back(prefix + "attn.w1", w1);
  out.emplace_back(prefix + "attn.b1", b1);
  out.emplace_back(prefix + "attn.w3", w3);
  out.emplace_back(prefix + "attn.b3", b3);
}

template <typename T>
std::size_t SemParams<T>::parameter_count(const SemConfig& cfg) {
  const std::size_t cg = cfg.channels / cfg.attention_groups;
  return cfg.directions.size() * s6::S6Params<T>::parameter_count(cfg.channels, cfg.n_state) + cg * cg + cg +
         cg * cg * 9 + cg;
}

template <typename T>
SemParams<T> init_params(const SemConfig& cfg, Initializer<T>& init) {
  cfg.validate();
  SemParams<T> p;
  for (std::size_t i = 0; i < cfg.directions.size(); ++i) p.branches.push_back(s6::init_params(cfg.channels, cfg.n_state, init));
  const std::size_t cg = cfg.channels / cfg.attention_groups;
  p.w1 = init.he_uniform({cg, cg, 1, 1}, cg);
  p.b1 = init.constant({cg}, 0.0);
  p.w3 = init.he_uniform({cg, cg, 3, 3}, cg * 9);
  p.b3 = init.constant({cg}, 0.0);
  return p;
}

template <typename T>
Tensor<T> sem_extract(const Tensor<T>& x, const SemConfig& cfg, const SemParams<T>& params) {
  if (x.rank() != 4 || x.dim(1) != cfg.channels) {
    throw DimensionError("sem: expected [B," + std::to_string(cfg.channels) + ",H,W], got " + shape_string(x.shape()));
  }
  if (params.branches.size() != cfg.directions.size()) {
    throw ConfigError("sem: " + std::to_string(params.branches.size()) + " S6 branches for " +
                      std::to_string(cfg.directions.size()) + " directions");
  }
  const std::size_t h = x.dim(2), w = x.dim(3);
  std::vector<Tensor<T>> merged;
  merged.reserve(cfg.directions.size());
  for (std::size_t i = 0; i < cfg.directions.size(); ++i) {
    const scan::ScanDirection dir = cfg.directions[i];
    Tensor<T> seq = scan::unfold(x, dir);
    merged.push_back(scan::fold(s6::selective_scan(seq, params.branches[i]), dir, h, w));
  }
  return scan::rmerge(merged);
}

template <typename T>
Tensor<T> multiscale_attention(const Tensor<T>& x, const SemConfig& cfg, const SemParams<T>& params) {
  if (x.rank() != 4) throw DimensionError("attention: expected [B,C,H,W], got " + shape_string(x.shape()));
  const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (cfg.attention_groups == 0 || c % cfg.attention_groups != 0) {
    throw ConfigError("attention: " + std::to_string(c) + " channels are not divisible by attention_groups=" +
                      std::to_string(cfg.attention_groups));
  }
  const std::size_t g = cfg.attention_groups;
  Tensor<T> grouped = reshape(x, {b * g, c / g, h, w});
  Tensor<T> cross = add(conv2d(grouped, params.w1, params.b1), conv2d(grouped, params.w3, params.b3, {1, 1, 1}));
  return reshape(mul(sigmoid(cross), grouped), {b, c, h, w});
}

template <typename T>
Tensor<T> sem_forward(const Tensor<T>& x, const SemConfig& cfg, const SemParams<T>& params) {
  return multiscale_attention(sem_extract(x, cfg, params), cfg, params);
}

#define KMUNET_INSTANTIATE_SEM(T)                                                                        \
  template struct SemParams<T>;                                                                         \
  template SemParams<T> init_params(const SemConfig&, Initializer<T>&);                                 \
  template Tensor<T> sem_extract(const Tensor<T>&, const SemConfig&, const SemParams<T>&);              \
  template Tensor<T> multiscale_attention(const Tensor<T>&, const SemConfig&, const SemParams<T>&);     \
  template Tensor<T> sem_forward(const Tensor<T>&, const SemConfig&, const SemParams<T>&);

KMUNET_INSTANTIATE_SEM(float)
KMUNET_INSTANTIATE_SEM(double)

}  // namespace kmunet::sem
