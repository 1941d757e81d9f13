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
#include "kmunet/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kmunet/error.hpp"
#include "kmunet/numerics/ops.hpp"

namespace kmunet::train {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (!(lr_min >= 0.0) || !(lr_min <= lr_max)) throw ConfigError("train: need 0 <= lr_min <= lr_max");
  if (bce_weight < 0.0 || dice_weight < 0.0) throw ConfigError("train: loss weights must be non-negative");
}

bool TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "train.batch_size") {
    batch_size = parse_count(key, value);
  } else if (key == "train.lr_max") {
    lr_max = parse_real(key, value);
  } else if (key == "train.lr_min") {
    lr_min = parse_real(key, value);
  } else if (key == "train.epochs") {
    epochs = parse_count(key, value);
  } else if (key == "train.seed") {
    seed = parse_seed(key, value);
  } else if (key == "train.bce_weight") {
    bce_weight = parse_real(key, value);
  } else if (key == "train.dice_weight") {
    dice_weight = parse_real(key, value);
  } else if (key == "train.augment") {
    if (value == "true" || value == "1") {
      augment = true;
    } else if (value == "false" || value == "0") {
      augment = false;
    } else {
      throw ConfigError("config key 'train.augment': expected true or false");
    }
  } else {
    return false;
  }
  return true;
}

std::vector<KeyValue> TrainConfig::entries() const {
  return {
      {"train.batch_size", std::to_string(batch_size)},
      {"train.lr_max", format_real(lr_max)},
      {"train.lr_min", format_real(lr_min)},
      {"train.epochs", std::to_string(epochs)},
      {"train.seed", std::to_string(seed)},
      {"train.bce_weight", format_real(bce_weight)},
      {"train.dice_weight", format_real(dice_weight)},
      {"train.augment", augment ? "true" : "false"},
  };
}

template <typename T>
Tensor<T> bce_dice_loss(const Tensor<T>& logits, const Tensor<T>& target, double bce_weight, double dice_weight,
                        LossParts* parts) {
  if (logits.shape() != target.shape()) {
    throw DimensionError("bce_dice_loss: logits " + shape_string(logits.shape()) + " vs target " +
                         shape_string(target.shape()));
  }
  auto z = logits.values();
  auto g = target.values();
  for (T v : g) {
    if (v != T{0} && v != T{1}) throw ContractError("bce_dice_loss: target values must be 0 or 1");
  }
  const std::size_t n = z.size();
  auto prob = std::make_shared<std::vector<double>>(n);
  double bce = 0.0, inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double zi = static_cast<double>(z[i]), gi = static_cast<double>(g[i]);
    bce += std::max(zi, 0.0) - zi * gi + std::log1p(std::exp(-std::abs(zi)));
    const double p = zi >= 0.0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
    (*prob)[i] = p;
    inter += p * gi;
    psum += p;
    gsum += gi;
  }
  bce /= static_cast<double>(n);
  const double num = 2.0 * inter + kDiceEps, den = psum + gsum + kDiceEps;
  const double dice = 1.0 - num / den;
  if (parts != nullptr) *parts = {bce, dice};
  const double loss = bce_weight * bce + dice_weight * dice;

  Tensor<T> targ = target;
  return attach("bce_dice_loss", Tensor<T>::scalar(static_cast<T>(loss)), {logits},
                [logits, targ, prob, n, num, den, bce_weight, dice_weight](std::span<const T> out) {
                  if (!logits.requires_grad()) return;
                  auto gz = logits.grad_accumulator();
                  auto g = targ.values();
                  const double up = static_cast<double>(out[0]);
                  for (std::size_t i = 0; i < n; ++i) {
                    const double p = (*prob)[i], gi = static_cast<double>(g[i]);
                    const double d_bce = (p - gi) / static_cast<double>(n);
                    const double d_dice_dp = -(2.0 * gi * den - num) / (den * den);
                    gz[i] += static_cast<T>(up * (bce_weight * d_bce + dice_weight * d_dice_dp * p * (1.0 - p)));
                  }
                });
}

template Tensor<float> bce_dice_loss(const Tensor<float>&, const Tensor<float>&, double, double, LossParts*);
template Tensor<double> bce_dice_loss(const Tensor<double>&, const Tensor<double>&, double, double, LossParts*);

double iou(std::span<const float> pred, std::span<const float> truth) {
  if (pred.size() != truth.size()) throw DimensionError("iou: masks differ in size");
  data::require_binary(pred, "iou");
  data::require_binary(truth, "iou");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0.0f, g = truth[i] != 0.0f;
    inter += p && g;
    uni += p || g;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double f1_dice(std::span<const float> pred, std::span<const float> truth) {
  const double j = iou(pred, truth);
  return 2.0 * j / (1.0 + j);
}

double iou(const Tensor<float>& pred, const Tensor<float>& truth) {
  if (pred.shape() != truth.shape()) {
    throw DimensionError("iou: shapes " + shape_string(pred.shape()) + " and " + shape_string(truth.shape()) + " differ");
  }
  return iou(pred.values(), truth.values());
}

double f1_dice(const Tensor<float>& pred, const Tensor<float>& truth) {
  if (pred.shape() != truth.shape()) {
    throw DimensionError("f1: shapes " + shape_string(pred.shape()) + " and " + shape_string(truth.shape()) + " differ");
  }
  return f1_dice(pred.values(), truth.values());
}

double cosine_lr(std::size_t t, const TrainConfig& cfg) {
  if (t > cfg.epochs) {
    throw ContractError("cosine_lr: epoch " + std::to_string(t) + " outside [0, " + std::to_string(cfg.epochs) + "]");
  }
  const double frac = static_cast<double>(t) / static_cast<double>(cfg.epochs);
  return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

template <typename T>
void adam_step(const ParamList<T>& params, AdamState& state, double lr, const AdamOptions& opt) {
  if (state.m.empty()) {
    for (const auto& [name, p] : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: optimizer state does not match parameters");
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) continue;
    for (T gv : p.grad()) {
      if (!std::isfinite(static_cast<double>(gv))) throw NumericError("adam_step: non-finite gradient in parameter '" + name + "'");
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> p = params[k].second;
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != p.numel()) throw ContractError("adam_step: state size mismatch for '" + params[k].first + "'");
    auto values = p.mutable_values();
    const bool has = p.has_grad();
    std::span<const T> grad = has ? p.grad() : std::span<const T>{};
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = has ? static_cast<double>(grad[i]) : 0.0;
      m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * g;
      v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * g * g;
      const double update = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + opt.eps);
      values[i] = static_cast<T>(static_cast<double>(values[i]) - update);
    }
  }
}

template void adam_step(const ParamList<float>&, AdamState&, double, const AdamOptions&);
template void adam_step(const ParamList<double>&, AdamState&, double, const AdamOptions&);

namespace {

std::vector<std::vector<std::size_t>> batches_of(const std::vector<std::size_t>& order, std::size_t batch_size) {
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), i + batch_size)));
  }
  return out;
}

}  // namespace

std::vector<Tensor<float>> predict_logits(const model::KmUnet<float>& m, const std::vector<data::Sample>& samples,
                                          std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be >= 1");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<Tensor<float>> out;
  for (const auto& batch : batches_of(order, batch_size)) {
    const Tensor<float> logits = model::forward(m, data::stack_images<float>(samples, batch));
    const std::size_t per = logits.numel() / batch.size();
    const Shape one(logits.shape().begin() + 1, logits.shape().end());
    auto v = logits.values();
    for (std::size_t b = 0; b < batch.size(); ++b) {
      out.emplace_back(one, std::vector<float>(v.begin() + static_cast<std::ptrdiff_t>(b * per),
                                               v.begin() + static_cast<std::ptrdiff_t>((b + 1) * per)));
    }
  }
  return out;
}

Tensor<float> threshold_logits(const Tensor<float>& logits) {
  std::vector<float> mask(logits.numel());
  auto v = logits.values();
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = v[i] >= 0.0f ? 1.0f : 0.0f;
  return Tensor<float>(logits.shape(), std::move(mask));
}

EvalReport evaluate(const model::KmUnet<float>& m, const std::vector<data::Sample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw ConfigError("evaluate: empty dataset");
  const auto logits = predict_logits(m, samples, batch_size);
  EvalReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor<float> pred = threshold_logits(logits[i]);
    ImageScore s{samples[i].id, iou(pred, samples[i].mask), f1_dice(pred, samples[i].mask)};
    report.mean_iou += s.iou;
    report.mean_f1 += s.f1;
    report.images.push_back(std::move(s));
  }
  report.mean_iou /= static_cast<double>(samples.size());
  report.mean_f1 /= static_cast<double>(samples.size());
  return report;
}

TrainResult train_loop(model::KmUnet<float>& m, const std::vector<data::Sample>& train_set,
                       const std::vector<data::Sample>& val, const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training set");
  if (val.empty()) throw ConfigError("train: empty validation set");
  const ParamList<float> params = m.parameters();
  AdamState state;
  std::mt19937_64 aug_rng(data::splitmix64(cfg.seed ^ 0xA5A5A5A5ull));
  TrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg);
    const auto order = data::shuffled_indices(train_set.size(), data::splitmix64(cfg.seed + epoch));
    double loss_sum = 0.0;
    for (const auto& batch : batches_of(order, cfg.batch_size)) {
      std::vector<data::Sample> items;
      items.reserve(batch.size());
      for (std::size_t i : batch) items.push_back(cfg.augment ? data::augment(train_set[i], aug_rng) : train_set[i]);
      std::vector<std::size_t> all(items.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      const Tensor<float> x = data::stack_images<float>(items, all);
      const Tensor<float> y = data::stack_masks<float>(items, all);
      Tape<float> tape;
      Tensor<float> loss;
      {
        Recording<float> rec(tape);
        loss = bce_dice_loss(model::forward(m, x), y, cfg.bce_weight, cfg.dice_weight);
      }
      tape.backward(loss);
      adam_step(params, state, lr);
      for (const auto& [name, p] : params) p.zero_grad();
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(batch.size());
    }
    const EvalReport rep = evaluate(m, val, cfg.batch_size);
    const EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(train_set.size()), rep.mean_iou, rep.mean_f1};
    result.history.push_back(rec);
    if (rep.mean_iou > result.best_val_iou) {
      result.best_val_iou = rep.mean_iou;
      result.best_epoch = epoch;
      if (hooks.on_best) hooks.on_best(m, rec);
    }
    if (hooks.on_epoch) hooks.on_epoch(rec);
  }
  return result;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,lr,train_loss,val_iou,val_f1\n";
  char line[160];
  for (const auto& r : history) {
    std::snprintf(line, sizeof(line), "%zu,%.9g,%.9g,%.9g,%.9g\n", r.epoch, r.lr, r.train_loss, r.val_iou, r.val_f1);
    out += line;
  }
  return out;
}

}  // namespace kmunet::train
