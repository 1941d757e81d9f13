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
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kmunet/data/data.hpp"
#include "kmunet/model/config.hpp"
#include "kmunet/model/model.hpp"
#include "kmunet/numerics/params.hpp"
#include "kmunet/numerics/tensor.hpp"

namespace kmunet::train {

struct TrainConfig {
  std::size_t batch_size = 8;
  double lr_max = 1e-4;
  double lr_min = 1e-5;
  std::size_t epochs = 300;
  std::uint64_t seed = 0;
  double bce_weight = 1.0;
  double dice_weight = 1.0;
  bool augment = true;

  void validate() const;
  bool set(std::string_view key, std::string_view value);
  std::vector<KeyValue> entries() const;
};

inline constexpr double kDiceEps = 1e-6;

struct LossParts {
  double bce = 0.0;
  double dice = 0.0;
};

// w_bce * mean BCE(sigmoid(logits), target) + w_dice * (1 - soft dice), the
// dice sums running over the whole batch. `parts`, when given, receives the
// unweighted terms.
template <typename T>
Tensor<T> bce_dice_loss(const Tensor<T>& logits, const Tensor<T>& target, double bce_weight = 1.0,
                        double dice_weight = 1.0, LossParts* parts = nullptr);

// Binary masks as 0/1 floats. Empty prediction and empty truth score 1.
double iou(std::span<const float> pred, std::span<const float> truth);
// Computed as 2 IoU / (1 + IoU), which equals 2|P&G| / (|P| + |G|).
double f1_dice(std::span<const float> pred, std::span<const float> truth);
double iou(const Tensor<float>& pred, const Tensor<float>& truth);
double f1_dice(const Tensor<float>& pred, const Tensor<float>& truth);

double cosine_lr(std::size_t t, const TrainConfig& cfg);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

// One bias-corrected Adam update over `params` using their accumulated
// gradients (a parameter without a gradient counts as zero). Throws
// NumericError naming the first parameter with a non-finite gradient,
// before any value changes.
template <typename T>
void adam_step(const ParamList<T>& params, AdamState& state, double lr, const AdamOptions& opt = {});

struct ImageScore {
  std::string id;
  double iou = 0.0;
  double f1 = 0.0;
};

struct EvalReport {
  std::vector<ImageScore> images;
  double mean_iou = 0.0;
  double mean_f1 = 0.0;
};

// Logits of each sample, batched.
std::vector<Tensor<float>> predict_logits(const model::KmUnet<float>& m, const std::vector<data::Sample>& samples,
                                          std::size_t batch_size);
// Mask of sigmoid(logits) >= 0.5, i.e. logits >= 0.
Tensor<float> threshold_logits(const Tensor<float>& logits);
EvalReport evaluate(const model::KmUnet<float>& m, const std::vector<data::Sample>& samples,
                    std::size_t batch_size = 8);

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_iou = 0.0;
  double val_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_val_iou = -1.0;
};

struct TrainHooks {
  // Called with the model whenever validation IoU improves.
  std::function<void(const model::KmUnet<float>&, const EpochRecord&)> on_best;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Epoch e (0-based) trains with lr = cosine_lr(e). Validation uses `val`.
TrainResult train_loop(model::KmUnet<float>& m, const std::vector<data::Sample>& train_set,
                       const std::vector<data::Sample>& val, const TrainConfig& cfg, const TrainHooks& hooks = {});

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace kmunet::train
