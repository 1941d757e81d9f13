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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kmunet/data/data.hpp"
#include "kmunet/model/config.hpp"
#include "kmunet/train/train.hpp"

namespace kmunet::cli {

enum ExitCode : int { kOk = 0, kValidation = 1, kVerification = 2, kIo = 3 };

// Everything `train` reads: model keys, train.* keys, data.* and out.dir.
struct RunConfig {
  ModelConfig model;
  train::TrainConfig train;
  std::string data_dir;
  // 0 trains and validates on the full dataset.
  double val_ratio = 0.2;
  std::optional<data::Size2> resize;
  std::string out_dir = "run";
  bool seed_set = false;

  // Unknown keys are ConfigErrors.
  void set(const std::string& key, const std::string& value);
  std::vector<KeyValue> entries() const;
  void validate() const;
};

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

// Median wall time in seconds of selective_scan on a [batch, length, d]
// float input.
double bench_selective_scan(std::size_t length, std::size_t d, std::size_t n_state, std::size_t batch,
                            std::size_t reps, std::uint64_t seed = 1);

// Maps a [1, C, H, W] activation to a min-max normalized mean-over-channels
// map; a constant map normalizes to all zeros.
std::vector<float> activation_map(const Tensor<float>& stage);

// Entry point of the `kmunet` executable.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kmunet::cli
