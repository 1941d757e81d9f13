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
#include <string>
#include <string_view>
#include <vector>

#include "kmunet/kan/kan.hpp"
#include "kmunet/scan/scan.hpp"
#include "kmunet/sem/sem.hpp"

namespace kmunet {

// Flat `key = value` text. Blank lines and lines starting with '#' are
// skipped; later duplicates override earlier ones when applied in order.
struct KeyValue {
  std::string key;
  std::string value;
};

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& origin);
std::string format_key_values(const std::vector<KeyValue>& entries);
// Splits `key=value` (a command-line override).
KeyValue parse_override(std::string_view text);

std::size_t parse_count(std::string_view key, std::string_view value);
std::vector<std::size_t> parse_count_list(std::string_view key, std::string_view value);
double parse_real(std::string_view key, std::string_view value);
std::uint64_t parse_seed(std::string_view key, std::string_view value);
std::string format_real(double v);
std::string format_count_list(const std::vector<std::size_t>& v);

struct ModelConfig {
  std::vector<std::size_t> conv_channels{8, 16, 32};  // C1..C3
  std::vector<std::size_t> token_dims{64, 128};       // D4, D5
  std::size_t in_channels = 3;
  std::size_t out_channels = 1;
  std::size_t n_state = 8;
  kan::TokenMixer token_mixer = kan::TokenMixer::kan;
  std::size_t kan_grid = 5;
  std::size_t kan_order = 3;
  double kan_range = 1.0;
  std::size_t kan_depth = 1;
  std::vector<scan::ScanDirection> sem_directions{scan::ScanDirection::tl_br, scan::ScanDirection::tr_bl,
                                                  scan::ScanDirection::br_tl, scan::ScanDirection::bl_tr};
  std::size_t sem_attention_groups = 4;

  static constexpr std::size_t kDivisor = 32;

  void validate() const;
  // Returns false for keys this config does not own.
  bool set(std::string_view key, std::string_view value);
  std::vector<KeyValue> entries() const;
  std::string to_text() const { return format_key_values(entries()); }
  static ModelConfig from_text(std::string_view text, const std::string& origin);

  sem::SemConfig sem_for(std::size_t channels) const;
  kan::TokBlockOptions tok_options() const;
};

}  // namespace kmunet
