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
#include "kmunet/model/config.hpp"

#include <charconv>
#include <cmath>

#include "kmunet/error.hpp"

namespace kmunet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* expected) {
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + expected);
}

}  // namespace

std::vector<KeyValue> parse_key_values(std::string_view text, const std::string& origin) {
  std::vector<KeyValue> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    line = trim(line);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    KeyValue kv{std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1)))};
    if (kv.key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
    out.push_back(std::move(kv));
  }
  return out;
}

std::string format_key_values(const std::vector<KeyValue>& entries) {
  std::string out;
  for (const auto& [k, v] : entries) out += k + " = " + v + "\n";
  return out;
}

KeyValue parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || trim(text.substr(0, eq)).empty()) {
    throw ConfigError("override '" + std::string(text) + "' is not key=value");
  }
  return {std::string(trim(text.substr(0, eq))), std::string(trim(text.substr(eq + 1)))};
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) bad_value(key, value, "a non-negative integer");
  return v;
}

std::uint64_t parse_seed(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty()) bad_value(key, value, "an unsigned integer");
  return v;
}

std::vector<std::size_t> parse_count_list(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  while (true) {
    const auto comma = value.find(',');
    out.push_back(parse_count(key, trim(value.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    value = value.substr(comma + 1);
  }
  return out;
}

double parse_real(std::string_view key, std::string_view value) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size() || value.empty() || !std::isfinite(v)) {
    bad_value(key, value, "a finite real number");
  }
  return v;
}

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_count_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

void ModelConfig::validate() const {
  if (conv_channels.size() != 3) throw ConfigError("conv_channels needs exactly 3 widths (C1,C2,C3)");
  if (token_dims.size() != 2) throw ConfigError("token_dims needs exactly 2 widths (D4,D5)");
  for (std::size_t c : conv_channels) {
    if (c == 0) throw ConfigError("conv_channels entries must be >= 1");
  }
  for (std::size_t d : token_dims) {
    if (d == 0) throw ConfigError("token_dims entries must be >= 1");
  }
  if (in_channels == 0 || out_channels == 0) throw ConfigError("in_channels and out_channels must be >= 1");
  if (n_state == 0) throw ConfigError("n_state must be >= 1");
  if (kan_depth == 0) throw ConfigError("kan_depth must be >= 1");
  kan::SplineGrid(kan_grid, kan_order, kan_range);
  for (std::size_t c : conv_channels) sem_for(c).validate();
}

bool ModelConfig::set(std::string_view key, std::string_view value) {
  if (key == "conv_channels") {
    conv_channels = parse_count_list(key, value);
  } else if (key == "token_dims") {
    token_dims = parse_count_list(key, value);
  } else if (key == "in_channels") {
    in_channels = parse_count(key, value);
  } else if (key == "out_channels") {
    out_channels = parse_count(key, value);
  } else if (key == "n_state") {
    n_state = parse_count(key, value);
  } else if (key == "token_mixer") {
    token_mixer = kan::parse_token_mixer(value);
  } else if (key == "kan_grid") {
    kan_grid = parse_count(key, value);
  } else if (key == "kan_order") {
    kan_order = parse_count(key, value);
  } else if (key == "kan_range") {
    kan_range = parse_real(key, value);
  } else if (key == "kan_depth") {
    kan_depth = parse_count(key, value);
  } else if (key == "sem.directions") {
    sem_directions = scan::parse_directions(value);
  } else if (key == "sem.attention_groups") {
    sem_attention_groups = parse_count(key, value);
  } else {
    return false;
  }
  return true;
}

std::vector<KeyValue> ModelConfig::entries() const {
  return {
      {"conv_channels", format_count_list(conv_channels)},
      {"token_dims", format_count_list(token_dims)},
      {"in_channels", std::to_string(in_channels)},
      {"out_channels", std::to_string(out_channels)},
      {"n_state", std::to_string(n_state)},
      {"token_mixer", std::string(kan::token_mixer_name(token_mixer))},
      {"kan_grid", std::to_string(kan_grid)},
      {"kan_order", std::to_string(kan_order)},
      {"kan_range", format_real(kan_range)},
      {"kan_depth", std::to_string(kan_depth)},
      {"sem.directions", scan::format_directions(sem_directions)},
      {"sem.attention_groups", std::to_string(sem_attention_groups)},
  };
}

ModelConfig ModelConfig::from_text(std::string_view text, const std::string& origin) {
  ModelConfig cfg;
  for (const auto& [k, v] : parse_key_values(text, origin)) {
    if (!cfg.set(k, v)) throw ConfigError(origin + ": unknown model key '" + k + "'");
  }
  cfg.validate();
  return cfg;
}

sem::SemConfig ModelConfig::sem_for(std::size_t channels) const {
  sem::SemConfig s;
  s.directions = sem_directions;
  s.channels = channels;
  s.n_state = n_state;
  s.attention_groups = sem_attention_groups;
  return s;
}

kan::TokBlockOptions ModelConfig::tok_options() const {
  kan::TokBlockOptions o;
  o.mixer = token_mixer;
  o.kan = {kan_grid, kan_order, kan_range};
  o.kan_depth = kan_depth;
  return o;
}

}  // namespace kmunet
