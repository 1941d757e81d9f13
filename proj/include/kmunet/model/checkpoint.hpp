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

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "kmunet/model/model.hpp"

// Binary checkpoint: "KMUN", u32 version, u32-length config text, u32 tensor
// count, then per tensor u16 name length, name, u8 dtype (0 = f32), u8 rank,
// u64 dims, f32 values. All integers and floats little-endian.

namespace kmunet::model {

inline constexpr char kCheckpointMagic[4] = {'K', 'M', 'U', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointTensor {
  std::string name;
  Shape shape;
  std::vector<float> values;
};

struct CheckpointData {
  std::string config_text;
  std::vector<CheckpointTensor> tensors;
};

void write_checkpoint(std::ostream& out, const CheckpointData& data);
CheckpointData read_checkpoint(std::istream& in, const std::string& origin);

template <typename T>
void save_checkpoint(const KmUnet<T>& m, const std::string& path);

// Rebuilds the model from the stored config and copies every tensor in;
// missing, extra or misshapen tensors are I/O errors.
template <typename T>
KmUnet<T> load_checkpoint(const std::string& path);

}  // namespace kmunet::model
