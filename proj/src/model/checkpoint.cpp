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
#include "kmunet/model/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "kmunet/error.hpp"

namespace kmunet::model {

namespace {

template <typename U>
void put_le(std::ostream& out, U v) {
  unsigned char buf[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(buf), sizeof(U));
}

class Reader {
 public:
  Reader(std::istream& in, const std::string& origin) : in_(in), origin_(origin) {}

  void bytes(void* dst, std::size_t n) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) fail("truncated file");
  }

  template <typename U>
  U le() {
    unsigned char buf[sizeof(U)];
    bytes(buf, sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
    return v;
  }

  std::string text(std::size_t n) {
    std::string s(n, '\0');
    if (n > 0) bytes(s.data(), n);
    return s;
  }

  [[noreturn]] void fail(const std::string& what) const { throw IoError(origin_ + ": " + what); }

 private:
  std::istream& in_;
  const std::string& origin_;
};

}  // namespace

void write_checkpoint(std::ostream& out, const CheckpointData& data) {
  out.write(kCheckpointMagic, 4);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.config_text.size()));
  out.write(data.config_text.data(), static_cast<std::streamsize>(data.config_text.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(data.tensors.size()));
  for (const auto& t : data.tensors) {
    if (t.name.size() > 0xFFFF || t.shape.size() > 0xFF) throw ContractError("checkpoint: tensor name or rank too large");
    if (shape_numel(t.shape) != t.values.size()) throw ContractError("checkpoint: tensor '" + t.name + "' size mismatch");
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(t.name.size()));
    out.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    put_le<std::uint8_t>(out, 0);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
    for (std::size_t d : t.shape) put_le<std::uint64_t>(out, d);
    for (float v : t.values) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
}

CheckpointData read_checkpoint(std::istream& in, const std::string& origin) {
  Reader r(in, origin);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kCheckpointMagic, 4) != 0) r.fail("not a checkpoint (bad magic)");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) r.fail("unsupported checkpoint version " + std::to_string(version));
  CheckpointData data;
  data.config_text = r.text(r.le<std::uint32_t>());
  const auto count = r.le<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointTensor t;
    t.name = r.text(r.le<std::uint16_t>());
    const auto dtype = r.le<std::uint8_t>();
    if (dtype != 0) r.fail("tensor '" + t.name + "' has unsupported dtype " + std::to_string(dtype));
    const auto rank = r.le<std::uint8_t>();
    std::size_t numel = 1;
    for (std::uint8_t k = 0; k < rank; ++k) {
      const auto d = r.le<std::uint64_t>();
      if (d == 0 || d > (std::uint64_t{1} << 32)) r.fail("tensor '" + t.name + "' has an invalid dimension");
      t.shape.push_back(static_cast<std::size_t>(d));
      numel *= static_cast<std::size_t>(d);
      if (numel > (std::size_t{1} << 32)) r.fail("tensor '" + t.name + "' is implausibly large");
    }
    t.values.resize(numel);
    for (float& v : t.values) v = std::bit_cast<float>(r.le<std::uint32_t>());
    data.tensors.push_back(std::move(t));
  }
  return data;
}

template <typename T>
void save_checkpoint(const KmUnet<T>& m, const std::string& path) {
  CheckpointData data;
  data.config_text = m.cfg.to_text();
  for (const auto& [name, t] : m.parameters()) {
    auto v = t.values();
    data.tensors.push_back({name, t.shape(), std::vector<float>(v.begin(), v.end())});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path + ": cannot open for writing");
  write_checkpoint(out, data);
  out.flush();
  if (!out) throw IoError(path + ": write failed");
}

template <typename T>
KmUnet<T> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open checkpoint");
  const CheckpointData data = read_checkpoint(in, path);
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_text(data.config_text, path);
  } catch (const ConfigError& e) {
    throw IoError(path + ": invalid stored config: " + e.what());
  }
  KmUnet<T> m = build<T>(cfg, 0);
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : data.tensors) {
    if (!by_name.emplace(t.name, &t).second) throw IoError(path + ": duplicate tensor '" + t.name + "'");
  }
  ParamList<T> params = m.parameters();
  if (params.size() != by_name.size()) {
    throw IoError(path + ": expected " + std::to_string(params.size()) + " tensors, found " +
                  std::to_string(by_name.size()));
  }
  for (auto& [name, t] : params) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError(path + ": missing tensor '" + name + "'");
    if (it->second->shape != t.shape()) {
      throw IoError(path + ": tensor '" + name + "' has shape " + shape_string(it->second->shape) + ", expected " +
                    shape_string(t.shape()));
    }
    auto dst = t.mutable_values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(it->second->values[i]);
  }
  return m;
}

template void save_checkpoint(const KmUnet<float>&, const std::string&);
template void save_checkpoint(const KmUnet<double>&, const std::string&);
template KmUnet<float> load_checkpoint<float>(const std::string&);
template KmUnet<double> load_checkpoint<double>(const std::string&);

}  // namespace kmunet::model
