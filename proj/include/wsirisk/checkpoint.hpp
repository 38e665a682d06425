// Copyright 2026 The wsirisk Authors. All Rights Reserved.
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

// Checkpoint container: magic bytes, format version, a JSON block holding
// the network config and training metadata, a named tensor directory with
// little-endian float32 payloads, and a trailing CRC32. Round-trips are
// bit-exact.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <json.hpp>

#include "wsirisk/common.hpp"
#include "wsirisk/nn.hpp"

namespace wsirisk {

inline constexpr char kCheckpointMagic[8] = {'W', 'S', 'R', 'K', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkConfig config;
  Params<float> params;
  nlohmann::ordered_json metadata;  // epoch, seed, loss hyperparameters, ...
};

namespace ckpt_detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 24));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace ckpt_detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kCheckpointMagic, kCheckpointMagic + 8);
  ckpt_detail::put_u32(out, kCheckpointVersion);

  nlohmann::ordered_json header;
  header["config"] = network_config_to_json(ckpt.config);
  header["metadata"] = ckpt.metadata;
  const std::string header_str = header.dump();
  ckpt_detail::put_u32(out, static_cast<std::uint32_t>(header_str.size()));
  out.insert(out.end(), header_str.begin(), header_str.end());

  std::uint32_t tensor_count = 0;
  ckpt.params.for_each([&](const std::string&, const Tensor<float>&) { ++tensor_count; });
  ckpt_detail::put_u32(out, tensor_count);

  ckpt.params.for_each([&](const std::string& name, const Tensor<float>& t) {
    ckpt_detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    ckpt_detail::put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (const int d : t.shape) ckpt_detail::put_u32(out, static_cast<std::uint32_t>(d));
    const std::size_t bytes = t.size() * sizeof(float);
    const std::size_t at = out.size();
    out.resize(at + bytes);
    std::memcpy(out.data() + at, t.data(), bytes);  // little-endian host assumed
  });

  const uLong crc = ::crc32(0L, out.data(), static_cast<uInt>(out.size()));
  ckpt_detail::put_u32(out, static_cast<std::uint32_t>(crc));
  return out;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("save_checkpoint: cannot open " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("save_checkpoint: write failed for " + path);
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                    const std::string& origin = "<memory>") {
  if (bytes.size() < 20 || std::memcmp(bytes.data(), kCheckpointMagic, 8) != 0)
    throw IoError("checkpoint: bad magic in " + origin);
  const std::uint32_t stored_crc = ckpt_detail::get_u32(bytes.data() + bytes.size() - 4);
  const uLong computed =
      ::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size() - 4));
  if (stored_crc != static_cast<std::uint32_t>(computed))
    throw IoError("checkpoint: checksum mismatch (truncated or corrupt): " + origin);

  std::size_t pos = 8;
  auto need = [&](std::size_t n) {
    if (pos + n > bytes.size() - 4)
      throw IoError("checkpoint: truncated payload in " + origin);
  };
  need(4);
  const std::uint32_t version = ckpt_detail::get_u32(bytes.data() + pos);
  pos += 4;
  if (version != kCheckpointVersion)
    throw IoError("checkpoint: unsupported format version " + std::to_string(version) +
                  " in " + origin);

  need(4);
  const std::uint32_t header_len = ckpt_detail::get_u32(bytes.data() + pos);
  pos += 4;
  need(header_len);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("checkpoint: bad header JSON in " + origin + ": " + e.what());
  }
  pos += header_len;

  Checkpoint ckpt;
  ckpt.config = network_config_from_json(header.at("config"));
  ckpt.metadata = header.value("metadata", nlohmann::ordered_json::object());
  ckpt.params = Params<float>::zeros_like(ckpt.config);

  need(4);
  const std::uint32_t tensor_count = ckpt_detail::get_u32(bytes.data() + pos);
  pos += 4;

  for (std::uint32_t i = 0; i < tensor_count; ++i) {
    need(4);
    const std::uint32_t name_len = ckpt_detail::get_u32(bytes.data() + pos);
    pos += 4;
    need(name_len);
    const std::string name(reinterpret_cast<const char*>(bytes.data() + pos), name_len);
    pos += name_len;
    need(4);
    const std::uint32_t ndim = ckpt_detail::get_u32(bytes.data() + pos);
    pos += 4;
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      need(4);
      shape.push_back(static_cast<int>(ckpt_detail::get_u32(bytes.data() + pos)));
      pos += 4;
    }
    Tensor<float>* target = nullptr;
    ckpt.params.for_each([&](const std::string& n, Tensor<float>& t) {
      if (n == name) target = &t;
    });
    if (target == nullptr)
      throw IoError("checkpoint: unknown tensor '" + name + "' in " + origin);
    if (target->shape != shape)
      throw IoError("checkpoint: shape mismatch for tensor '" + name + "' in " + origin);
    const std::size_t nbytes = target->size() * sizeof(float);
    need(nbytes);
    std::memcpy(target->data(), bytes.data() + pos, nbytes);
    pos += nbytes;
  }
  return ckpt;
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("load_checkpoint: cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, path);
}

}  // namespace wsirisk
