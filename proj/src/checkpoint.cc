/*
 * Copyright 2026 The rigdistill Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "rigdistill/checkpoint.h"

#include "binary_io.h"
#include "rigdistill/error.h"

namespace rigdistill {

namespace {
constexpr char kMagic[4] = {'R', 'D', 'C', 'K'};
}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const StudentNet& net) {
  io::Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(net.config().channels));
  w.u32(static_cast<std::uint32_t>(net.config().future_ms));
  const auto& params = net.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    w.str(params.name(i));
    const Tensor<float>& t = params.value(i);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (float v : t.data()) w.f32(v);
  }
  return w.buffer();
}

StudentNet decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                             const std::string& origin) {
  io::Reader r(bytes, origin);
  char magic[4];
  r.bytes(magic, 4);
  if (std::string(magic, 4) != std::string(kMagic, 4)) {
    fail(ErrorKind::kMalformed, origin + ": not a checkpoint (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kVersion, origin + ": unsupported checkpoint version " +
                                  std::to_string(version));
  }
  StudentConfig config;
  config.channels = r.u32();
  config.future_ms = static_cast<int>(r.u32());
  const std::uint32_t count = r.u32();
  ParameterStore<float> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank > 8) fail(ErrorKind::kMalformed, origin + ": implausible rank for " + name);
    Shape shape(rank);
    for (auto& e : shape) e = r.u32();
    const std::size_t n = shape_size(shape);
    r.need(n * 4);
    std::vector<float> data(n);
    for (float& v : data) v = r.f32();
    params.add(std::move(name), Tensor<float>(std::move(shape), std::move(data)));
  }
  if (r.remaining() != 0) fail(ErrorKind::kMalformed, origin + ": trailing bytes");
  return StudentNet(config, std::move(params));
}

void save_checkpoint(const StudentNet& net, const std::string& path) {
  io::write_file(path, encode_checkpoint(net));
}

StudentNet load_checkpoint(const std::string& path) {
  return decode_checkpoint(io::read_file(path), path);
}

}  // namespace rigdistill
