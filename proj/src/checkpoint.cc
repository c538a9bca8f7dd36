/*
 * Copyright 2026 The WeblyNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <fstream>
#include <string>

#include "binary_io.h"
#include "weblynet/errors.h"
#include "weblynet/networks.h"

namespace weblynet {
namespace {

constexpr char kMagic[4] = {'W', 'B', 'N', 'C'};
constexpr std::uint32_t kFormatVersion = 1;

}  // namespace

void save_checkpoint(Network& net, const std::filesystem::path& path) {
  using internal::write_le;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  write_le<std::uint32_t>(out, kFormatVersion);
  write_le<std::uint64_t>(out, net.seed());
  const std::string spec = net.spec_json();
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(spec.size()));
  out.write(spec.data(), static_cast<std::streamsize>(spec.size()));
  const std::vector<StateEntry> entries = net.state();
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
  for (const StateEntry& e : entries) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.shape.size()));
    for (const std::size_t extent : e.shape) {
      write_le<std::uint32_t>(out, static_cast<std::uint32_t>(extent));
    }
    internal::write_doubles(out, e.values);
  }
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

std::unique_ptr<Network> load_checkpoint(const std::filesystem::path& path) {
  using internal::read_le;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const std::string what = "checkpoint " + path.string();
  if (internal::read_bytes(in, 4, what) != std::string(kMagic, 4)) {
    throw DataError(path.string() + " is not a network checkpoint");
  }
  const auto version = read_le<std::uint32_t>(in, what);
  if (version != kFormatVersion) {
    throw DataError("unsupported checkpoint version " +
                    std::to_string(version));
  }
  const auto seed = read_le<std::uint64_t>(in, what);
  const auto spec_len = read_le<std::uint32_t>(in, what);
  auto net = make_network(internal::read_bytes(in, spec_len, what), seed);

  std::vector<StateEntry> entries = net->state();
  const auto count = read_le<std::uint32_t>(in, what);
  if (count != entries.size()) {
    throw DataError(what + " holds " + std::to_string(count) +
                    " tensors, network expects " +
                    std::to_string(entries.size()));
  }
  for (StateEntry& e : entries) {
    const auto name_len = read_le<std::uint32_t>(in, what);
    const std::string name = internal::read_bytes(in, name_len, what);
    if (name != e.name) {
      throw DataError(what + ": expected tensor '" + e.name + "', found '" +
                      name + "'");
    }
    const auto rank = read_le<std::uint32_t>(in, what);
    Shape shape(rank);
    for (auto& extent : shape) extent = read_le<std::uint32_t>(in, what);
    if (shape != e.shape) {
      throw DataError(what + ": tensor '" + name + "' has shape " +
                      shape_to_string(shape) + ", expected " +
                      shape_to_string(e.shape));
    }
    internal::read_doubles(in, e.values, what);
  }
  return net;
}

}  // namespace weblynet
