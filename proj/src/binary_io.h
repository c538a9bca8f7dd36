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

// Little-endian primitives shared by the feature-file and checkpoint formats.

#ifndef WEBLYNET_SRC_BINARY_IO_H_
#define WEBLYNET_SRC_BINARY_IO_H_

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>

#include "weblynet/errors.h"

namespace weblynet::internal {

template <typename UInt>
void write_le(std::ostream& out, UInt value) {
  char bytes[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFF);
  }
  out.write(bytes, sizeof(UInt));
}

template <typename UInt>
UInt read_le(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(UInt)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(UInt))) {
    throw DataError("truncated " + what);
  }
  UInt value = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) {
    value |= static_cast<UInt>(bytes[i]) << (8 * i);
  }
  return value;
}

inline void write_doubles(std::ostream& out, std::span<const double> values) {
  for (const double v : values) write_le(out, std::bit_cast<std::uint64_t>(v));
}

inline void read_doubles(std::istream& in, std::span<double> values,
                         const std::string& what) {
  for (double& v : values) {
    v = std::bit_cast<double>(read_le<std::uint64_t>(in, what));
  }
}

inline std::string read_bytes(std::istream& in, std::size_t n,
                              const std::string& what) {
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw DataError("truncated " + what);
  }
  return s;
}

}  // namespace weblynet::internal

#endif  // WEBLYNET_SRC_BINARY_IO_H_
