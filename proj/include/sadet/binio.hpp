// Copyright 2026 The sadet Authors. All Rights Reserved.
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

// Little-endian primitives shared by the tensor dump and checkpoint formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "sadet/error.hpp"

namespace sadet::binio {

template <typename U>
void put(std::ostream& os, U value) {
  static_assert(std::is_trivially_copyable_v<U>);
  unsigned char bytes[sizeof(U)];
  std::memcpy(bytes, &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(bytes[i], bytes[sizeof(U) - 1 - i]);
  }
  os.write(reinterpret_cast<const char*>(bytes), sizeof(U));
}

template <typename U>
U get(std::istream& is, const std::string& source) {
  unsigned char bytes[sizeof(U)];
  const auto offset = static_cast<std::uint64_t>(is.tellg());
  if (!is.read(reinterpret_cast<char*>(bytes), sizeof(U))) {
    throw ParseError(source, offset, "unexpected end of data");
  }
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(U) / 2; ++i) std::swap(bytes[i], bytes[sizeof(U) - 1 - i]);
  }
  U value;
  std::memcpy(&value, bytes, sizeof(U));
  return value;
}

inline void put_string(std::ostream& os, const std::string& s) {
  put<std::uint32_t>(os, static_cast<std::uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& is, const std::string& source,
                              std::uint32_t max_len = 1u << 26) {
  const auto offset = static_cast<std::uint64_t>(is.tellg());
  const auto n = get<std::uint32_t>(is, source);
  if (n > max_len) throw ParseError(source, offset, "string length " + std::to_string(n) + " too large");
  std::string s(n, '\0');
  if (n > 0 && !is.read(s.data(), n)) throw ParseError(source, offset + 4, "truncated string");
  return s;
}

inline void expect_magic(std::istream& is, const std::string& source, const char (&magic)[5]) {
  const auto offset = static_cast<std::uint64_t>(is.tellg());
  char got[4];
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw ParseError(source, offset, std::string("bad magic, expected ") + magic);
  }
}

}  // namespace sadet::binio
