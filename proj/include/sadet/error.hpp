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

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sadet {

// Base of every error raised by the library. The CLI maps subclasses to
// process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content; carries the file and byte offset where parsing
// stopped.
class ParseError : public IoError {
 public:
  ParseError(const std::string& file, std::uint64_t offset, const std::string& what)
      : IoError(file + " @ byte " + std::to_string(offset) + ": " + what),
        file_(file),
        offset_(offset) {}

  const std::string& file() const noexcept { return file_; }
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::string file_;
  std::uint64_t offset_;
};

// Non-finite value detected during training or a forward pass.
class NumericError : public Error {
 public:
  using Error::Error;
};

#define SADET_CHECK(cond, ...)                      \
  do {                                              \
    if (!(cond)) throw ::sadet::InvalidArgument(__VA_ARGS__); \
  } while (0)

}  // namespace sadet
