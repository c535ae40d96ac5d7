// Copyright 2026 The Invarilab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace ilab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad model/layer/spec wiring detected before any numeric work.
struct ConfigError : Error {
  using Error::Error;
};

/// Caller handed data that violates an operation's preconditions.
struct InputError : Error {
  using Error::Error;
};

/// A binary container (ILAB archive, ILMC checkpoint) is malformed.
struct FormatError : Error {
  FormatError(const std::string& what, long long byte_offset)
      : Error(what + " (byte offset " + std::to_string(byte_offset) + ")"),
        offset(byte_offset) {}
  long long offset = -1;
};

/// Non-finite value produced where the engine guarantees finiteness.
struct NumericError : Error {
  using Error::Error;
};

struct ParseError : Error {
  ParseError(const std::string& what, std::size_t position)
      : Error(what + " (at position " + std::to_string(position) + ")"),
        pos(position) {}
  explicit ParseError(const std::string& what) : Error(what), pos(0) {}
  std::size_t pos = 0;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace ilab
