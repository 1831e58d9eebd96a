// Copyright 2026 The dualfed Authors. All Rights Reserved.
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

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dualfed {

// Exception taxonomy. The CLI maps these onto exit codes: ConfigError -> 2,
// DataError (and ParseError) -> 3, everything else -> 4.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or network wiring (bad shapes between layers, m > K, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input value outside an operation's domain (empty softmax, bad class index).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Parameter blocks whose layer names or shapes do not line up.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// A client/server exchange that breaks the sharing rules.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset or checkpoint file; carries the byte offset of the fault.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace dualfed
