// Copyright 2026 The Canopy Authors.
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

namespace canopy {

/// Broad failure class; the CLI maps each to an exit code.
enum class ErrorKind { data, config, storage };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Malformed input row. `row` is 1-based (file line for csv).
class ParseError : public Error {
 public:
  ParseError(std::uint64_t row, const std::string& what)
      : Error(ErrorKind::data, "row " + std::to_string(row) + ": " + what), row_(row) {}
  std::uint64_t row() const noexcept { return row_; }

 private:
  std::uint64_t row_;
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class TruncationError : public Error {
 public:
  explicit TruncationError(const std::string& what) : Error(ErrorKind::data, what) {}
};

/// I/O failure while streaming chunks.
class StreamError : public Error {
 public:
  StreamError(std::uint64_t offset, const std::string& what)
      : Error(ErrorKind::storage, what + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class StorageError : public Error {
 public:
  explicit StorageError(const std::string& what) : Error(ErrorKind::storage, what) {}
};

class LookupError : public Error {
 public:
  explicit LookupError(const std::string& what) : Error(ErrorKind::storage, what) {}
};

/// Invalid argument to a numerical routine (empty set, arity mismatch, ...).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

/// Undecodable model bytes.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(ErrorKind::data, what) {}
};

}  // namespace canopy
