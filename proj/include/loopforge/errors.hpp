// Copyright 2026 The LoopForge Authors
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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace loopforge {

/// Broad failure categories. The CLI maps them to exit codes and the service
/// maps them to HTTP statuses, so the set is part of the public contract.
enum class ErrorKind {
  kInvalidInput,
  kNonManifoldSlice,
  kDegenerateLoop,
  kEmptyShape,
  kOrphanLoop,
  kPlaneOverflow,
  kShape,
  kParse,
  kLength,
  kNumericalHealth,
  kState,
  kRange,
  kCheckpoint,
  kDatasetQuality,
  kIo,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when a chained slice polyline cannot be closed.
class NonManifoldSliceError : public Error {
 public:
  NonManifoldSliceError(std::size_t plane_index, const std::string& detail);
  std::size_t plane_index() const noexcept { return plane_index_; }

 private:
  std::size_t plane_index_;
};

/// Parse failures carry the 1-based line number of the offending record.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& detail);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Invalid request content attributable to one named field.
class FieldError : public Error {
 public:
  FieldError(std::string field, const std::string& detail);
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace loopforge
