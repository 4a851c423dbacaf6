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

#include "loopforge/errors.hpp"

namespace loopforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid_input";
    case ErrorKind::kNonManifoldSlice: return "non_manifold_slice";
    case ErrorKind::kDegenerateLoop: return "degenerate_loop";
    case ErrorKind::kEmptyShape: return "empty_shape";
    case ErrorKind::kOrphanLoop: return "orphan_loop";
    case ErrorKind::kPlaneOverflow: return "plane_overflow";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kParse: return "parse";
    case ErrorKind::kLength: return "length";
    case ErrorKind::kNumericalHealth: return "numerical_health";
    case ErrorKind::kState: return "state";
    case ErrorKind::kRange: return "range";
    case ErrorKind::kCheckpoint: return "checkpoint";
    case ErrorKind::kDatasetQuality: return "dataset_quality";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

NonManifoldSliceError::NonManifoldSliceError(std::size_t plane_index,
                                             const std::string& detail)
    : Error(ErrorKind::kNonManifoldSlice,
            "non-manifold slice at plane " + std::to_string(plane_index) +
                ": " + detail),
      plane_index_(plane_index) {}

ParseError::ParseError(std::size_t line, const std::string& detail)
    : Error(ErrorKind::kParse,
            "parse error at line " + std::to_string(line) + ": " + detail),
      line_(line) {}

FieldError::FieldError(std::string field, const std::string& detail)
    : Error(ErrorKind::kInvalidInput, field + ": " + detail), field_(std::move(field)) {}

}  // namespace loopforge
