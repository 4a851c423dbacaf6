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

#include <filesystem>
#include <iosfwd>

#include "loopforge/geometry.hpp"

namespace loopforge {

/// Reads `v` and `f` records; everything else is skipped. Face indices are
/// 1-based, negative indices count back from the latest vertex, and
/// `/vt/vn` sub-indices are ignored. Polygons are fan-triangulated.
Mesh read_obj(std::istream& in);
Mesh load_obj(const std::filesystem::path& path);

void write_obj(std::ostream& out, const Mesh& mesh);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);

}  // namespace loopforge
