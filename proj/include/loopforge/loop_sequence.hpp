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
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "loopforge/geometry.hpp"

namespace loopforge {

/// One sequence time step: 2N plane coordinates and the level-up flag.
struct LoopToken {
  std::vector<double> coords;  // x_1, y_1, ..., x_N, y_N
  int level_up = 0;

  std::size_t n_points() const { return coords.size() / 2; }
  friend bool operator==(const LoopToken&, const LoopToken&) = default;
};

/// Ordered tokens for one shape, plus the slice schedule they refer to.
struct LoopSequence {
  std::size_t n_points = kDefaultLoopPoints;
  std::size_t plane_count = 0;
  /// Optional: empty when the schedule is unknown. When present its size
  /// equals plane_count.
  std::optional<Axis> axis;
  PlaneList planes;
  std::vector<LoopToken> tokens;

  std::size_t size() const { return tokens.size(); }
  std::size_t level_up_count() const;
  friend bool operator==(const LoopSequence& a, const LoopSequence& b);
};

inline constexpr int kLoopSeqVersion = 1;

std::vector<double> token_pack(const Loop& loop, int level_up);
/// Throws a shape error unless v.size() == 2n+1 and the flag is 0 or 1.
std::pair<Loop, int> token_unpack(std::span<const double> v, std::size_t n);

LoopToken make_token(const Loop& loop, int level_up);
Loop token_loop(const LoopToken& token);

/// All coordinates zero, level-up 1.
LoopToken eos_token(std::size_t n);
bool is_eos_token(const LoopToken& token);

/// Planes with k loops emit k tokens (first flagged 1), loops ordered by
/// descending |area|; empty planes emit nothing. Throws empty-shape when
/// every plane is empty.
LoopSequence encode_sequence(const std::vector<std::vector<Loop>>& per_plane,
                             std::size_t plane_count);
LoopSequence encode_sequence(const std::vector<std::vector<Loop>>& per_plane,
                             const PlaneList& planes, std::optional<Axis> axis);

/// Plane index of every token (a trailing EOS token is excluded).
std::vector<std::size_t> plane_assignment(const LoopSequence& seq,
                                          std::size_t plane_limit);

/// Recovers per-plane loops. Throws orphan-loop when the first flag is 0 and
/// plane-overflow when there are more level-ups than planes.
std::vector<std::vector<Loop>> decode_sequence(const LoopSequence& seq,
                                               const PlaneList& planes);
std::vector<std::vector<Loop>> decode_sequence(const LoopSequence& seq);

/// Checks token shapes, finiteness, flags, the first-flag rule, the level-up
/// budget and the length limit.
void validate_sequence(const LoopSequence& seq,
                       std::size_t max_len = std::numeric_limits<std::size_t>::max());

/// The .loopseq NDJSON format: one header record, then one record per token.
void serialize(const LoopSequence& seq, std::ostream& out);
std::string serialize(const LoopSequence& seq);
LoopSequence deserialize(std::istream& in);
LoopSequence deserialize_string(const std::string& text);

void save_loopseq(const std::filesystem::path& path, const LoopSequence& seq);
LoopSequence load_loopseq(const std::filesystem::path& path);

/// Every loop vertex lifted to 3D through its plane.
std::vector<Vec3> sequence_points(const LoopSequence& seq);

}  // namespace loopforge
