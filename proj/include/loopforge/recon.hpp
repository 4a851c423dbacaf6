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
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <vector>

#include "loopforge/geometry.hpp"
#include "loopforge/loop_sequence.hpp"

namespace loopforge {

struct OrientedPointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> normals;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void append(const OrientedPointCloud& other);
  /// Equal lengths and unit normals within 1e-6.
  void validate() const;
};

constexpr double kDefaultBoundaryTilt = 0.5;

/// `samples` arc-length samples per loop, starting at the loop's first point.
/// Normals are outward edge normals (side chosen by the loop's signed area);
/// on the first and last occupied planes they are tilted toward -n and +n:
/// normalize((1 - tilt) * in_plane + tilt * (+-n)). Ordered by plane, loop,
/// then sample.
OrientedPointCloud estimate_normals(const LoopSequence& seq, const PlaneList& planes,
                                    std::size_t samples, double tilt = kDefaultBoundaryTilt);

/// Reflects the in-plane normal component of every loop whose centroid lies
/// inside an odd number of larger loops of the same plane. The cloud must be
/// laid out as estimate_normals produces it.
OrientedPointCloud flip_inner_loops(const std::vector<std::vector<Loop>>& per_plane,
                                    const PlaneList& planes, const OrientedPointCloud& cloud);

/// Rejection samples the even-odd interior of the first and last occupied
/// planes at `density` points per unit area. Bottom normals are -n, top +n.
/// A cap that accepts nothing gets its largest loop's centroid.
OrientedPointCloud cap_fill(const LoopSequence& seq, const PlaneList& planes, double density,
                            std::uint64_t seed = 0);

/// Loop samples with flipped inner loops plus both caps.
OrientedPointCloud oriented_cloud(const LoopSequence& seq, const PlaneList& planes,
                                  std::size_t samples, double density,
                                  double tilt = kDefaultBoundaryTilt, std::uint64_t seed = 0);

/// ASCII PLY with x y z nx ny nz, 9 significant digits.
void write_ply(std::ostream& out, const OrientedPointCloud& cloud);
void export_ply(const OrientedPointCloud& cloud, const std::filesystem::path& path);
OrientedPointCloud read_ply(std::istream& in);
OrientedPointCloud load_ply(const std::filesystem::path& path);

/// mean_a min_b |a - b|^2 + mean_b min_a |a - b|^2.
double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

}  // namespace loopforge
