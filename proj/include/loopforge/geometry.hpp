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

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace loopforge {

struct Vec3 {
  double x = 0, y = 0, z = 0;

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator*(Vec3 a, double s) { return s * a; }
  friend Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend bool operator==(Vec3, Vec3) = default;
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(Vec3 a) { return (1.0 / norm(a)) * a; }

struct Point2 {
  double x = 0, y = 0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Point2, Point2) = default;
};

inline double cross2(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double length(Point2 a) { return std::hypot(a.x, a.y); }

enum class Axis { kX = 0, kY = 1, kZ = 2 };

Vec3 axis_vector(Axis axis);
char axis_name(Axis axis);
/// Accepts "x", "y" or "z"; throws invalid-input otherwise.
Axis parse_axis(char name);

/// Indexed triangle set.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> faces;

  bool empty() const { return vertices.empty() || faces.empty(); }
  /// Throws invalid-input when a face index is out of range.
  void validate() const;
  /// Appends another mesh, re-indexing its faces.
  void append(const Mesh& other);
};

struct SlicePlane {
  Vec3 origin;
  Vec3 normal;
  Vec3 basis_x;
  Vec3 basis_y;

  friend bool operator==(const SlicePlane&, const SlicePlane&) = default;
};

/// Evenly spaced planes sharing one normal, ordered along it.
struct PlaneList {
  std::vector<SlicePlane> planes;

  std::size_t size() const { return planes.size(); }
  bool empty() const { return planes.empty(); }
  const SlicePlane& operator[](std::size_t i) const { return planes[i]; }
  /// Nonempty, shared normal, strictly increasing origins along the normal.
  void validate() const;
};

/// N points in the owning plane's (basis_x, basis_y) frame. The last point
/// connects back to the first; the start point is never duplicated.
struct Loop {
  std::vector<Point2> points;

  friend bool operator==(const Loop&, const Loop&) = default;
};

inline constexpr std::size_t kDefaultLoopPoints = 32;
inline constexpr double kDefaultChainTolerance = 1e-6;

/// Builds the in-plane frame: basis_x = normalize(a x n) where a is the world
/// axis least aligned with n, basis_y = n x basis_x.
SlicePlane plane_basis(Vec3 normal, Vec3 origin);

/// Throws invalid-input if p is farther than 1e-6 from the plane.
Point2 to_plane_coords(const SlicePlane& plane, Vec3 p);
Vec3 from_plane_coords(const SlicePlane& plane, Point2 q);

/// Raw closed polylines per plane, before resampling. Throws
/// NonManifoldSliceError when a chain cannot be closed.
std::vector<std::vector<std::vector<Point2>>> slice_polylines(
    const Mesh& mesh, const PlaneList& planes,
    double chain_tol = kDefaultChainTolerance);

/// Slices, resamples to n points and canonicalizes every loop.
std::vector<std::vector<Loop>> slice_mesh(
    const Mesh& mesh, const PlaneList& planes,
    double chain_tol = kDefaultChainTolerance,
    std::size_t n = kDefaultLoopPoints);

/// n points uniformly spaced by arc length along the closed polyline,
/// starting at its minimum (x+y) vertex, then canonicalized.
Loop resample_loop(std::span<const Point2> polyline,
                   std::size_t n = kDefaultLoopPoints);

/// Rotates so the minimum (x+y) point comes first (ties: min x, then min y)
/// and orients the loop clockwise using the first three points.
std::vector<Point2> canonicalize_loop(std::span<const Point2> points);

/// Shoelace formula; negative for clockwise loops.
double signed_area(std::span<const Point2> loop);
inline double signed_area(const Loop& loop) { return signed_area(loop.points); }

/// Even-odd ray casting. Points on the boundary count as inside.
bool point_in_loop(std::span<const Point2> loop, Point2 q);
inline bool point_in_loop(const Loop& loop, Point2 q) {
  return point_in_loop(loop.points, q);
}

/// Area centroid; falls back to the vertex mean for zero-area loops.
Point2 loop_centroid(std::span<const Point2> loop);

double perimeter(std::span<const Point2> loop);

}  // namespace loopforge
