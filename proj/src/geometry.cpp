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

#include "loopforge/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <unordered_map>

#include "loopforge/errors.hpp"

namespace loopforge {

namespace {

constexpr double kUnitTolerance = 1e-9;
constexpr double kOnPlaneTolerance = 1e-6;
// Vertices closer than this to a slice plane are treated as lying on it.
constexpr double kCoplanarEpsilon = 1e-12;
constexpr double kCoplanarNudge = 1e-9;
constexpr double kCollinearArea = 1e-12;

bool is_canonical_before(Point2 a, Point2 b) {
  const double sa = a.x + a.y;
  const double sb = b.x + b.y;
  if (sa != sb) return sa < sb;
  if (a.x != b.x) return a.x < b.x;
  return a.y < b.y;
}

std::size_t canonical_start(std::span<const Point2> points) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (is_canonical_before(points[i], points[best])) best = i;
  }
  return best;
}

double triangle_area2(Point2 a, Point2 b, Point2 c) {
  return cross2(b - a, c - a);
}

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t i) {
    while (parent_[i] != i) {
      parent_[i] = parent_[parent_[i]];
      i = parent_[i];
    }
    return i;
  }

  // The smaller index always becomes the root so node identity is stable.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<std::size_t> parent_;
};

struct CellKey {
  long long i, j;
  friend bool operator==(CellKey, CellKey) = default;
};

struct CellKeyHash {
  std::size_t operator()(CellKey k) const noexcept {
    return std::hash<long long>{}(k.i * 73856093LL) ^
           std::hash<long long>{}(k.j * 19349663LL);
  }
};

std::vector<std::vector<Point2>> slice_one_plane(const Mesh& mesh,
                                                 const SlicePlane& plane,
                                                 std::size_t plane_index,
                                                 double chain_tol) {
  const std::size_t nv = mesh.vertices.size();
  std::vector<double> dist(nv);
  std::vector<Vec3> pos(mesh.vertices);
  for (std::size_t v = 0; v < nv; ++v) {
    double d = dot(mesh.vertices[v] - plane.origin, plane.normal);
    if (std::abs(d) <= kCoplanarEpsilon) {
      pos[v] = mesh.vertices[v] + kCoplanarNudge * plane.normal;
      d = dot(pos[v] - plane.origin, plane.normal);
    }
    dist[v] = d;
  }

  auto project = [&](Vec3 p) {
    const Vec3 r = p - plane.origin;
    return Point2{dot(r, plane.basis_x), dot(r, plane.basis_y)};
  };
  // Computed with the lower vertex index first so the two faces sharing an
  // edge produce bit-identical points.
  auto edge_point = [&](std::uint32_t a, std::uint32_t b) {
    if (b < a) std::swap(a, b);
    const double t = dist[a] / (dist[a] - dist[b]);
    return project(pos[a] + t * (pos[b] - pos[a]));
  };

  std::vector<Point2> endpoints;
  for (const auto& f : mesh.faces) {
    Point2 hits[3];
    int count = 0;
    for (int e = 0; e < 3; ++e) {
      const std::uint32_t a = f[e];
      const std::uint32_t b = f[(e + 1) % 3];
      if ((dist[a] > 0) != (dist[b] > 0)) hits[count++] = edge_point(a, b);
    }
    if (count == 2) {
      endpoints.push_back(hits[0]);
      endpoints.push_back(hits[1]);
    }
  }
  if (endpoints.empty()) return {};

  // Weld endpoints that lie within chain_tol of each other.
  DisjointSet welds(endpoints.size());
  std::unordered_map<CellKey, std::vector<std::size_t>, CellKeyHash> grid;
  auto cell_of = [&](Point2 p) {
    return CellKey{static_cast<long long>(std::floor(p.x / chain_tol)),
                   static_cast<long long>(std::floor(p.y / chain_tol))};
  };
  const double tol2 = chain_tol * chain_tol;
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    const CellKey c = cell_of(endpoints[i]);
    for (long long di = -1; di <= 1; ++di) {
      for (long long dj = -1; dj <= 1; ++dj) {
        auto it = grid.find(CellKey{c.i + di, c.j + dj});
        if (it == grid.end()) continue;
        for (std::size_t other : it->second) {
          const Point2 d = endpoints[i] - endpoints[other];
          if (d.x * d.x + d.y * d.y <= tol2) welds.unite(i, other);
        }
      }
    }
    grid[c].push_back(i);
  }

  // Adjacency over welded nodes; zero-length segments are dropped.
  std::unordered_map<std::size_t, std::vector<std::size_t>> adjacency;
  std::vector<std::size_t> node_order;
  auto touch = [&](std::size_t node) -> std::vector<std::size_t>& {
    auto [it, inserted] = adjacency.try_emplace(node);
    if (inserted) node_order.push_back(node);
    return it->second;
  };
  for (std::size_t s = 0; s + 1 < endpoints.size(); s += 2) {
    const std::size_t a = welds.find(s);
    const std::size_t b = welds.find(s + 1);
    if (a == b) continue;
    touch(a).push_back(b);
    touch(b).push_back(a);
  }

  for (std::size_t node : node_order) {
    const std::size_t degree = adjacency[node].size();
    if (degree != 2) {
      std::ostringstream msg;
      msg << (degree < 2 ? "open contour" : "branching contour") << " near ("
          << endpoints[node].x << ", " << endpoints[node].y << "), degree "
          << degree;
      throw NonManifoldSliceError(plane_index, msg.str());
    }
  }

  std::vector<std::vector<Point2>> loops;
  std::unordered_map<std::size_t, bool> visited;
  for (std::size_t start : node_order) {
    if (visited[start]) continue;
    std::vector<Point2> loop;
    std::size_t prev = std::numeric_limits<std::size_t>::max();
    std::size_t cur = start;
    do {
      visited[cur] = true;
      loop.push_back(endpoints[cur]);
      const auto& nbrs = adjacency[cur];
      const std::size_t next = (nbrs[0] != prev) ? nbrs[0] : nbrs[1];
      prev = cur;
      cur = next;
    } while (cur != start);
    if (loop.size() >= 3) loops.push_back(std::move(loop));
  }
  return loops;
}

}  // namespace

Vec3 axis_vector(Axis axis) {
  switch (axis) {
    case Axis::kX: return {1, 0, 0};
    case Axis::kY: return {0, 1, 0};
    case Axis::kZ: return {0, 0, 1};
  }
  return {0, 1, 0};
}

char axis_name(Axis axis) {
  switch (axis) {
    case Axis::kX: return 'x';
    case Axis::kY: return 'y';
    case Axis::kZ: return 'z';
  }
  return '?';
}

Axis parse_axis(char name) {
  switch (name) {
    case 'x': case 'X': return Axis::kX;
    case 'y': case 'Y': return Axis::kY;
    case 'z': case 'Z': return Axis::kZ;
  }
  throw Error(ErrorKind::kInvalidInput,
              std::string("unknown axis '") + name + "', expected x, y or z");
}

void Mesh::validate() const {
  const auto n = vertices.size();
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (auto idx : faces[f]) {
      if (idx >= n) {
        throw Error(ErrorKind::kInvalidInput,
                    "face " + std::to_string(f) + " references vertex " +
                        std::to_string(idx) + " of " + std::to_string(n));
      }
    }
  }
}

void Mesh::append(const Mesh& other) {
  const auto base = static_cast<std::uint32_t>(vertices.size());
  vertices.insert(vertices.end(), other.vertices.begin(), other.vertices.end());
  for (const auto& f : other.faces) {
    faces.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
}

void PlaneList::validate() const {
  if (planes.empty()) {
    throw Error(ErrorKind::kInvalidInput, "plane list is empty");
  }
  const Vec3 n = planes.front().normal;
  double last = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (norm(planes[i].normal - n) > kUnitTolerance) {
      throw Error(ErrorKind::kInvalidInput,
                  "plane " + std::to_string(i) + " normal differs from plane 0");
    }
    const double h = dot(planes[i].origin, n);
    if (!(h > last)) {
      throw Error(ErrorKind::kInvalidInput,
                  "plane origins not strictly increasing at plane " +
                      std::to_string(i));
    }
    last = h;
  }
}

SlicePlane plane_basis(Vec3 normal, Vec3 origin) {
  const double len = norm(normal);
  if (!(len > 0) || !std::isfinite(len)) {
    throw Error(ErrorKind::kInvalidInput, "plane normal has zero length");
  }
  if (std::abs(len - 1.0) > kUnitTolerance) {
    throw Error(ErrorKind::kInvalidInput, "plane normal is not unit length");
  }
  const double ax[3] = {std::abs(normal.x), std::abs(normal.y), std::abs(normal.z)};
  int least = 0;
  for (int i = 1; i < 3; ++i) {
    if (ax[i] < ax[least]) least = i;
  }
  const Vec3 a = axis_vector(static_cast<Axis>(least));
  SlicePlane plane;
  plane.origin = origin;
  plane.normal = normal;
  plane.basis_x = normalized(cross(a, normal));
  plane.basis_y = cross(normal, plane.basis_x);
  return plane;
}

Point2 to_plane_coords(const SlicePlane& plane, Vec3 p) {
  const Vec3 r = p - plane.origin;
  const double offset = dot(r, plane.normal);
  if (!(std::abs(offset) < kOnPlaneTolerance)) {
    std::ostringstream msg;
    msg << "point lies " << offset << " off the slice plane";
    throw Error(ErrorKind::kInvalidInput, msg.str());
  }
  return {dot(r, plane.basis_x), dot(r, plane.basis_y)};
}

Vec3 from_plane_coords(const SlicePlane& plane, Point2 q) {
  return plane.origin + q.x * plane.basis_x + q.y * plane.basis_y;
}

std::vector<std::vector<std::vector<Point2>>> slice_polylines(
    const Mesh& mesh, const PlaneList& planes, double chain_tol) {
  if (mesh.empty()) throw Error(ErrorKind::kInvalidInput, "mesh is empty");
  if (!(chain_tol > 0)) {
    throw Error(ErrorKind::kInvalidInput, "chain tolerance must be positive");
  }
  mesh.validate();
  std::vector<std::vector<std::vector<Point2>>> out;
  out.reserve(planes.size());
  for (std::size_t i = 0; i < planes.size(); ++i) {
    out.push_back(slice_one_plane(mesh, planes[i], i, chain_tol));
  }
  return out;
}

std::vector<std::vector<Loop>> slice_mesh(const Mesh& mesh,
                                          const PlaneList& planes,
                                          double chain_tol, std::size_t n) {
  auto polylines = slice_polylines(mesh, planes, chain_tol);
  std::vector<std::vector<Loop>> out(polylines.size());
  for (std::size_t i = 0; i < polylines.size(); ++i) {
    for (const auto& poly : polylines[i]) {
      out[i].push_back(resample_loop(poly, n));
    }
  }
  return out;
}

double perimeter(std::span<const Point2> loop) {
  double total = 0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    total += length(loop[(i + 1) % loop.size()] - loop[i]);
  }
  return total;
}

Loop resample_loop(std::span<const Point2> polyline, std::size_t n) {
  std::vector<Point2> distinct(polyline.begin(), polyline.end());
  std::sort(distinct.begin(), distinct.end(), is_canonical_before);
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  const double total = perimeter(polyline);
  if (distinct.size() < 3 || !(total > 0) || !std::isfinite(total)) {
    throw Error(ErrorKind::kDegenerateLoop,
                "loop needs at least 3 distinct points and positive perimeter");
  }
  if (n < 3) throw Error(ErrorKind::kInvalidInput, "loop point count must be >= 3");

  const std::size_t m = polyline.size();
  const std::size_t start = canonical_start(polyline);
  std::vector<Point2> ring(m);
  for (std::size_t i = 0; i < m; ++i) ring[i] = polyline[(start + i) % m];

  std::vector<Point2> samples;
  samples.reserve(n);
  std::size_t edge = 0;
  double edge_begin = 0;  // arc length at ring[edge]
  double edge_len = length(ring[1 % m] - ring[0]);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(n);
    while (edge + 1 < m && s > edge_begin + edge_len) {
      edge_begin += edge_len;
      ++edge;
      edge_len = length(ring[(edge + 1) % m] - ring[edge]);
    }
    const Point2 a = ring[edge];
    const Point2 b = ring[(edge + 1) % m];
    const double t = edge_len > 0 ? std::clamp((s - edge_begin) / edge_len, 0.0, 1.0) : 0.0;
    samples.push_back(t == 0.0 ? a : a + t * (b - a));
  }
  return Loop{canonicalize_loop(samples)};
}

std::vector<Point2> canonicalize_loop(std::span<const Point2> points) {
  const std::size_t n = points.size();
  if (n < 3) {
    throw Error(ErrorKind::kDegenerateLoop, "canonicalization needs >= 3 points");
  }
  const std::size_t start = canonical_start(points);
  std::vector<Point2> forward(n);
  std::vector<Point2> reversed(n);
  for (std::size_t i = 0; i < n; ++i) {
    forward[i] = points[(start + i) % n];
    reversed[i] = points[(start + n - i) % n];
  }
  // Both candidates share the start point. Prefer the one whose first three
  // points turn clockwise; when that does not single one out, use the sign of
  // the whole-loop area. Deciding over the pair keeps this idempotent.
  auto turn = [](const std::vector<Point2>& p) {
    const double a = triangle_area2(p[0], p[1], p[2]);
    if (std::abs(a) < kCollinearArea) return 0;
    return a > 0 ? 1 : -1;
  };
  const int tf = turn(forward);
  const int tr = turn(reversed);
  if (tf == -1 && tr != -1) return forward;
  if (tr == -1 && tf != -1) return reversed;
  return signed_area(forward) > 0 ? reversed : forward;
}

double signed_area(std::span<const Point2> loop) {
  double twice = 0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    twice += cross2(loop[i], loop[(i + 1) % loop.size()]);
  }
  return 0.5 * twice;
}

bool point_in_loop(std::span<const Point2> loop, Point2 q) {
  const std::size_t n = loop.size();
  if (n == 0) return false;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = loop[i];
    const Point2 b = loop[(i + 1) % n];
    const Point2 ab = b - a;
    const double len = length(ab);
    const double c = cross2(ab, q - a);
    if (std::abs(c) <= 1e-12 * std::max(len, 1.0) &&
        q.x >= std::min(a.x, b.x) - 1e-12 && q.x <= std::max(a.x, b.x) + 1e-12 &&
        q.y >= std::min(a.y, b.y) - 1e-12 && q.y <= std::max(a.y, b.y) + 1e-12) {
      return true;
    }
  }
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = loop[i];
    const Point2 b = loop[j];
    if ((a.y > q.y) != (b.y > q.y)) {
      const double x_at = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (q.x < x_at) inside = !inside;
    }
  }
  return inside;
}

Point2 loop_centroid(std::span<const Point2> loop) {
  const std::size_t n = loop.size();
  if (n == 0) return {};
  double a2 = 0, cx = 0, cy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 p = loop[i];
    const Point2 q = loop[(i + 1) % n];
    const double c = cross2(p, q);
    a2 += c;
    cx += (p.x + q.x) * c;
    cy += (p.y + q.y) * c;
  }
  if (std::abs(a2) < 1e-300) {
    Point2 mean;
    for (const auto& p : loop) mean = mean + p;
    return (1.0 / static_cast<double>(n)) * mean;
  }
  return {cx / (3.0 * a2), cy / (3.0 * a2)};
}

}  // namespace loopforge
