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

#include "loopforge/recon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <string>

#include "loopforge/errors.hpp"

namespace loopforge {

void OrientedPointCloud::append(const OrientedPointCloud& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
  normals.insert(normals.end(), other.normals.begin(), other.normals.end());
}

void OrientedPointCloud::validate() const {
  if (points.size() != normals.size()) {
    throw Error(ErrorKind::kShape, "point cloud has " + std::to_string(points.size()) +
                                       " points and " + std::to_string(normals.size()) +
                                       " normals");
  }
  for (std::size_t i = 0; i < normals.size(); ++i) {
    if (std::abs(norm(normals[i]) - 1.0) > 1e-6) {
      throw Error(ErrorKind::kNumericalHealth, "normal " + std::to_string(i) + " is not unit");
    }
  }
}

namespace {

const PlaneList& schedule(const LoopSequence& seq, const PlaneList& planes) {
  const PlaneList& p = planes.empty() ? seq.planes : planes;
  if (p.empty()) throw Error(ErrorKind::kInvalidInput, "no plane schedule for the sequence");
  return p;
}

struct ArcSample {
  Point2 point;
  std::size_t edge;
};

std::vector<ArcSample> arc_samples(const std::vector<Point2>& loop, std::size_t m) {
  const std::size_t n = loop.size();
  std::vector<double> cum(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + length(loop[(i + 1) % n] - loop[i]);
  const double total = cum[n];
  std::vector<ArcSample> out;
  std::size_t e = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double s = total * static_cast<double>(k) / static_cast<double>(m);
    while (e + 1 < n && cum[e + 1] <= s) ++e;
    const double len = cum[e + 1] - cum[e];
    const double t = len > 0 ? (s - cum[e]) / len : 0.0;
    const Point2 a = loop[e], b = loop[(e + 1) % n];
    out.push_back({{a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)}, e});
  }
  return out;
}

// Outward unit normal of edge e: right of travel for counter-clockwise loops.
Point2 edge_normal(const std::vector<Point2>& loop, std::size_t e, bool ccw) {
  const std::size_t n = loop.size();
  std::size_t i = e;
  Point2 tangent = loop[(i + 1) % n] - loop[i];
  // Skip zero-length edges.
  for (std::size_t k = 0; k < n && length(tangent) == 0; ++k) {
    i = (i + 1) % n;
    tangent = loop[(i + 1) % n] - loop[i];
  }
  const double len = length(tangent);
  if (len == 0) return {1, 0};
  const Point2 right{tangent.y / len, -tangent.x / len};
  return ccw ? right : Point2{-right.x, -right.y};
}

Vec3 lift(const SlicePlane& plane, Point2 v) { return v.x * plane.basis_x + v.y * plane.basis_y; }

std::pair<std::size_t, std::size_t> occupied_range(const std::vector<std::vector<Loop>>& groups) {
  std::size_t first = groups.size(), last = 0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    if (!groups[i].empty()) {
      first = std::min(first, i);
      last = i;
    }
  }
  return {first, last};
}

}  // namespace

OrientedPointCloud estimate_normals(const LoopSequence& seq, const PlaneList& planes,
                                    std::size_t samples, double tilt) {
  OrientedPointCloud cloud;
  if (seq.tokens.empty()) return cloud;
  if (samples == 0) throw Error(ErrorKind::kInvalidInput, "samples per loop must be positive");
  if (!(tilt >= 0 && tilt <= 1)) throw Error(ErrorKind::kInvalidInput, "tilt must lie in [0, 1]");
  const PlaneList& P = schedule(seq, planes);
  const auto groups = decode_sequence(seq, P);
  const auto [first, last] = occupied_range(groups);
  for (std::size_t p = 0; p < groups.size(); ++p) {
    const SlicePlane& plane = P[p];
    double sign = 0;
    if (first != last) {
      if (p == first) sign = -1;
      if (p == last) sign = 1;
    }
    for (const auto& loop : groups[p]) {
      const bool ccw = signed_area(loop) > 0;
      for (const auto& s : arc_samples(loop.points, samples)) {
        Vec3 n = lift(plane, edge_normal(loop.points, s.edge, ccw));
        if (sign != 0) n = normalized((1.0 - tilt) * n + (tilt * sign) * plane.normal);
        cloud.points.push_back(from_plane_coords(plane, s.point));
        cloud.normals.push_back(n);
      }
    }
  }
  return cloud;
}

OrientedPointCloud flip_inner_loops(const std::vector<std::vector<Loop>>& per_plane,
                                    const PlaneList& planes, const OrientedPointCloud& cloud) {
  std::size_t loops = 0;
  for (const auto& g : per_plane) loops += g.size();
  if (loops == 0) return cloud;
  if (cloud.size() % loops != 0) {
    throw Error(ErrorKind::kShape, "cloud of " + std::to_string(cloud.size()) +
                                       " points does not split over " + std::to_string(loops) +
                                       " loops");
  }
  if (planes.size() < per_plane.size()) {
    throw Error(ErrorKind::kShape, "plane schedule shorter than the loop groups");
  }
  const std::size_t m = cloud.size() / loops;
  OrientedPointCloud out = cloud;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < per_plane.size(); ++p) {
    const auto& group = per_plane[p];
    const Vec3 n = planes[p].normal;
    for (std::size_t i = 0; i < group.size(); ++i) {
      const double area = std::abs(signed_area(group[i]));
      const Point2 c = loop_centroid(group[i].points);
      std::size_t depth = 0;
      for (std::size_t j = 0; j < group.size(); ++j) {
        if (j != i && std::abs(signed_area(group[j])) > area && point_in_loop(group[j], c)) {
          ++depth;
        }
      }
      if (depth % 2 == 1) {
        for (std::size_t k = offset; k < offset + m; ++k) {
          const Vec3 v = out.normals[k];
          out.normals[k] = (2.0 * dot(v, n)) * n - v;
        }
      }
      offset += m;
    }
  }
  return out;
}

OrientedPointCloud cap_fill(const LoopSequence& seq, const PlaneList& planes, double density,
                            std::uint64_t seed) {
  OrientedPointCloud cloud;
  if (seq.tokens.empty()) return cloud;
  if (!(density > 0) || !std::isfinite(density)) {
    throw Error(ErrorKind::kInvalidInput, "cap density must be positive");
  }
  const PlaneList& P = schedule(seq, planes);
  const auto groups = decode_sequence(seq, P);
  const auto [first, last] = occupied_range(groups);
  std::mt19937_64 rng(seed);
  for (const auto& [p, sign] : {std::pair{first, -1.0}, std::pair{last, 1.0}}) {
    const auto& group = groups[p];
    const SlicePlane& plane = P[p];
    const Vec3 n = sign * plane.normal;
    double lo_x = INFINITY, lo_y = INFINITY, hi_x = -INFINITY, hi_y = -INFINITY;
    for (const auto& loop : group) {
      for (const auto& q : loop.points) {
        lo_x = std::min(lo_x, q.x);
        lo_y = std::min(lo_y, q.y);
        hi_x = std::max(hi_x, q.x);
        hi_y = std::max(hi_y, q.y);
      }
    }
    const double box = (hi_x - lo_x) * (hi_y - lo_y);
    const auto candidates = static_cast<std::size_t>(std::llround(box * density));
    std::uniform_real_distribution<double> ux(lo_x, hi_x), uy(lo_y, hi_y);
    std::size_t accepted = 0;
    for (std::size_t k = 0; k < candidates; ++k) {
      const Point2 q{ux(rng), uy(rng)};
      std::size_t inside = 0;
      for (const auto& loop : group) inside += point_in_loop(loop, q) ? 1 : 0;
      if (inside % 2 == 1) {
        cloud.points.push_back(from_plane_coords(plane, q));
        cloud.normals.push_back(n);
        ++accepted;
      }
    }
    if (accepted == 0) {
      const auto largest = std::max_element(group.begin(), group.end(), [](const Loop& a, const Loop& b) {
        return std::abs(signed_area(a)) < std::abs(signed_area(b));
      });
      cloud.points.push_back(from_plane_coords(plane, loop_centroid(largest->points)));
      cloud.normals.push_back(n);
    }
  }
  return cloud;
}

OrientedPointCloud oriented_cloud(const LoopSequence& seq, const PlaneList& planes,
                                  std::size_t samples, double density, double tilt,
                                  std::uint64_t seed) {
  OrientedPointCloud cloud;
  if (seq.tokens.empty()) return cloud;
  const PlaneList& P = schedule(seq, planes);
  cloud = flip_inner_loops(decode_sequence(seq, P), P, estimate_normals(seq, P, samples, tilt));
  cloud.append(cap_fill(seq, P, density, seed));
  return cloud;
}

void write_ply(std::ostream& out, const OrientedPointCloud& cloud) {
  cloud.validate();
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size() << "\n";
  for (const char* name : {"x", "y", "z", "nx", "ny", "nz"}) {
    out << "property double " << name << "\n";
  }
  out << "end_header\n";
  char buf[256];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.points[i], n = cloud.normals[i];
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g %.9g %.9g %.9g\n", p.x, p.y, p.z, n.x, n.y,
                  n.z);
    out << buf;
  }
}

void export_ply(const OrientedPointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_ply(out, cloud);
  if (!out) throw Error(ErrorKind::kIo, "failed writing " + path.string());
}

OrientedPointCloud read_ply(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError(line_no + 1, "unexpected end of PLY file");
    ++line_no;
    return line;
  };
  if (next() != "ply") throw ParseError(line_no, "missing ply magic");
  if (next() != "format ascii 1.0") throw ParseError(line_no, "only ascii 1.0 is supported");
  std::size_t count = 0;
  std::vector<std::string> props;
  bool have_count = false;
  while (next() != "end_header") {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "element") {
      std::string kind;
      ls >> kind >> count;
      if (kind != "vertex" || !ls) throw ParseError(line_no, "expected element vertex <n>");
      have_count = true;
    } else if (word == "property") {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (word != "comment") {
      throw ParseError(line_no, "unexpected header line: " + line);
    }
  }
  if (!have_count) throw ParseError(line_no, "no vertex element");
  if (props != std::vector<std::string>{"x", "y", "z", "nx", "ny", "nz"}) {
    throw ParseError(line_no, "expected properties x y z nx ny nz");
  }
  OrientedPointCloud cloud;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream ls(next());
    Vec3 p, n;
    if (!(ls >> p.x >> p.y >> p.z >> n.x >> n.y >> n.z)) {
      throw ParseError(line_no, "vertex needs six numbers");
    }
    cloud.points.push_back(p);
    cloud.normals.push_back(n);
  }
  return cloud;
}

OrientedPointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return read_ply(in);
}

namespace {

double directed(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double total = 0;
  for (const auto& p : a) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : b) {
      const Vec3 d = p - q;
      best = std::min(best, dot(d, d));
    }
    total += best;
  }
  return total / static_cast<double>(a.size());
}

}  // namespace

double chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) {
    throw Error(ErrorKind::kInvalidInput, "chamfer distance needs two non-empty clouds");
  }
  return directed(a, b) + directed(b, a);
}

}  // namespace loopforge
