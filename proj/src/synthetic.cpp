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

#include "loopforge/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "loopforge/errors.hpp"
#include "loopforge/obj_io.hpp"

namespace loopforge {

using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

// Catmull-Rom through evenly spaced control radii, clamped to stay positive.
double profile_radius(const std::vector<double>& radii, double y) {
  const std::size_t k = radii.size();
  if (k == 1) return radii[0];
  const double u = std::clamp(y, 0.0, 1.0) * static_cast<double>(k - 1);
  const std::size_t i = std::min(static_cast<std::size_t>(u), k - 2);
  const double t = u - static_cast<double>(i);
  auto at = [&](long j) {
    return radii[static_cast<std::size_t>(std::clamp<long>(j, 0, static_cast<long>(k) - 1))];
  };
  const long li = static_cast<long>(i);
  const double p0 = at(li - 1), p1 = at(li), p2 = at(li + 1), p3 = at(li + 2);
  const double t2 = t * t, t3 = t2 * t;
  const double r = 0.5 * ((2 * p1) + (-p0 + p2) * t + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t2 +
                          (-p0 + 3 * p1 - 3 * p2 + p3) * t3);
  return std::clamp(r, 0.04, 0.46);
}

Mesh tube_handle(const HandleParams& h, double attach_radius, std::size_t path_samples,
                 std::size_t ring_samples) {
  const Vec3 radial{std::cos(h.angle), 0.0, std::sin(h.angle)};
  const Vec3 up{0, 1, 0};
  const Vec3 side{-std::sin(h.angle), 0.0, std::cos(h.angle)};
  const double y_mid = 0.5 * (h.y_low + h.y_high);
  const double half_height = 0.5 * (h.y_high - h.y_low);
  const double bulge = h.reach - h.tube_radius - attach_radius;

  Mesh mesh;
  std::vector<Vec3> centers;
  for (std::size_t m = 0; m < path_samples; ++m) {
    const double th = -0.5 * kPi + kPi * static_cast<double>(m) /
                                       static_cast<double>(path_samples - 1);
    const Vec3 c = (attach_radius + bulge * std::cos(th)) * radial +
                   (y_mid + half_height * std::sin(th)) * up;
    const Vec3 tangent =
        normalized(-bulge * std::sin(th) * radial + half_height * std::cos(th) * up);
    const Vec3 normal = cross(side, tangent);
    centers.push_back(c);
    for (std::size_t k = 0; k < ring_samples; ++k) {
      const double psi = 2 * kPi * static_cast<double>(k) / static_cast<double>(ring_samples);
      mesh.vertices.push_back(
          c + h.tube_radius * (std::cos(psi) * normal + std::sin(psi) * side));
    }
  }
  const auto ring = [&](std::size_t m, std::size_t k) {
    return static_cast<std::uint32_t>(m * ring_samples + k % ring_samples);
  };
  for (std::size_t m = 0; m + 1 < path_samples; ++m) {
    for (std::size_t k = 0; k < ring_samples; ++k) {
      mesh.faces.push_back({ring(m, k), ring(m, k + 1), ring(m + 1, k)});
      mesh.faces.push_back({ring(m, k + 1), ring(m + 1, k + 1), ring(m + 1, k)});
    }
  }
  const auto start_cap = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(centers.front());
  const auto end_cap = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.push_back(centers.back());
  const std::size_t last = path_samples - 1;
  for (std::size_t k = 0; k < ring_samples; ++k) {
    mesh.faces.push_back({start_cap, ring(0, k + 1), ring(0, k)});
    mesh.faces.push_back({end_cap, ring(last, k), ring(last, k + 1)});
  }
  return mesh;
}

struct Box {
  Vec3 lo, hi;
  bool contains(Vec3 p) const {
    return p.x > lo.x && p.x < hi.x && p.y > lo.y && p.y < hi.y && p.z > lo.z && p.z < hi.z;
  }
};

std::vector<double> unique_sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Boundary of the occupancy grid spanned by the box faces. Faces point from
// occupied cells toward empty ones.
Mesh box_union_surface(const std::vector<Box>& boxes) {
  std::vector<double> gx, gy, gz;
  for (const auto& b : boxes) {
    gx.insert(gx.end(), {b.lo.x, b.hi.x});
    gy.insert(gy.end(), {b.lo.y, b.hi.y});
    gz.insert(gz.end(), {b.lo.z, b.hi.z});
  }
  gx = unique_sorted(gx);
  gy = unique_sorted(gy);
  gz = unique_sorted(gz);
  const long nx = static_cast<long>(gx.size()) - 1;
  const long ny = static_cast<long>(gy.size()) - 1;
  const long nz = static_cast<long>(gz.size()) - 1;

  auto occupied = [&](long i, long j, long k) {
    if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return false;
    const Vec3 c{0.5 * (gx[i] + gx[i + 1]), 0.5 * (gy[j] + gy[j + 1]),
                 0.5 * (gz[k] + gz[k + 1])};
    return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(c); });
  };

  Mesh mesh;
  std::map<std::array<long, 3>, std::uint32_t> index;
  auto vertex = [&](long i, long j, long k) {
    auto [it, inserted] = index.try_emplace({i, j, k}, 0);
    if (inserted) {
      it->second = static_cast<std::uint32_t>(mesh.vertices.size());
      mesh.vertices.push_back({gx[i], gy[j], gz[k]});
    }
    return it->second;
  };
  // Quad corners given in counter-clockwise order seen from outside.
  auto quad = [&](std::array<std::uint32_t, 4> q) {
    mesh.faces.push_back({q[0], q[1], q[2]});
    mesh.faces.push_back({q[0], q[2], q[3]});
  };

  for (long i = -1; i < nx; ++i) {
    for (long j = -1; j < ny; ++j) {
      for (long k = -1; k < nz; ++k) {
        const bool here = occupied(i, j, k);
        // Face between (i,j,k) and (i+1,j,k) at x = gx[i+1].
        if (j >= 0 && k >= 0 && i + 1 <= nx && here != occupied(i + 1, j, k)) {
          const long x = i + 1;
          std::array<std::uint32_t, 4> q{vertex(x, j, k), vertex(x, j + 1, k),
                                         vertex(x, j + 1, k + 1), vertex(x, j, k + 1)};
          if (!here) std::reverse(q.begin(), q.end());
          quad(q);
        }
        if (i >= 0 && k >= 0 && j + 1 <= ny && here != occupied(i, j + 1, k)) {
          const long y = j + 1;
          std::array<std::uint32_t, 4> q{vertex(i, y, k), vertex(i, y, k + 1),
                                         vertex(i + 1, y, k + 1), vertex(i + 1, y, k)};
          if (!here) std::reverse(q.begin(), q.end());
          quad(q);
        }
        if (i >= 0 && j >= 0 && k + 1 <= nz && here != occupied(i, j, k + 1)) {
          const long z = k + 1;
          std::array<std::uint32_t, 4> q{vertex(i, j, z), vertex(i + 1, j, z),
                                         vertex(i + 1, j + 1, z), vertex(i, j + 1, z)};
          if (!here) std::reverse(q.begin(), q.end());
          quad(q);
        }
      }
    }
  }
  return mesh;
}

double json_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw Error(ErrorKind::kInvalidInput, std::string("config key '") + key + "' must be a number");
  }
  return j[key].get<double>();
}

std::size_t json_count(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const json& v = j[key];
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw Error(ErrorKind::kInvalidInput,
                std::string("config key '") + key + "' must be a non-negative integer");
  }
  return j[key].get<std::size_t>();
}

std::string shape_id(ShapeCategory category, std::size_t index) {
  std::ostringstream id;
  id << category_name(category) << '_' << std::setw(4) << std::setfill('0') << index;
  return id.str();
}

}  // namespace

ShapeCategory parse_category(const std::string& name) {
  if (name == "vase") return ShapeCategory::kVase;
  if (name == "sofa") return ShapeCategory::kSofa;
  if (name == "custom") return ShapeCategory::kCustom;
  throw Error(ErrorKind::kInvalidInput, "unknown category '" + name + "'");
}

std::string category_name(ShapeCategory category) {
  switch (category) {
    case ShapeCategory::kVase: return "vase";
    case ShapeCategory::kSofa: return "sofa";
    case ShapeCategory::kCustom: return "custom";
  }
  return "custom";
}

void DatasetConfig::validate() const {
  if (plane_count < 2) throw Error(ErrorKind::kInvalidInput, "plane_count must be >= 2");
  if (!(range_low < range_high)) {
    throw Error(ErrorKind::kInvalidInput, "plane_range needs low < high");
  }
  if (max_seq_len < plane_count) {
    throw Error(ErrorKind::kInvalidInput, "max_seq_len must be >= plane_count");
  }
  if (n_points < 3) throw Error(ErrorKind::kInvalidInput, "N must be >= 3");
  if (!(chain_tol > 0)) throw Error(ErrorKind::kInvalidInput, "chain_tol must be positive");
  if (category == ShapeCategory::kCustom && obj_dir.empty()) {
    throw Error(ErrorKind::kInvalidInput, "custom category needs obj_dir");
  }
}

DatasetConfig DatasetConfig::preset(ShapeCategory category) {
  DatasetConfig cfg;
  cfg.category = category;
  if (category == ShapeCategory::kSofa) {
    cfg.plane_count = 32;
    cfg.slice_axis = Axis::kX;
    cfg.max_seq_len = 121;
    cfg.eos_token = true;
  }
  cfg.range_low = 0.5 / static_cast<double>(cfg.plane_count);
  cfg.range_high = 1.0 - cfg.range_low;
  return cfg;
}

json to_json(const DatasetConfig& cfg) {
  return json{{"category", category_name(cfg.category)},
              {"num_shapes", cfg.num_shapes},
              {"plane_count", cfg.plane_count},
              {"slice_axis", std::string(1, axis_name(cfg.slice_axis))},
              {"plane_range", {cfg.range_low, cfg.range_high}},
              {"N", cfg.n_points},
              {"seed", cfg.seed},
              {"max_seq_len", cfg.max_seq_len},
              {"eos_token", cfg.eos_token},
              {"require_all_planes", cfg.require_all_planes},
              {"chain_tol", cfg.chain_tol},
              {"obj_dir", cfg.obj_dir}};
}

DatasetConfig dataset_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kInvalidInput, "dataset config must be an object");
  const auto category = parse_category(j.value("category", std::string("vase")));
  DatasetConfig cfg = DatasetConfig::preset(category);
  cfg.num_shapes = json_count(j, "num_shapes", cfg.num_shapes);
  cfg.plane_count = json_count(j, "plane_count", cfg.plane_count);
  if (j.contains("slice_axis")) {
    const auto name = j["slice_axis"].get<std::string>();
    if (name.size() != 1) throw Error(ErrorKind::kInvalidInput, "slice_axis must be x, y or z");
    cfg.slice_axis = parse_axis(name[0]);
  }
  if (j.contains("plane_range")) {
    const auto& r = j["plane_range"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw Error(ErrorKind::kInvalidInput, "plane_range must be [low, high]");
    }
    cfg.range_low = r[0].get<double>();
    cfg.range_high = r[1].get<double>();
  } else {
    cfg.range_low = 0.5 / static_cast<double>(std::max<std::size_t>(cfg.plane_count, 1));
    cfg.range_high = 1.0 - cfg.range_low;
  }
  cfg.n_points = json_count(j, "N", cfg.n_points);
  cfg.seed = json_count(j, "seed", cfg.seed);
  cfg.max_seq_len = json_count(j, "max_seq_len", cfg.max_seq_len);
  cfg.eos_token = j.value("eos_token", cfg.eos_token);
  cfg.require_all_planes = j.value("require_all_planes", cfg.require_all_planes);
  cfg.chain_tol = json_number(j, "chain_tol", cfg.chain_tol);
  cfg.obj_dir = j.value("obj_dir", cfg.obj_dir);
  cfg.validate();
  return cfg;
}

Mesh normalize_mesh(const Mesh& mesh) {
  if (mesh.vertices.empty()) throw Error(ErrorKind::kInvalidInput, "mesh is empty");
  Vec3 lo = mesh.vertices.front(), hi = lo;
  for (const auto& v : mesh.vertices) {
    lo = {std::min(lo.x, v.x), std::min(lo.y, v.y), std::min(lo.z, v.z)};
    hi = {std::max(hi.x, v.x), std::max(hi.y, v.y), std::max(hi.z, v.z)};
  }
  const Vec3 ext = hi - lo;
  const double longest = std::max({ext.x, ext.y, ext.z});
  if (!(longest > 0) || !std::isfinite(longest)) {
    throw Error(ErrorKind::kDegenerateLoop, "mesh has zero extent");
  }
  const double s = 1.0 / longest;
  const Vec3 center = 0.5 * (lo + hi);
  Mesh out = mesh;
  for (auto& v : out.vertices) {
    v = {(v.x - center.x) * s + 0.5, (v.y - center.y) * s + 0.5, (v.z - center.z) * s + 0.5};
  }
  return out;
}

PlaneList make_plane_schedule(Axis axis, std::size_t count, double low, double high) {
  if (count < 2) throw Error(ErrorKind::kInvalidInput, "plane schedule needs >= 2 planes");
  if (!(low < high)) throw Error(ErrorKind::kInvalidInput, "plane range needs low < high");
  const Vec3 n = axis_vector(axis);
  PlaneList list;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = low + (high - low) * static_cast<double>(i) / static_cast<double>(count - 1);
    list.planes.push_back(plane_basis(n, t * n));
  }
  return list;
}

PlaneList make_plane_schedule(const DatasetConfig& cfg) {
  return make_plane_schedule(cfg.slice_axis, cfg.plane_count, cfg.range_low, cfg.range_high);
}

VaseParams VaseParams::sample(std::mt19937_64& rng) {
  VaseParams p;
  const int controls = uniform_int(rng, 4, 8);
  const bool handled = uniform(rng, 0.0, 1.0) < 0.5;
  const double r_hi = handled ? 0.28 : 0.45;
  const double r_lo = handled ? 0.10 : 0.05;
  for (int i = 0; i < controls; ++i) p.control_radii.push_back(uniform(rng, r_lo, r_hi));
  if (handled) {
    const int count = uniform_int(rng, 1, 2);
    const double angle = uniform(rng, 0.0, 2 * kPi);
    for (int h = 0; h < count; ++h) {
      HandleParams hp;
      hp.angle = angle + kPi * h;
      hp.y_low = uniform(rng, 0.25, 0.45);
      hp.y_high = hp.y_low + uniform(rng, 0.2, 0.35);
      hp.reach = uniform(rng, 0.40, 0.46);
      hp.tube_radius = uniform(rng, 0.025, 0.035);
      p.handles.push_back(hp);
    }
  }
  return p;
}

json VaseParams::to_json() const {
  json handles_json = json::array();
  for (const auto& h : handles) {
    handles_json.push_back({{"angle", h.angle},
                            {"y_low", h.y_low},
                            {"y_high", h.y_high},
                            {"reach", h.reach},
                            {"tube_radius", h.tube_radius}});
  }
  return {{"generator", "vase"}, {"control_radii", control_radii}, {"handles", handles_json}};
}

Mesh generate_vase(const VaseParams& params) {
  std::vector<double> radii = params.control_radii;
  if (radii.empty()) radii = {0.2, 0.2, 0.2, 0.2};
  for (auto& r : radii) r = std::clamp(r, 0.05, 0.45);
  const std::size_t segments = std::max<std::size_t>(params.segments, 8);
  const std::size_t rings = std::max<std::size_t>(params.rings, 4);

  // Ring heights: the two rims at y = 0 and y = 1, interior rings offset by
  // half a step so they avoid evenly spaced slice heights.
  std::vector<double> heights{0.0};
  for (std::size_t j = 1; j <= rings; ++j) {
    heights.push_back((static_cast<double>(j) - 0.5) / static_cast<double>(rings));
  }
  heights.push_back(1.0);

  Mesh body;
  for (double y : heights) {
    const double r = profile_radius(radii, y);
    for (std::size_t k = 0; k < segments; ++k) {
      const double th = 2 * kPi * static_cast<double>(k) / static_cast<double>(segments);
      body.vertices.push_back({r * std::cos(th), y, r * std::sin(th)});
    }
  }
  const auto at = [&](std::size_t ring, std::size_t k) {
    return static_cast<std::uint32_t>(ring * segments + k % segments);
  };
  for (std::size_t a = 0; a + 1 < heights.size(); ++a) {
    for (std::size_t k = 0; k < segments; ++k) {
      body.faces.push_back({at(a, k), at(a + 1, k), at(a, k + 1)});
      body.faces.push_back({at(a, k + 1), at(a + 1, k), at(a + 1, k + 1)});
    }
  }
  const auto bottom = static_cast<std::uint32_t>(body.vertices.size());
  body.vertices.push_back({0, 0, 0});
  const auto top = static_cast<std::uint32_t>(body.vertices.size());
  body.vertices.push_back({0, 1, 0});
  const std::size_t last = heights.size() - 1;
  for (std::size_t k = 0; k < segments; ++k) {
    body.faces.push_back({bottom, at(0, k), at(0, k + 1)});
    body.faces.push_back({top, at(last, k + 1), at(last, k)});
  }

  for (const auto& h : params.handles) {
    HandleParams hp = h;
    hp.y_low = std::clamp(hp.y_low, 0.1, 0.85);
    hp.y_high = std::clamp(hp.y_high, hp.y_low + 0.1, 0.9);
    hp.tube_radius = std::clamp(hp.tube_radius, 0.01, 0.05);
    hp.reach = std::clamp(hp.reach, 0.2, 0.48);
    const double wall = std::min(profile_radius(radii, hp.y_low), profile_radius(radii, hp.y_high));
    const double attach = std::max(0.0, wall - 1.5 * hp.tube_radius);
    body.append(tube_handle(hp, attach, 32, 12));
  }
  return body;
}

Mesh generate_vase(std::mt19937_64& rng) { return generate_vase(VaseParams::sample(rng)); }

SofaParams SofaParams::clamped() const {
  SofaParams p = *this;
  p.length = std::clamp(p.length, 1.2, 3.0);
  p.depth = std::clamp(p.depth, 0.5, 0.9 * p.length);
  p.seat_height = std::clamp(p.seat_height, 0.2, 0.6);
  p.back_height = std::clamp(p.back_height, p.seat_height + 0.15, 1.1);
  p.back_thickness = std::clamp(p.back_thickness, 0.08, 0.5 * p.depth);
  p.armrests = std::clamp(p.armrests, 0, 2);
  p.arm_width = std::clamp(p.arm_width, 0.05, 0.2 * p.length);
  p.arm_height = std::clamp(p.arm_height, p.seat_height + 0.05, p.back_height - 0.05);
  p.extension_width = std::clamp(p.extension_width, 0.2, 0.5 * p.length);
  p.extension_depth = std::clamp(p.extension_depth, 0.2, std::max(0.2, 0.9 * p.length - p.depth));
  return p;
}

SofaParams SofaParams::sample(std::mt19937_64& rng) {
  SofaParams p;
  p.length = uniform(rng, 1.6, 2.4);
  p.depth = uniform(rng, 0.7, 1.0);
  p.seat_height = uniform(rng, 0.3, 0.5);
  p.back_height = uniform(rng, 0.75, 1.0);
  p.back_thickness = uniform(rng, 0.15, 0.3);
  p.armrests = uniform_int(rng, 0, 2);
  p.arm_width = uniform(rng, 0.1, 0.25);
  p.arm_height = uniform(rng, p.seat_height + 0.1, p.back_height - 0.05);
  p.l_extension = uniform(rng, 0.0, 1.0) < 0.3;
  p.extension_width = uniform(rng, 0.5, 0.8);
  p.extension_depth = uniform(rng, 0.4, 0.7);
  return p.clamped();
}

json SofaParams::to_json() const {
  return {{"generator", "sofa"},          {"length", length},
          {"depth", depth},               {"seat_height", seat_height},
          {"back_height", back_height},   {"back_thickness", back_thickness},
          {"armrests", armrests},         {"arm_width", arm_width},
          {"arm_height", arm_height},     {"l_extension", l_extension},
          {"extension_width", extension_width}, {"extension_depth", extension_depth}};
}

Mesh generate_sofa(const SofaParams& params) {
  const SofaParams p = params.clamped();
  std::vector<Box> boxes;
  boxes.push_back({{0, 0, 0}, {p.length, p.seat_height, p.depth}});
  boxes.push_back({{0, 0, p.depth - p.back_thickness}, {p.length, p.back_height, p.depth}});
  if (p.armrests >= 1) boxes.push_back({{0, 0, 0}, {p.arm_width, p.arm_height, p.depth}});
  if (p.armrests >= 2) {
    boxes.push_back({{p.length - p.arm_width, 0, 0}, {p.length, p.arm_height, p.depth}});
  }
  if (p.l_extension) {
    boxes.push_back({{p.length - p.extension_width, 0, -p.extension_depth},
                     {p.length, p.seat_height, 0}});
  }
  return box_union_surface(boxes);
}

Mesh generate_sofa(std::mt19937_64& rng) { return generate_sofa(SofaParams::sample(rng)); }

LoopSequence mesh_to_sequence(const Mesh& normalized, const DatasetConfig& cfg,
                              const PlaneList& planes) {
  const auto per_plane = slice_mesh(normalized, planes, cfg.chain_tol, cfg.n_points);
  if (cfg.require_all_planes) {
    for (std::size_t i = 0; i < per_plane.size(); ++i) {
      if (per_plane[i].empty()) {
        throw Error(ErrorKind::kEmptyShape, "shape misses plane " + std::to_string(i));
      }
    }
  }
  LoopSequence seq = encode_sequence(per_plane, planes, cfg.slice_axis);
  seq.n_points = cfg.n_points;
  if (cfg.eos_token) seq.tokens.push_back(eos_token(cfg.n_points));
  if (seq.tokens.size() > cfg.max_seq_len) {
    throw Error(ErrorKind::kLength, "sequence length " + std::to_string(seq.tokens.size()) +
                                        " exceeds max_seq_len " +
                                        std::to_string(cfg.max_seq_len));
  }
  return seq;
}

json Dataset::manifest() const {
  json ids = json::array();
  json files = json::array();
  json provenance = json::object();
  std::size_t total = 0, longest = 0;
  for (const auto& r : records) {
    ids.push_back(r.id);
    files.push_back(r.id + ".loopseq");
    provenance[r.id] = r.provenance;
    total += r.sequence.size();
    longest = std::max(longest, r.sequence.size());
  }
  const double mean =
      records.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(records.size());
  return {{"config", to_json(config)},
          {"ids", ids},
          {"files", files},
          {"provenance", provenance},
          {"stats",
           {{"num_shapes", records.size()},
            {"rejected", rejected},
            {"mean_seq_len", mean},
            {"max_seq_len", longest}}}};
}

Dataset build_dataset(const DatasetConfig& cfg) {
  cfg.validate();
  const PlaneList planes = make_plane_schedule(cfg);
  Dataset ds;
  ds.config = cfg;

  std::vector<std::filesystem::path> objs;
  std::size_t total = cfg.num_shapes;
  if (cfg.category == ShapeCategory::kCustom) {
    if (!std::filesystem::is_directory(cfg.obj_dir)) {
      throw Error(ErrorKind::kIo, "obj_dir is not a directory: " + cfg.obj_dir);
    }
    for (const auto& entry : std::filesystem::directory_iterator(cfg.obj_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".obj") {
        objs.push_back(entry.path());
      }
    }
    std::sort(objs.begin(), objs.end());
    if (total == 0 || total > objs.size()) total = objs.size();
  }
  if (total == 0) throw Error(ErrorKind::kDatasetQuality, "dataset would be empty");

  for (std::size_t i = 0; i < total; ++i) {
    std::seed_seq seq{static_cast<std::uint64_t>(cfg.seed), static_cast<std::uint64_t>(i)};
    std::mt19937_64 rng(seq);
    ShapeRecord rec;
    Mesh mesh;
    try {
      switch (cfg.category) {
        case ShapeCategory::kVase: {
          const auto params = VaseParams::sample(rng);
          rec.provenance = params.to_json();
          mesh = generate_vase(params);
          break;
        }
        case ShapeCategory::kSofa: {
          const auto params = SofaParams::sample(rng);
          rec.provenance = params.to_json();
          mesh = generate_sofa(params);
          break;
        }
        case ShapeCategory::kCustom:
          rec.provenance = {{"source", objs[i].string()}};
          mesh = load_obj(objs[i]);
          break;
      }
      rec.id = cfg.category == ShapeCategory::kCustom ? objs[i].stem().string()
                                                      : shape_id(cfg.category, i);
      rec.sequence = mesh_to_sequence(normalize_mesh(mesh), cfg, planes);
      ds.records.push_back(std::move(rec));
    } catch (const Error& e) {
      ++ds.rejected;
      ds.rejection_reasons.push_back(std::to_string(i) + ": " + e.what());
    }
  }
  if (2 * ds.rejected > total) {
    throw Error(ErrorKind::kDatasetQuality,
                "rejected " + std::to_string(ds.rejected) + " of " + std::to_string(total) +
                    " shapes; first reason: " + ds.rejection_reasons.front());
  }
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& r : dataset.records) save_loopseq(dir / (r.id + ".loopseq"), r.sequence);
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorKind::kIo, "cannot write manifest in " + dir.string());
  out << dataset.manifest().dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::kIo, "no manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::kParse, std::string("manifest: ") + e.what());
  }
  Dataset ds;
  ds.config = dataset_config_from_json(manifest.at("config"));
  ds.rejected = manifest.at("stats").value("rejected", std::size_t{0});
  const auto& provenance = manifest.value("provenance", json::object());
  for (const auto& id : manifest.at("ids")) {
    ShapeRecord rec;
    rec.id = id.get<std::string>();
    rec.sequence = load_loopseq(dir / (rec.id + ".loopseq"));
    rec.provenance = provenance.value(rec.id, json::object());
    ds.records.push_back(std::move(rec));
  }
  return ds;
}

}  // namespace loopforge
