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
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopforge/geometry.hpp"
#include "loopforge/loop_sequence.hpp"

namespace loopforge {

enum class ShapeCategory { kVase, kSofa, kCustom };

ShapeCategory parse_category(const std::string& name);
std::string category_name(ShapeCategory category);

struct DatasetConfig {
  ShapeCategory category = ShapeCategory::kVase;
  std::size_t num_shapes = 64;
  std::size_t plane_count = 40;
  Axis slice_axis = Axis::kY;
  double range_low = 0.0125;
  double range_high = 0.9875;
  std::size_t n_points = kDefaultLoopPoints;
  std::uint64_t seed = 0;
  std::size_t max_seq_len = 135;
  /// Append the all-zero, level-up-1 end token to every sequence.
  bool eos_token = false;
  /// Reject shapes that miss any plane (needed for plane-count stopping).
  bool require_all_planes = true;
  double chain_tol = kDefaultChainTolerance;
  /// OBJ directory for the custom category.
  std::string obj_dir;

  /// plane_count >= 2, low < high, max_seq_len >= plane_count.
  void validate() const;
  /// Category presets: vases 40 planes along y, max length 135; sofas 32
  /// planes along x, max length 121, end token on.
  static DatasetConfig preset(ShapeCategory category);
};

nlohmann::json to_json(const DatasetConfig& cfg);
/// Missing keys fall back to the category preset.
DatasetConfig dataset_config_from_json(const nlohmann::json& j);

/// Scales uniformly and translates so the bounding box fits [0,1]^3 with
/// its longest side spanning it, centered on (0.5, 0.5, 0.5).
Mesh normalize_mesh(const Mesh& mesh);

/// plane_count planes evenly spaced over [range_low, range_high] along the
/// slice axis.
PlaneList make_plane_schedule(const DatasetConfig& cfg);
PlaneList make_plane_schedule(Axis axis, std::size_t count, double low, double high);

struct HandleParams {
  double angle = 0;        // radians around the vertical axis
  double y_low = 0.3;      // attachment heights
  double y_high = 0.7;
  double reach = 0.44;     // outermost radial extent of the tube
  double tube_radius = 0.03;
};

struct VaseParams {
  std::vector<double> control_radii;  // bottom to top
  std::vector<HandleParams> handles;
  std::size_t segments = 48;
  std::size_t rings = 64;

  static VaseParams sample(std::mt19937_64& rng);
  nlohmann::json to_json() const;
};

/// Surface of revolution about +y (height 1) with optional tube handles
/// whose ends are buried in the body wall.
Mesh generate_vase(const VaseParams& params);
Mesh generate_vase(std::mt19937_64& rng);

struct SofaParams {
  double length = 2.0;      // along x
  double depth = 0.9;       // along z
  double seat_height = 0.45;
  double back_height = 0.9;
  double back_thickness = 0.2;
  int armrests = 2;         // 0, 1 or 2
  double arm_width = 0.2;
  double arm_height = 0.65;
  bool l_extension = false;
  double extension_width = 0.6;
  double extension_depth = 0.6;

  /// Clamps every field into a buildable range.
  SofaParams clamped() const;
  static SofaParams sample(std::mt19937_64& rng);
  nlohmann::json to_json() const;
};

/// Union of axis-aligned boxes (seat, backrest, armrests, optional chaise)
/// meshed as the closed boundary of their occupancy grid.
Mesh generate_sofa(const SofaParams& params);
Mesh generate_sofa(std::mt19937_64& rng);

struct ShapeRecord {
  std::string id;
  LoopSequence sequence;
  nlohmann::json provenance;
};

struct Dataset {
  DatasetConfig config;
  std::vector<ShapeRecord> records;
  std::size_t rejected = 0;
  std::vector<std::string> rejection_reasons;

  nlohmann::json manifest() const;
};

/// Slices one normalized mesh into a sequence using the config's schedule.
LoopSequence mesh_to_sequence(const Mesh& normalized, const DatasetConfig& cfg,
                              const PlaneList& planes);

/// Throws dataset-quality when more than half the shapes are rejected.
Dataset build_dataset(const DatasetConfig& cfg);
/// Writes `<id>.loopseq` files and `manifest.json`.
void write_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace loopforge
