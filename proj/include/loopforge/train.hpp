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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopforge/loop_sequence.hpp"
#include "loopforge/model.hpp"

namespace loopforge {

struct EpochRecord {
  std::size_t epoch = 0;
  /// Optimizer steps taken when the epoch ended.
  std::uint64_t step = 0;
  double recon = 0;
  double kl = 0;
  /// KL weight used by the epoch's last step.
  double beta_eff = 0;
  double lr = 0;

  nlohmann::json to_json() const;
};

struct TrainOptions {
  /// NDJSON epoch records go here when set.
  std::ostream* log = nullptr;
  /// Periodic and final checkpoints; empty disables writing.
  std::filesystem::path checkpoint_path;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Stored verbatim in every checkpoint header written by this run.
  nlohmann::json metadata = nlohmann::json::object();
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::uint64_t steps = 0;
};

/// Seeded shuffling, batched teacher-forced Adam steps on L_R + L_KL.
TrainResult train(LoopModel& model, const std::vector<LoopSequence>& data,
                  const TrainOptions& options = {});

constexpr int kCheckpointVersion = 1;

std::uint64_t fnv1a64(std::string_view bytes);

/// Header line (JSON) followed by little-endian float64 tensor data.
/// Written to a temporary file and renamed into place.
void save_checkpoint(const LoopModel& model, std::uint64_t step,
                     const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

struct Checkpoint {
  LoopModel model;
  std::uint64_t step = 0;
  /// Free-form object; the CLI records the training dataset config under "dataset".
  nlohmann::json metadata = nlohmann::json::object();
};
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Rejects a checkpoint whose config differs from the model's.
void load_checkpoint_into(LoopModel& model, const std::filesystem::path& path);

}  // namespace loopforge
