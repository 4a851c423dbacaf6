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
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopforge/geometry.hpp"
#include "loopforge/loop_sequence.hpp"
#include "loopforge/model.hpp"
#include "loopforge/synthetic.hpp"

namespace loopforge {

struct StopRule {
  enum class Kind { kPlaneCount, kEosToken };
  Kind kind = Kind::kPlaneCount;
  /// PlaneCount: number of planes k.
  std::size_t planes = 40;
  /// EosToken: max |coord| threshold.
  double eps = 0.01;

  static StopRule plane_count(std::size_t k) { return {Kind::kPlaneCount, k, 0.01}; }
  static StopRule eos(std::size_t planes, double eps = 0.01) { return {Kind::kEosToken, planes, eps}; }

  nlohmann::json to_json() const;
  static StopRule from_json(const nlohmann::json& j);
  bool operator==(const StopRule&) const = default;
};

enum class SessionStatus { kRunning, kDone, kAborted };
std::string status_name(SessionStatus s);

/// 1-based token index; "next" resolves to emitted length + 1 on registration.
struct EditOp {
  enum class Kind { kTranslate, kScale, kReplace, kInsert, kFreezePrefix };
  Kind kind = Kind::kTranslate;
  std::optional<std::size_t> step;
  double dx = 0;
  double dy = 0;
  double s = 1;
  /// Replace uses one entry, Insert one per consecutive step.
  std::vector<LoopToken> tokens;

  static EditOp translate(std::optional<std::size_t> step, double dx, double dy);
  static EditOp scale(std::optional<std::size_t> step, double s);
  static EditOp replace(std::optional<std::size_t> step, LoopToken token);
  static EditOp insert(std::optional<std::size_t> step, std::vector<LoopToken> tokens);
  static EditOp freeze_prefix(std::size_t t);

  nlohmann::json to_json() const;
};

/// Edit script: [{"step": int|"next", "op": "translate"|"scale"|"replace"|
/// "insert"|"freeze", ...}]. Loops with exactly N points are taken verbatim,
/// other polylines are resampled to N canonical points. Errors name the field.
std::vector<EditOp> parse_edit_script(const nlohmann::json& script, std::size_t n_points);
nlohmann::json edit_script_json(const std::vector<EditOp>& edits);

struct SessionOptions {
  StopRule stop;
  /// Plane schedule recorded on the emitted sequence; may be empty.
  PlaneList planes;
  std::optional<Axis> axis;
};

struct StepResult {
  /// Absent when the stop rule consumed the token.
  std::optional<LoopToken> token;
  double flag_probability = 0;
  SessionStatus status = SessionStatus::kRunning;
};

class DecodeSession {
 public:
  DecodeSession(std::shared_ptr<const LoopModel> model, LatentCode z, SessionOptions options);

  StepResult step();
  /// Up to `count` steps, stopping early when the session ends.
  std::vector<StepResult> step_n(std::size_t count);
  void run();

  /// Registers an edit. Edits targeting an emitted step first truncate the
  /// session to just before that step.
  void add_edit(EditOp edit);
  void add_edits(const std::vector<EditOp>& edits);
  /// Replaces steps at_step.. with donor tokens first..last (1-based, inclusive).
  void transplant(const LoopSequence& donor, std::size_t first, std::size_t last,
                  std::size_t at_step);
  /// Keeps tokens 1..to_step, drops every pending edit, and resumes running.
  void rewind(std::size_t to_step);

  SessionStatus status() const { return status_; }
  const LatentCode& z() const { return z_; }
  const LoopSequence& emitted() const { return emitted_; }
  const std::vector<EditOp>& pending_edits() const { return pending_; }
  const std::vector<double>& flag_probabilities() const { return flag_probs_; }
  const SessionOptions& options() const { return options_; }
  std::size_t frozen_prefix() const { return frozen_; }
  std::size_t level_ups() const { return emitted_.level_up_count(); }
  const LoopModel& model() const { return *model_; }

 private:
  void truncate(std::size_t tokens);
  void apply(const EditOp& edit, std::size_t step, LoopToken& token) const;

  std::shared_ptr<const LoopModel> model_;
  LatentCode z_;
  SessionOptions options_;
  IncrementalDecoder decoder_;
  LoopSequence emitted_;
  std::vector<double> flag_probs_;
  std::vector<EditOp> pending_;
  std::size_t frozen_ = 0;
  SessionStatus status_ = SessionStatus::kRunning;
};

/// Dataset config stored under "dataset" in checkpoint metadata; the vase
/// preset when absent.
DatasetConfig dataset_from_metadata(const nlohmann::json& metadata);

/// EOS stopping when the dataset carries end tokens, otherwise PlaneCount
/// over its planes. The plane schedule is rebuilt over the dataset's range
/// with as many planes as the stop rule names.
SessionOptions session_options(const DatasetConfig& ds, std::optional<StopRule> stop = std::nullopt);

/// Runs a session for `z` with the given edits to completion.
DecodeSession decode(std::shared_ptr<const LoopModel> model, const LatentCode& z,
                     const SessionOptions& options, const std::vector<EditOp>& edits = {});

/// Latent codes travel as arrays of shortest round-trip decimal strings.
nlohmann::json latent_to_json(const LatentCode& z);
/// Accepts numbers or decimal strings; `dim` entries exactly. Errors name `field`.
LatentCode latent_from_json(const nlohmann::json& j, std::size_t dim, const std::string& field);

/// z ~ N(0, I) from the seed.
LatentCode sample_latent(const ModelConfig& cfg, std::uint64_t seed);

/// (1 - a) z_a + a z_b for a = i / (k - 1), i = 0..k-1.
std::vector<LatentCode> interpolate(const LatentCode& a, const LatentCode& b, std::size_t k);

}  // namespace loopforge
