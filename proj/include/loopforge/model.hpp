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
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loopforge/autograd.hpp"
#include "loopforge/loop_sequence.hpp"
#include "loopforge/nn.hpp"
#include "loopforge/params.hpp"
#include "loopforge/tensor.hpp"

namespace loopforge {

struct ModelConfig {
  std::size_t n_points = kDefaultLoopPoints;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 2;
  std::size_t ffn_dim = 128;
  std::size_t latent_dim = 16;
  std::size_t max_seq_len = 135;
  /// Hidden widths of the posterior MLPs and of the start-embedding MLP.
  std::vector<std::size_t> z_mlp_hidden{64};
  std::vector<std::size_t> d_mlp_hidden{64};

  double beta_kl = 0.5;
  double m_kl = 0.2;
  double anneal_eta0 = 0.01;
  double anneal_rate = 0.9999;

  double base_lr = 1e-3;
  std::size_t warm_epochs = 200;
  std::size_t rampdown_epochs = 100;
  std::size_t epochs = 300;
  std::size_t batch_size = 8;
  /// Epochs between periodic checkpoints; 0 writes only the final one.
  std::size_t checkpoint_every = 0;
  std::uint64_t seed = 0;

  std::size_t token_dim() const { return 2 * n_points + 1; }
  void validate() const;

  /// Small model for one-core training.
  static ModelConfig desk();
  /// Full-scale settings: "vase" (4 single-head layers, ffn 512, one 128 MLP
  /// layer, batch 4) or "sofa" (8 layers of 8 heads, ffn 768, two 128 MLP
  /// layers, batch 16); width 512, latent 64, lr 7e-5 for 70 epochs then a
  /// 7230-epoch ramp to zero.
  static ModelConfig reference_preset(const std::string& category);

  bool operator==(const ModelConfig&) const = default;
};

nlohmann::json to_json(const ModelConfig& cfg);
/// Missing keys keep their defaults; unknown keys are rejected.
ModelConfig model_config_from_json(const nlohmann::json& j);

using LatentCode = std::vector<double>;

struct Posterior {
  std::vector<double> mu;
  std::vector<double> logvar;
};

constexpr double kLogVarMin = -20.0;
constexpr double kLogVarMax = 10.0;

/// Tokens as rows: T x (2N + 1), flag last.
Tensor sequence_tensor(const LoopSequence& seq);

/// beta_KL * (1 - (1 - eta0) * R^step).
double kl_anneal(std::uint64_t step, const ModelConfig& cfg);
/// base_lr for the first warm_epochs, then linear so that the last ramp epoch is 0.
double lr_schedule(std::size_t epoch, const ModelConfig& cfg);

struct LossParts {
  double recon = 0;
  double kl = 0;
  double total() const { return recon + kl; }
};

class LoopModel {
 public:
  /// Fresh parameters drawn from cfg.seed.
  explicit LoopModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  struct EncoderOut {
    Var mu;
    Var logvar;
  };
  /// Graph pieces. `tokens` is T x (2N + 1).
  EncoderOut encode(Graph& g, const Tensor& tokens);
  Var decoder_start(Graph& g, Var z);
  /// Raw head rows (coordinates, flag logit) predicting tokens 1..T.
  Var decode_teacher_forced(Graph& g, Var z, const Tensor& tokens);
  /// L_R + L_KL for one sequence with fixed reparameterization noise; the
  /// returned Var is the total.
  Var sequence_loss(Graph& g, const Tensor& tokens, const Tensor& eps, double beta_eff,
                    LossParts* parts);

  /// Value-only conveniences.
  Posterior encode(const LoopSequence& seq);
  std::vector<double> start_embedding(const LatentCode& z);
  /// T x (2N + 1) with the flag column as a probability.
  Tensor predict_teacher_forced(const LatentCode& z, const LoopSequence& seq);
  LossParts evaluate_loss(const LoopSequence& seq, const LatentCode& eps, double beta_eff);

  void check_length(std::size_t tokens) const;
  /// Positional table with max_seq_len + 1 rows.
  const Tensor& positional_table() const { return pe_; }

 private:
  nn::LayerShape layer_shape() const { return {cfg_.d_model, cfg_.n_heads, cfg_.ffn_dim}; }
  Var stack(Graph& g, const std::string& prefix, Var x, bool causal);

  ModelConfig cfg_;
  ParamStore params_;
  Tensor pe_;
};

LatentCode reparameterize(const Posterior& p, std::mt19937_64& rng);
LatentCode sample_standard_normal(std::size_t dim, std::mt19937_64& rng);

/// Sigmoid with the same branch split the loss uses.
double flag_probability(double logit);

/// Decoder evaluation one position at a time with cached keys and values.
/// Rows match decode_teacher_forced bit for bit.
class IncrementalDecoder {
 public:
  IncrementalDecoder(const LoopModel& model, const LatentCode& z);

  /// Number of positions fed so far (the start embedding counts as one).
  std::size_t length() const { return length_; }
  /// Head output for the next token given everything fed so far; the flag
  /// entry is a raw logit.
  const std::vector<double>& prediction() const { return prediction_; }
  /// Feeds an emitted token and updates prediction().
  void push(const std::vector<double>& token);
  /// Drops fed tokens so that `tokens` remain after the start embedding.
  void truncate(std::size_t tokens);

 private:
  void feed(std::vector<double> row);

  const LoopModel* model_;
  std::vector<Tensor> keys_;
  std::vector<Tensor> values_;
  std::vector<std::vector<double>> predictions_;
  std::vector<double> prediction_;
  std::size_t length_ = 0;
};

}  // namespace loopforge
