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

#include "loopforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <type_traits>

#include "loopforge/errors.hpp"

namespace loopforge {

using nlohmann::json;

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kInvalidInput, msg); };
  if (n_points < 3) fail("n_points must be >= 3");
  if (d_model == 0 || n_layers == 0 || ffn_dim == 0) fail("model sizes must be positive");
  if (n_heads == 0 || d_model % n_heads != 0) fail("d_model must be divisible by n_heads");
  if (latent_dim == 0) fail("latent_dim must be >= 1");
  if (max_seq_len == 0) fail("max_seq_len must be positive");
  for (std::size_t w : z_mlp_hidden) {
    if (w == 0) fail("z_mlp_hidden widths must be positive");
  }
  for (std::size_t w : d_mlp_hidden) {
    if (w == 0) fail("d_mlp_hidden widths must be positive");
  }
  if (!(beta_kl >= 0) || !(m_kl >= 0)) fail("beta_kl and m_kl must be >= 0");
  if (!(anneal_eta0 >= 0 && anneal_eta0 <= 1)) fail("anneal_eta0 must lie in [0, 1]");
  if (!(anneal_rate > 0 && anneal_rate <= 1)) fail("anneal_rate must lie in (0, 1]");
  if (!(base_lr >= 0)) fail("base_lr must be >= 0");
  if (batch_size == 0) fail("batch_size must be positive");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::reference_preset(const std::string& category) {
  ModelConfig c;
  c.d_model = 512;
  c.latent_dim = 64;
  c.base_lr = 7e-5;
  c.warm_epochs = 70;
  c.rampdown_epochs = 7230;
  c.epochs = 7300;
  if (category == "vase") {
    c.n_layers = 4;
    c.n_heads = 1;
    c.ffn_dim = 512;
    c.z_mlp_hidden = {128};
    c.d_mlp_hidden = {128};
    c.batch_size = 4;
    c.max_seq_len = 135;
  } else if (category == "sofa") {
    c.n_layers = 8;
    c.n_heads = 8;
    c.ffn_dim = 768;
    c.z_mlp_hidden = {128, 128};
    c.d_mlp_hidden = {128, 128};
    c.batch_size = 16;
    c.max_seq_len = 121;
  } else {
    throw Error(ErrorKind::kInvalidInput, "no reference preset for category: " + category);
  }
  return c;
}

json to_json(const ModelConfig& c) {
  return {{"n_points", c.n_points},
          {"d_model", c.d_model},
          {"n_layers", c.n_layers},
          {"n_heads", c.n_heads},
          {"ffn_dim", c.ffn_dim},
          {"latent_dim", c.latent_dim},
          {"max_seq_len", c.max_seq_len},
          {"z_mlp_hidden", c.z_mlp_hidden},
          {"d_mlp_hidden", c.d_mlp_hidden},
          {"beta_kl", c.beta_kl},
          {"m_kl", c.m_kl},
          {"anneal_eta0", c.anneal_eta0},
          {"anneal_rate", c.anneal_rate},
          {"base_lr", c.base_lr},
          {"warm_epochs", c.warm_epochs},
          {"rampdown_epochs", c.rampdown_epochs},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"checkpoint_every", c.checkpoint_every},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kInvalidInput, "model config must be a JSON object");
  ModelConfig c;
  if (j.contains("preset")) c = ModelConfig::reference_preset(j.at("preset").get<std::string>());
  const json defaults = to_json(c);
  for (const auto& [key, value] : j.items()) {
    if (key != "preset" && !defaults.contains(key)) {
      throw Error(ErrorKind::kInvalidInput, "unknown model config key: " + key);
    }
  }
  try {
    auto count = [](const json& v, const std::string& key) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
        throw Error(ErrorKind::kInvalidInput,
                    "model config key '" + key + "' must be a non-negative integer");
      }
      return v.get<std::uint64_t>();
    };
    auto get = [&](const char* key, auto& field) {
      using T = std::remove_reference_t<decltype(field)>;
      if (!j.contains(key)) return;
      const json& v = j.at(key);
      if constexpr (std::is_same_v<T, std::vector<std::size_t>>) {
        if (!v.is_array()) {
          throw Error(ErrorKind::kInvalidInput,
                      std::string("model config key '") + key + "' must be an array");
        }
        field.clear();
        for (const auto& e : v) field.push_back(count(e, key));
      } else if constexpr (std::is_integral_v<T>) {
        field = static_cast<T>(count(v, key));
      } else {
        if (!v.is_number()) {
          throw Error(ErrorKind::kInvalidInput,
                      std::string("model config key '") + key + "' must be a number");
        }
        field = v.get<T>();
      }
    };
    get("n_points", c.n_points);
    get("d_model", c.d_model);
    get("n_layers", c.n_layers);
    get("n_heads", c.n_heads);
    get("ffn_dim", c.ffn_dim);
    get("latent_dim", c.latent_dim);
    get("max_seq_len", c.max_seq_len);
    get("z_mlp_hidden", c.z_mlp_hidden);
    get("d_mlp_hidden", c.d_mlp_hidden);
    get("beta_kl", c.beta_kl);
    get("m_kl", c.m_kl);
    get("anneal_eta0", c.anneal_eta0);
    get("anneal_rate", c.anneal_rate);
    get("base_lr", c.base_lr);
    get("warm_epochs", c.warm_epochs);
    get("rampdown_epochs", c.rampdown_epochs);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("checkpoint_every", c.checkpoint_every);
    get("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kInvalidInput, std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

Tensor sequence_tensor(const LoopSequence& seq) {
  const std::size_t cols = 2 * seq.n_points + 1;
  Tensor t(seq.tokens.size(), cols);
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const auto& tok = seq.tokens[i];
    if (tok.coords.size() != cols - 1) {
      throw Error(ErrorKind::kShape, "token " + std::to_string(i) + " has " +
                                         std::to_string(tok.coords.size()) + " coordinates");
    }
    std::copy(tok.coords.begin(), tok.coords.end(), t.row(i));
    t(i, cols - 1) = tok.level_up;
  }
  return t;
}

double kl_anneal(std::uint64_t step, const ModelConfig& cfg) {
  return cfg.beta_kl *
         (1.0 - (1.0 - cfg.anneal_eta0) * std::pow(cfg.anneal_rate, static_cast<double>(step)));
}

double lr_schedule(std::size_t epoch, const ModelConfig& cfg) {
  if (epoch < cfg.warm_epochs) return cfg.base_lr;
  if (cfg.rampdown_epochs == 0) return 0.0;
  const double done = static_cast<double>(epoch - cfg.warm_epochs + 1);
  return cfg.base_lr * std::max(0.0, 1.0 - done / static_cast<double>(cfg.rampdown_epochs));
}

double flag_probability(double logit) {
  if (logit >= 0) return 1.0 / (1.0 + std::exp(-logit));
  const double e = std::exp(logit);
  return e / (1.0 + e);
}

namespace {

std::vector<std::size_t> mlp_sizes(std::size_t in, const std::vector<std::size_t>& hidden,
                                   std::size_t out) {
  std::vector<std::size_t> s{in};
  s.insert(s.end(), hidden.begin(), hidden.end());
  s.push_back(out);
  return s;
}

Tensor leading_rows(const Tensor& t, std::size_t n) {
  return Tensor(n, t.cols, std::vector<double>(t.values.begin(),
                                               t.values.begin() + static_cast<long>(n * t.cols)));
}

std::string layer_name(const char* side, std::size_t i) {
  return std::string(side) + ".l" + std::to_string(i);
}

}  // namespace

LoopModel::LoopModel(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  const std::size_t d = cfg_.d_model, td = cfg_.token_dim();
  params_.add("enc.e", Tensor(1, d));
  nn::add_linear(params_, "enc.in", td, d, rng);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
    nn::add_transformer_layer(params_, layer_name("enc", i), layer_shape(), rng);
  }
  nn::add_layer_norm(params_, "enc.ln", d);
  nn::add_mlp(params_, "enc.mu", mlp_sizes(d, cfg_.z_mlp_hidden, cfg_.latent_dim), rng);
  nn::add_mlp(params_, "enc.logvar", mlp_sizes(d, cfg_.z_mlp_hidden, cfg_.latent_dim), rng);
  nn::add_mlp(params_, "dec.start", mlp_sizes(cfg_.latent_dim, cfg_.d_mlp_hidden, d), rng);
  nn::add_linear(params_, "dec.in", td, d, rng);
  for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
    nn::add_transformer_layer(params_, layer_name("dec", i), layer_shape(), rng);
  }
  nn::add_layer_norm(params_, "dec.ln", d);
  nn::add_linear(params_, "dec.out", d, td, rng);
  pe_ = nn::positional_encoding(cfg_.max_seq_len + 1, d);
}

void LoopModel::check_length(std::size_t tokens) const {
  if (tokens == 0) throw Error(ErrorKind::kLength, "sequence is empty");
  if (tokens > cfg_.max_seq_len) {
    throw Error(ErrorKind::kLength, "sequence length " + std::to_string(tokens) +
                                        " exceeds max_seq_len " +
                                        std::to_string(cfg_.max_seq_len));
  }
}

Var LoopModel::stack(Graph& g, const std::string& prefix, Var x, bool causal) {
  for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
    x = nn::transformer_layer(g, params_, layer_name(prefix.c_str(), i), layer_shape(), x, causal);
  }
  return nn::layer_norm(g, params_, prefix + ".ln", x);
}

LoopModel::EncoderOut LoopModel::encode(Graph& g, const Tensor& tokens) {
  check_length(tokens.rows);
  if (tokens.cols != cfg_.token_dim()) {
    throw Error(ErrorKind::kShape, "tokens have width " + std::to_string(tokens.cols) +
                                       ", model expects " + std::to_string(cfg_.token_dim()));
  }
  const Var x = nn::linear(g, params_, "enc.in", g.constant(tokens));
  Var h = concat_rows(g.param(params_, "enc.e"), x);
  h = add_constant(h, leading_rows(pe_, tokens.rows + 1));
  h = stack(g, "enc", h, false);
  const Var e = slice_row(h, 0);
  const std::size_t depth = cfg_.z_mlp_hidden.size() + 1;
  const Var mu = nn::mlp(g, params_, "enc.mu", depth, e);
  const Var logvar = clamp(nn::mlp(g, params_, "enc.logvar", depth, e), kLogVarMin, kLogVarMax);
  return {mu, logvar};
}

Var LoopModel::decoder_start(Graph& g, Var z) {
  if (z.rows() != 1 || z.cols() != cfg_.latent_dim) {
    throw Error(ErrorKind::kShape, "latent code must have " + std::to_string(cfg_.latent_dim) +
                                       " entries");
  }
  return tanh(nn::mlp(g, params_, "dec.start", cfg_.d_mlp_hidden.size() + 1, z));
}

Var LoopModel::decode_teacher_forced(Graph& g, Var z, const Tensor& tokens) {
  check_length(tokens.rows);
  if (tokens.cols != cfg_.token_dim()) {
    throw Error(ErrorKind::kShape, "tokens have width " + std::to_string(tokens.cols) +
                                       ", model expects " + std::to_string(cfg_.token_dim()));
  }
  const std::size_t T = tokens.rows;
  Var h = decoder_start(g, z);
  if (T > 1) {
    const Var x = nn::linear(g, params_, "dec.in", g.constant(leading_rows(tokens, T - 1)));
    h = concat_rows(h, x);
  }
  h = add_constant(h, leading_rows(pe_, T));
  h = stack(g, "dec", h, true);
  return nn::linear(g, params_, "dec.out", h);
}

Var LoopModel::sequence_loss(Graph& g, const Tensor& tokens, const Tensor& eps,
                                 double beta_eff, LossParts* parts) {
  const auto enc = encode(g, tokens);
  const Var z = loopforge::reparameterize(enc.mu, enc.logvar, eps);
  const Var head = decode_teacher_forced(g, z, tokens);
  const Var lr = recon_loss(head, tokens);
  const Var lkl = kl_loss(enc.mu, enc.logvar, beta_eff, cfg_.m_kl);
  if (parts != nullptr) {
    parts->recon = lr.value().values[0];
    parts->kl = lkl.value().values[0];
  }
  return add(lr, lkl);
}

Posterior LoopModel::encode(const LoopSequence& seq) {
  Graph g;
  const auto out = encode(g, sequence_tensor(seq));
  return {out.mu.value().values, out.logvar.value().values};
}

std::vector<double> LoopModel::start_embedding(const LatentCode& z) {
  Graph g;
  return decoder_start(g, g.constant(Tensor(1, z.size(), z))).value().values;
}

Tensor LoopModel::predict_teacher_forced(const LatentCode& z, const LoopSequence& seq) {
  Graph g;
  Tensor out =
      decode_teacher_forced(g, g.constant(Tensor(1, z.size(), z)), sequence_tensor(seq)).value();
  for (std::size_t t = 0; t < out.rows; ++t) {
    out(t, out.cols - 1) = flag_probability(out(t, out.cols - 1));
  }
  return out;
}

LossParts LoopModel::evaluate_loss(const LoopSequence& seq, const LatentCode& eps,
                                       double beta_eff) {
  Graph g;
  LossParts parts;
  sequence_loss(g, sequence_tensor(seq), Tensor(1, eps.size(), eps), beta_eff, &parts);
  return parts;
}

LatentCode reparameterize(const Posterior& p, std::mt19937_64& rng) {
  if (p.mu.size() != p.logvar.size()) {
    throw Error(ErrorKind::kShape, "posterior mu and logvar differ in length");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentCode z(p.mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double lv = std::clamp(p.logvar[i], kLogVarMin, kLogVarMax);
    z[i] = p.mu[i] + std::exp(0.5 * lv) * normal(rng);
  }
  return z;
}

LatentCode sample_standard_normal(std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  LatentCode z(dim);
  for (auto& v : z) v = normal(rng);
  return z;
}

// Incremental decoding mirrors the graph ops row by row through the shared kernels.

IncrementalDecoder::IncrementalDecoder(const LoopModel& model, const LatentCode& z)
    : model_(&model) {
  const auto& cfg = model.config();
  if (z.size() != cfg.latent_dim) {
    throw Error(ErrorKind::kShape, "latent code must have " + std::to_string(cfg.latent_dim) +
                                       " entries, got " + std::to_string(z.size()));
  }
  for (double v : z) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNumericalHealth, "non-finite latent code");
  }
  const auto& P = model.params();
  std::vector<double> x = z;
  const std::size_t depth = cfg.d_mlp_hidden.size() + 1;
  for (std::size_t i = 0; i < depth; ++i) {
    const std::string name = "dec.start." + std::to_string(i);
    const Tensor& W = P.value(name + ".W");
    std::vector<double> y(W.cols);
    kernels::linear_row(x.data(), W, P.value(name + ".b").values.data(), y.data());
    if (i + 1 < depth) {
      for (auto& v : y) v = v > 0 ? v : 0.0;
    }
    x = std::move(y);
  }
  for (auto& v : x) v = std::tanh(v);
  const std::size_t rows = cfg.max_seq_len + 1;
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    keys_.emplace_back(rows, cfg.d_model);
    values_.emplace_back(rows, cfg.d_model);
  }
  feed(std::move(x));
}

void IncrementalDecoder::push(const std::vector<double>& token) {
  const auto& cfg = model_->config();
  if (token.size() != cfg.token_dim()) {
    throw Error(ErrorKind::kShape, "token width " + std::to_string(token.size()) +
                                       ", model expects " + std::to_string(cfg.token_dim()));
  }
  if (length_ >= cfg.max_seq_len) {
    throw Error(ErrorKind::kLength, "decoder is at max_seq_len " +
                                        std::to_string(cfg.max_seq_len));
  }
  const auto& P = model_->params();
  std::vector<double> x(cfg.d_model);
  kernels::linear_row(token.data(), P.value("dec.in.W"), P.value("dec.in.b").values.data(),
                      x.data());
  feed(std::move(x));
}

void IncrementalDecoder::truncate(std::size_t tokens) {
  if (tokens + 1 > length_) {
    throw Error(ErrorKind::kRange, "cannot truncate to " + std::to_string(tokens) +
                                       " tokens; only " + std::to_string(length_ - 1) + " fed");
  }
  length_ = tokens + 1;
  predictions_.resize(length_);
  prediction_ = predictions_.back();
}

void IncrementalDecoder::feed(std::vector<double> x) {
  const auto& cfg = model_->config();
  const auto& P = model_->params();
  const std::size_t d = cfg.d_model, pos = length_;
  const Tensor& pe = model_->positional_table();
  for (std::size_t j = 0; j < d; ++j) x[j] += pe(pos, j);

  const std::size_t dh = d / cfg.n_heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<double> h(d), xhat(d), q(d), attn(d), a(d), f1(cfg.ffn_dim), f(d);
  std::vector<double> weights(pos + 1);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "dec.l" + std::to_string(l);
    kernels::layer_norm_row(x.data(), d, P.value(p + ".ln1.gamma").values.data(),
                            P.value(p + ".ln1.beta").values.data(), kLayerNormEps, h.data(),
                            xhat.data());
    kernels::linear_row(h.data(), P.value(p + ".q.W"), P.value(p + ".q.b").values.data(),
                        q.data());
    kernels::linear_row(h.data(), P.value(p + ".k.W"), nullptr, keys_[l].row(pos));
    kernels::linear_row(h.data(), P.value(p + ".v.W"), P.value(p + ".v.b").values.data(),
                        values_[l].row(pos));
    for (std::size_t head = 0; head < cfg.n_heads; ++head) {
      const std::size_t off = head * dh;
      kernels::attention_row(q.data() + off, keys_[l].values.data() + off,
                             values_[l].values.data() + off, d, pos + 1, dh, sc,
                             attn.data() + off, weights.data());
    }
    kernels::linear_row(attn.data(), P.value(p + ".o.W"), P.value(p + ".o.b").values.data(),
                        a.data());
    for (std::size_t j = 0; j < d; ++j) x[j] += a[j];
    kernels::layer_norm_row(x.data(), d, P.value(p + ".ln2.gamma").values.data(),
                            P.value(p + ".ln2.beta").values.data(), kLayerNormEps, h.data(),
                            xhat.data());
    kernels::linear_row(h.data(), P.value(p + ".ff1.W"), P.value(p + ".ff1.b").values.data(),
                        f1.data());
    for (auto& v : f1) v = v > 0 ? v : 0.0;
    kernels::linear_row(f1.data(), P.value(p + ".ff2.W"), P.value(p + ".ff2.b").values.data(),
                        f.data());
    for (std::size_t j = 0; j < d; ++j) x[j] += f[j];
  }
  kernels::layer_norm_row(x.data(), d, P.value("dec.ln.gamma").values.data(),
                          P.value("dec.ln.beta").values.data(), kLayerNormEps, h.data(),
                          xhat.data());
  std::vector<double> out(cfg.token_dim());
  kernels::linear_row(h.data(), P.value("dec.out.W"), P.value("dec.out.b").values.data(),
                      out.data());
  for (double v : out) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNumericalHealth, "non-finite decoder output");
  }
  ++length_;
  predictions_.push_back(out);
  prediction_ = std::move(out);
}

}  // namespace loopforge
