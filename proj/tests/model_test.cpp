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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loopforge/errors.hpp"
#include "loopforge/model.hpp"
#include "loopforge/train.hpp"

namespace loopforge {
namespace {

namespace fs = std::filesystem;

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_points = 4;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.ffn_dim = 24;
  c.latent_dim = 4;
  c.max_seq_len = 20;
  c.z_mlp_hidden = {8};
  c.d_mlp_hidden = {8};
  c.m_kl = 0.0;
  c.seed = 3;
  return c;
}

LoopSequence random_sequence(std::mt19937_64& rng, std::size_t n, std::size_t len) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LoopSequence seq;
  seq.n_points = n;
  seq.plane_count = len;
  for (std::size_t t = 0; t < len; ++t) {
    LoopToken tok;
    for (std::size_t i = 0; i < 2 * n; ++i) tok.coords.push_back(u(rng));
    tok.level_up = t == 0 || u(rng) < 0.6 ? 1 : 0;
    seq.tokens.push_back(tok);
  }
  return seq;
}

fs::path scratch(const std::string& name) {
  return fs::temp_directory_path() / ("loopforge_model_" + name);
}

TEST(ModelConfig, JsonRoundTrip) {
  ModelConfig c = tiny_config();
  c.z_mlp_hidden = {8, 6};
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
}

TEST(ModelConfig, RejectsBadInput) {
  EXPECT_THROW(model_config_from_json({{"d_modle", 8}}), Error);
  EXPECT_THROW(model_config_from_json({{"d_model", 10}, {"n_heads", 3}}), Error);
  EXPECT_THROW(model_config_from_json({{"latent_dim", 0}}), Error);
  EXPECT_THROW(model_config_from_json({{"d_model", "wide"}}), Error);
  EXPECT_THROW(model_config_from_json({{"epochs", -3}}), Error);
  EXPECT_THROW(model_config_from_json({{"batch_size", 1.5}}), Error);
  EXPECT_THROW(model_config_from_json({{"z_mlp_hidden", {8, -1}}}), Error);
  EXPECT_EQ(model_config_from_json({{"epochs", 12}}).epochs, 12u);
}

TEST(ModelConfig, ReferencePresets) {
  const auto vase = ModelConfig::reference_preset("vase");
  EXPECT_EQ(vase.latent_dim, 64u);
  EXPECT_EQ(vase.d_model, 512u);
  EXPECT_EQ(vase.n_layers, 4u);
  EXPECT_EQ(vase.n_heads, 1u);
  EXPECT_EQ(vase.ffn_dim, 512u);
  EXPECT_EQ(vase.batch_size, 4u);
  EXPECT_EQ(vase.z_mlp_hidden, std::vector<std::size_t>{128});
  EXPECT_EQ(vase.base_lr, 7e-5);
  EXPECT_EQ(vase.token_dim(), 65u);
  const auto sofa = ModelConfig::reference_preset("sofa");
  EXPECT_EQ(sofa.n_layers, 8u);
  EXPECT_EQ(sofa.n_heads, 8u);
  EXPECT_EQ(sofa.ffn_dim, 768u);
  EXPECT_EQ(sofa.batch_size, 16u);
  EXPECT_EQ(sofa.d_mlp_hidden, (std::vector<std::size_t>{128, 128}));
  EXPECT_EQ(model_config_from_json({{"preset", "sofa"}, {"epochs", 5}}).n_layers, 8u);
}

TEST(Encode, ShapesAndDeterminism) {
  ModelConfig c = tiny_config();
  c.latent_dim = 64;
  LoopModel model(c);
  std::mt19937_64 rng(1);
  const auto seq = random_sequence(rng, 4, 7);
  const Posterior a = model.encode(seq);
  const Posterior b = model.encode(seq);
  EXPECT_EQ(a.mu.size(), 64u);
  EXPECT_EQ(a.logvar.size(), 64u);
  EXPECT_EQ(a.mu, b.mu);
  EXPECT_EQ(a.logvar, b.logvar);
  for (double v : a.logvar) {
    EXPECT_GE(v, kLogVarMin);
    EXPECT_LE(v, kLogVarMax);
  }
}

TEST(Encode, OrderSensitive) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(2);
  auto seq = random_sequence(rng, 4, 6);
  seq.tokens[2].level_up = 0;
  seq.tokens[3].level_up = 0;
  auto swapped = seq;
  std::swap(swapped.tokens[2], swapped.tokens[3]);
  EXPECT_NE(model.encode(seq).mu, model.encode(swapped).mu);
}

TEST(Encode, OverLengthRejected) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(3);
  try {
    model.encode(random_sequence(rng, 4, 21));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLength);
  }
}

TEST(Reparameterize, ZeroVarianceLimitAndSeed) {
  Posterior p{{0.5, -1.0, 2.0}, {kLogVarMin, kLogVarMin, kLogVarMin}};
  std::mt19937_64 rng(4);
  const auto z = reparameterize(p, rng);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(z[i], p.mu[i], 1e-3);
  p.logvar = {0.0, 0.0, 0.0};
  std::mt19937_64 r1(9), r2(9);
  EXPECT_EQ(reparameterize(p, r1), reparameterize(p, r2));
}

TEST(Reparameterize, MonteCarloMean) {
  const Posterior p{{0.3, -1.2, 0.0, 2.5}, {0.0, std::log(4.0), std::log(0.25), -1.0}};
  std::mt19937_64 rng(5);
  const std::size_t draws = 100000;
  std::vector<double> mean(4, 0.0);
  for (std::size_t k = 0; k < draws; ++k) {
    const auto z = reparameterize(p, rng);
    for (std::size_t i = 0; i < 4; ++i) mean[i] += z[i];
  }
  for (std::size_t i = 0; i < 4; ++i) {
    const double sigma = std::exp(0.5 * p.logvar[i]);
    EXPECT_NEAR(mean[i] / draws, p.mu[i], 3 * sigma / std::sqrt(static_cast<double>(draws)));
  }
}

TEST(DecoderStart, BoundedAndInjective) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(6);
  std::set<std::vector<double>> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto d = model.start_embedding(sample_standard_normal(4, rng));
    for (double v : d) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
    seen.insert(d);
  }
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(TeacherForced, OutputShapeAndFlagRange) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(7);
  for (std::size_t T : {1, 5, 20}) {
    const auto out = model.predict_teacher_forced(sample_standard_normal(4, rng),
                                                  random_sequence(rng, 4, T));
    EXPECT_EQ(out.rows, T);
    EXPECT_EQ(out.cols, 9u);
    for (std::size_t t = 0; t < T; ++t) {
      EXPECT_GT(out(t, 8), 0.0);
      EXPECT_LT(out(t, 8), 1.0);
    }
  }
}

TEST(TeacherForced, CausalToTheLastBit) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(8);
  const auto z = sample_standard_normal(4, rng);
  const auto seq = random_sequence(rng, 4, 10);
  const Tensor base = model.predict_teacher_forced(z, seq);
  std::uniform_int_distribution<std::size_t> pick(0, 9);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t j = pick(rng);  // 0-based token x_{j+1}
    auto perturbed = seq;
    for (auto& c : perturbed.tokens[j].coords) c += noise(rng);
    const Tensor out = model.predict_teacher_forced(z, perturbed);
    // Row r predicts token r+1 from d, x_1..x_r; it may see x_{j+1} only when r > j.
    for (std::size_t r = 0; r <= j; ++r) {
      for (std::size_t c = 0; c < out.cols; ++c) {
        ASSERT_EQ(std::bit_cast<std::uint64_t>(out(r, c)), std::bit_cast<std::uint64_t>(base(r, c)));
      }
    }
    if (j + 1 < 10) {
      bool changed = false;
      for (std::size_t c = 0; c < out.cols; ++c) changed = changed || out(j + 1, c) != base(j + 1, c);
      EXPECT_TRUE(changed);
    }
  }
}

TEST(TeacherForced, SingleTokenDependsOnlyOnZ) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(9);
  const auto z = sample_standard_normal(4, rng);
  const Tensor a = model.predict_teacher_forced(z, random_sequence(rng, 4, 1));
  const Tensor b = model.predict_teacher_forced(z, random_sequence(rng, 4, 1));
  EXPECT_EQ(a, b);
}

TEST(IncrementalDecoder, MatchesTeacherForcedRows) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(10);
  const auto z = sample_standard_normal(4, rng);
  const auto seq = random_sequence(rng, 4, 12);
  Graph g;
  const Tensor full =
      model.decode_teacher_forced(g, g.constant(Tensor(1, 4, z)), sequence_tensor(seq)).value();
  IncrementalDecoder dec(model, z);
  const Tensor tokens = sequence_tensor(seq);
  for (std::size_t t = 0; t < 12; ++t) {
    const auto& row = dec.prediction();
    for (std::size_t c = 0; c < 9; ++c) ASSERT_EQ(row[c], full(t, c)) << t << "," << c;
    dec.push(std::vector<double>(tokens.row(t), tokens.row(t) + 9));
  }
  dec.truncate(3);
  for (std::size_t c = 0; c < 9; ++c) EXPECT_EQ(dec.prediction()[c], full(3, c));
}

TEST(LossKl, HandValues) {
  Graph g;
  const Var mu = g.constant(Tensor(1, 64, 1.0));
  const Var lv = g.constant(Tensor(1, 64, 0.0));
  EXPECT_NEAR(kl_loss(mu, lv, 1.0, 0.0).value().values[0], 0.5, 0.5 * 1e-12);
  const Var zero = g.constant(Tensor(1, 64, 0.0));
  EXPECT_EQ(kl_loss(zero, lv, 1.0, 0.0).value().values[0], 0.0);
  // Raw KL is 32 here, below the floor.
  EXPECT_EQ(kl_loss(mu, lv, 0.7, 40.0).value().values[0], 0.7 * 40.0 / 64.0);
}

TEST(LossKl, NeverBelowFloor) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Tensor m(1, 8), l(1, 8);
    for (auto& v : m.values) v = 0.3 * n(rng);
    for (auto& v : l.values) v = 0.3 * n(rng);
    Graph g;
    const double floor = 0.05 * (i % 10);
    const double v = kl_loss(g.constant(m), g.constant(l), 0.9, floor).value().values[0];
    EXPECT_GE(v, 0.9 * floor / 8.0);
  }
}

TEST(LossRecon, HandValues) {
  const std::size_t T = 6;
  std::mt19937_64 rng(12);
  Tensor target(T, 65);
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < 64; ++c) target(t, c) = u(rng);
    target(t, 64) = t % 2;
  }
  {
    Tensor head = target;
    for (std::size_t t = 0; t < T; ++t) head(t, 64) = 0.0;
    Graph g;
    EXPECT_NEAR(recon_loss(g.constant(head), target).value().values[0], T * std::log(2.0), 1e-12);
  }
  {
    Tensor head = target;
    const double delta = 0.03;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < 64; ++c) head(t, c) += delta;
      head(t, 64) = 0.0;
    }
    Graph g;
    EXPECT_NEAR(recon_loss(g.constant(head), target).value().values[0],
                T * 64 * delta * delta + T * std::log(2.0), 1e-11);
  }
  {
    Tensor head = target;
    for (std::size_t t = 0; t < T; ++t) head(t, 64) = target(t, 64) == 1 ? 40.0 : -40.0;
    Graph g;
    EXPECT_LT(recon_loss(g.constant(head), target).value().values[0], T * 1.1e-7);
  }
}

TEST(Schedules, KlAnneal) {
  ModelConfig c = tiny_config();
  c.beta_kl = 0.8;
  EXPECT_DOUBLE_EQ(kl_anneal(0, c), 0.8 * 0.01);
  EXPECT_NEAR(kl_anneal(10'000'000, c), 0.8, 1e-12);
  double prev = kl_anneal(0, c);
  for (std::uint64_t s = 1; s <= 1'000'000; ++s) {
    const double b = kl_anneal(s, c);
    ASSERT_GE(b, prev);
    prev = b;
  }
}

TEST(Schedules, LearningRate) {
  const ModelConfig c = ModelConfig::reference_preset("vase");
  for (std::size_t e : {0, 30, 69}) EXPECT_EQ(lr_schedule(e, c), 7e-5);
  EXPECT_EQ(lr_schedule(7299, c), 0.0);
  EXPECT_NEAR(lr_schedule(70 + 3615 - 1, c), 3.5e-5, 1e-18);
  EXPECT_LT(lr_schedule(70, c), 7e-5);
  EXPECT_EQ(lr_schedule(9000, c), 0.0);
}

TEST(Gradcheck, FullLossOnTinyModel) {
  ModelConfig c = tiny_config();
  c.d_model = 32;
  c.latent_dim = 8;
  LoopModel model(c);
  std::mt19937_64 rng(13);
  const Tensor tokens = sequence_tensor(random_sequence(rng, 4, 6));
  Tensor eps(1, 8);
  for (auto& v : eps.values) v = std::normal_distribution<double>(0, 1)(rng);
  auto loss = [&](ParamStore&, bool backward) {
    Graph g;
    const Var l = model.sequence_loss(g, tokens, eps, 0.7, nullptr);
    if (backward) g.backward(l);
    return l.value().values[0];
  };
  const auto r = nn::gradcheck(model.params(), loss, 60, 1e-3, 21);
  EXPECT_LE(r.max_rel_error, 1e-5) << r.worst_param << "[" << r.worst_index << "] "
                                   << r.worst_analytic << " vs " << r.worst_numeric;
}

std::vector<LoopSequence> toy_data(std::size_t count) {
  std::mt19937_64 rng(14);
  std::vector<LoopSequence> data;
  for (std::size_t i = 0; i < count; ++i) data.push_back(random_sequence(rng, 4, 3 + i % 4));
  return data;
}

TEST(Train, DeterministicAndLogged) {
  ModelConfig c = tiny_config();
  c.epochs = 4;
  c.batch_size = 3;
  c.warm_epochs = 2;
  c.rampdown_epochs = 2;
  const auto data = toy_data(7);
  std::ostringstream log_a, log_b;
  LoopModel a(c), b(c);
  TrainOptions oa, ob;
  oa.log = &log_a;
  ob.log = &log_b;
  const auto ra = train(a, data, oa);
  train(b, data, ob);
  EXPECT_EQ(log_a.str(), log_b.str());
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params().entries()[i].value, b.params().entries()[i].value);
  }
  EXPECT_EQ(ra.steps, 12u);
  std::istringstream lines(log_a.str());
  std::string line;
  std::size_t epoch = 0;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_EQ(j["epoch"], epoch);
    EXPECT_EQ(j["lr"].get<double>(), lr_schedule(epoch, c));
    EXPECT_EQ(j["beta_eff"].get<double>(), kl_anneal(j["step"].get<std::uint64_t>() - 1, c));
    for (const char* k : {"L_R", "L_KL"}) EXPECT_TRUE(j.contains(k));
    ++epoch;
  }
  EXPECT_EQ(epoch, 4u);
}

TEST(Train, ReducesLoss) {
  ModelConfig c = tiny_config();
  c.epochs = 60;
  c.batch_size = 4;
  c.warm_epochs = 40;
  c.rampdown_epochs = 20;
  c.base_lr = 3e-3;
  LoopModel model(c);
  const auto r = train(model, toy_data(8));
  EXPECT_LT(r.history.back().recon, 0.5 * r.history.front().recon);
}

TEST(Train, RejectsMismatchedData) {
  LoopModel model(tiny_config());
  std::mt19937_64 rng(15);
  EXPECT_THROW(train(model, {random_sequence(rng, 5, 3)}), Error);
  EXPECT_THROW(train(model, {}), Error);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelConfig c = tiny_config();
  c.epochs = 2;
  LoopModel model(c);
  const auto data = toy_data(5);
  const auto path = scratch("roundtrip.ckpt");
  TrainOptions opts;
  opts.checkpoint_path = path;
  const auto r = train(model, data, opts);
  const Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.step, r.steps);
  EXPECT_EQ(ck.model.config(), c);
  LoopModel loaded = ck.model;
  const LatentCode eps{0.1, -0.2, 0.3, 0.0};
  for (const auto& seq : data) {
    const auto a = model.evaluate_loss(seq, eps, 0.3);
    const auto b = loaded.evaluate_loss(seq, eps, 0.3);
    EXPECT_EQ(a.recon, b.recon);
    EXPECT_EQ(a.kl, b.kl);
  }
  fs::remove(path);
}

TEST(Checkpoint, CorruptionAndMismatchRejected) {
  LoopModel model(tiny_config());
  const auto path = scratch("corrupt.ckpt");
  save_checkpoint(model, 7, path);
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-5, std::ios::end);
    f.put('\x7f');
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCheckpoint);
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }
  save_checkpoint(model, 7, path);
  ModelConfig other = tiny_config();
  other.d_model = 8;
  LoopModel different(other);
  EXPECT_THROW(load_checkpoint_into(different, path), Error);
  EXPECT_NO_THROW(load_checkpoint_into(model, path));

  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  std::ostringstream rest;
  rest << in.rdbuf();
  auto j = nlohmann::json::parse(header);
  j["version"] = 99;
  std::ofstream(path, std::ios::binary) << j.dump() << '\n' << rest.str();
  EXPECT_THROW(load_checkpoint(path), Error);
  fs::remove(path);
}

TEST(Checkpoint, MetadataSurvives) {
  LoopModel model(tiny_config());
  const auto path = scratch("meta.ckpt");
  const nlohmann::json meta{{"dataset", {{"plane_count", 16}}}, {"note", "x"}};
  save_checkpoint(model, 3, path, meta);
  EXPECT_EQ(load_checkpoint(path).metadata, meta);
  save_checkpoint(model, 3, path);
  EXPECT_EQ(load_checkpoint(path).metadata, nlohmann::json::object());
  EXPECT_THROW(save_checkpoint(model, 3, path, nlohmann::json::array()), Error);
  fs::remove(path);
}

TEST(Checkpoint, Fnv1aReferenceValues) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

}  // namespace
}  // namespace loopforge
