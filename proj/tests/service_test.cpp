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
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "loopforge/errors.hpp"
#include "loopforge/service.hpp"
#include "loopforge/train.hpp"

namespace loopforge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

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
  c.seed = 8;
  return c;
}

DatasetConfig tiny_dataset() {
  DatasetConfig ds = DatasetConfig::preset(ShapeCategory::kVase);
  ds.plane_count = 6;
  ds.n_points = 4;
  ds.max_seq_len = 20;
  return ds;
}

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    path_ = fs::temp_directory_path() / "loopforge_service_test.ckpt";
    model_ = std::make_shared<LoopModel>(tiny_config());
    save_checkpoint(*model_, 11, path_, {{"dataset", to_json(tiny_dataset())}});
  }
  void TearDown() override { fs::remove(path_); }

  std::string load(Service& s) {
    const auto r = s.handle("POST", "/models/load", json{{"checkpoint_path", path_.string()}}.dump());
    EXPECT_EQ(r.status, 200) << r.body;
    return r.json()["model_id"];
  }

  std::string open(Service& s, const std::string& model, const json& extra = json::object()) {
    json body{{"model_id", model}};
    body.update(extra);
    const auto r = s.handle("POST", "/sessions", body.dump());
    EXPECT_EQ(r.status, 200) << r.body;
    return r.json()["session_id"];
  }

  static void expect_error(const HttpResponse& r, int status, const std::string& field = "") {
    EXPECT_EQ(r.status, status) << r.body;
    const json j = r.json();
    EXPECT_TRUE(j.contains("code"));
    EXPECT_FALSE(j["message"].get<std::string>().empty());
    if (!field.empty()) {
      EXPECT_EQ(j.value("field", ""), field) << r.body;
    }
  }

  SessionOptions default_options() const { return session_options(tiny_dataset()); }

  fs::path path_;
  std::shared_ptr<LoopModel> model_;
};

const json kZ = json::array({0.25, -1.5, 0.75, 2.0});

TEST_F(ServiceTest, LoadModelTwiceSharesConfig) {
  Service s;
  const auto a = s.handle("POST", "/models/load", json{{"checkpoint_path", path_.string()}}.dump());
  const auto b = s.handle("POST", "/models/load", json{{"checkpoint_path", path_.string()}}.dump());
  ASSERT_EQ(a.status, 200);
  EXPECT_NE(a.json()["model_id"], b.json()["model_id"]);
  EXPECT_EQ(a.json()["config"], b.json()["config"]);
  EXPECT_EQ(a.json()["config"], to_json(tiny_config()));
  EXPECT_EQ(a.json()["step"], 11);
  EXPECT_EQ(s.model_count(), 2u);
}

TEST_F(ServiceTest, LoadModelErrors) {
  Service s;
  expect_error(s.handle("POST", "/models/load", R"({"checkpoint_path": "/nonexistent/x.ckpt"})"), 400,
               "checkpoint_path");
  expect_error(s.handle("POST", "/models/load", "{}"), 422, "checkpoint_path");
  expect_error(s.handle("POST", "/models/load", "{not json"), 400);
  expect_error(s.handle("GET", "/models/load"), 405);
  expect_error(s.handle("GET", "/nowhere"), 404);
}

TEST_F(ServiceTest, SessionLatentForms) {
  Service s;
  const auto m = load(s);
  const auto r = s.handle("POST", "/sessions", json{{"model_id", m}, {"z", kZ}}.dump());
  ASSERT_EQ(r.status, 200);
  const json res = r.json();
  EXPECT_EQ(res["status"], "running");
  EXPECT_EQ(res["emitted"], 0);
  EXPECT_EQ(res["stop_rule"], StopRule::plane_count(6).to_json());
  EXPECT_EQ(latent_from_json(res["z"], 4, "z"), kZ.get<std::vector<double>>());
  ASSERT_TRUE(res["z"][0].is_string());

  const double awkward = 0.1 + 0.2;
  const json strings = latent_to_json({awkward, -1e-300, 3.0, std::nextafter(1.0, 2.0)});
  const auto r2 = s.handle("POST", "/sessions", json{{"model_id", m}, {"z", strings}}.dump());
  ASSERT_EQ(r2.status, 200);
  EXPECT_EQ(latent_from_json(r2.json()["z"], 4, "z")[0], awkward);
  EXPECT_EQ(r2.json()["z"], strings);

  const auto s1 = s.handle("POST", "/sessions", json{{"model_id", m}, {"z", {{"sample", 3}}}}.dump());
  const auto s2 = s.handle("POST", "/sessions", json{{"model_id", m}, {"z", {{"sample", 3}}}}.dump());
  EXPECT_EQ(s1.json()["z"], s2.json()["z"]);
  EXPECT_EQ(latent_from_json(s1.json()["z"], 4, "z"), sample_latent(tiny_config(), 3));

  expect_error(s.handle("POST", "/sessions", json{{"model_id", m}, {"z", {1.0, 2.0}}}.dump()), 422, "z");
  expect_error(s.handle("POST", "/sessions", json{{"model_id", m}, {"z", {"1", "x", "2", "3"}}}.dump()),
               422, "z[1]");
  expect_error(s.handle("POST", "/sessions", json{{"model_id", "model-99"}}.dump()), 404, "model_id");
  expect_error(s.handle("POST", "/sessions",
                        json{{"model_id", m}, {"stop_rule", {{"type", "plane_count"}}}}.dump()),
               422, "stop_rule.k");
}

TEST_F(ServiceTest, StepRunAndConflict) {
  Service s;
  const auto id = open(s, load(s), {{"z", kZ}, {"stop_rule", StopRule::eos(20, 0.0).to_json()}});
  const auto r = s.handle("POST", "/sessions/" + id + "/step", R"({"count": 3})");
  ASSERT_EQ(r.status, 200) << r.body;
  const json j = r.json();
  ASSERT_EQ(j["new_tokens"].size(), 3u);
  EXPECT_EQ(j["new_tokens"][2]["step"], 3);
  EXPECT_EQ(j["new_tokens"][0]["loop"].size(), 4u);
  EXPECT_EQ(s.handle("POST", "/sessions/" + id + "/step").json()["emitted"], 4);
  const auto run = s.handle("POST", "/sessions/" + id + "/run");
  EXPECT_EQ(run.json()["status"], "aborted");
  EXPECT_EQ(run.json()["emitted"], 20);
  expect_error(s.handle("POST", "/sessions/" + id + "/step"), 409);
  expect_error(s.handle("POST", "/sessions/" + id + "/step", R"({"count": 0})"), 422, "count");
  expect_error(s.handle("POST", "/sessions/session-404/step"), 404);
}

TEST_F(ServiceTest, MatchesLibraryDecodeByteForByte) {
  Service s;
  const auto m = load(s);
  const auto id = open(s, m, {{"z", kZ}});
  s.handle("POST", "/sessions/" + id + "/edits",
           R"([{"step": 3, "op": "translate", "dx": 0.2, "dy": 0}])");
  s.handle("POST", "/sessions/" + id + "/run");
  const auto loops = s.handle("GET", "/sessions/" + id + "/loops");
  EXPECT_EQ(loops.content_type, "application/x-ndjson");
  const auto direct = decode(model_, kZ.get<std::vector<double>>(), default_options(),
                             {EditOp::translate(3, 0.2, 0.0)});
  EXPECT_EQ(loops.body, serialize(direct.emitted()));
  EXPECT_EQ(deserialize_string(loops.body), direct.emitted());
}

TEST_F(ServiceTest, EditsValidateAndStayAtomic) {
  Service s;
  const auto id = open(s, load(s), {{"z", kZ}, {"stop_rule", StopRule::eos(20, 0.0).to_json()}});
  expect_error(s.handle("POST", "/sessions/" + id + "/edits",
                        R"({"edits": [{"step": 2, "op": "translate", "dy": 0}]})"),
               422, "edits[0].dx");
  expect_error(s.handle("POST", "/sessions/" + id + "/edits", R"({"edit": []})"), 422, "edits");
  s.handle("POST", "/sessions/" + id + "/step", R"({"count": 5})");
  s.handle("POST", "/sessions/" + id + "/edits", R"([{"step": 3, "op": "freeze"}])");
  expect_error(s.handle("POST", "/sessions/" + id + "/edits",
                        R"([{"step": 9, "op": "scale", "s": 2}, {"step": 2, "op": "scale", "s": 2}])"),
               409, "edits[1]");
  const json res = s.handle("GET", "/sessions/" + id).json();
  EXPECT_TRUE(res["pending_edits"].empty());
  EXPECT_EQ(res["frozen_prefix"], 3);

  const auto ok = s.handle("POST", "/sessions/" + id + "/edits",
                           R"([{"step": "next", "op": "translate", "dx": 0.2, "dy": 0}])");
  ASSERT_EQ(ok.status, 200) << ok.body;
  EXPECT_EQ(ok.json()["accepted"], 1);
  EXPECT_EQ(ok.json()["pending_edits"][0]["step"], 6);
}

TEST_F(ServiceTest, EditedRunDiffersDownstream) {
  Service s;
  const auto m = load(s);
  const json eos = StopRule::eos(20, 0.0).to_json();
  const auto clean = open(s, m, {{"z", kZ}, {"stop_rule", eos}});
  const auto edited = open(s, m, {{"z", kZ}, {"stop_rule", eos}});
  s.handle("POST", "/sessions/" + edited + "/edits", R"([{"step": 4, "op": "translate", "dx": 0.2, "dy": 0}])");
  s.handle("POST", "/sessions/" + clean + "/run");
  s.handle("POST", "/sessions/" + edited + "/run");
  const auto a = deserialize_string(s.handle("GET", "/sessions/" + clean + "/loops").body);
  const auto b = deserialize_string(s.handle("GET", "/sessions/" + edited + "/loops").body);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_EQ(a.tokens[t], b.tokens[t]);
  double diff = 0;
  for (std::size_t t = 4; t < a.tokens.size(); ++t) {
    for (std::size_t c = 0; c < 8; ++c) diff = std::max(diff, std::abs(a.tokens[t].coords[c] - b.tokens[t].coords[c]));
  }
  EXPECT_GT(diff, 1e-3);
}

TEST_F(ServiceTest, Rewind) {
  Service s;
  const auto id = open(s, load(s), {{"z", kZ}, {"stop_rule", StopRule::eos(20, 0.0).to_json()}});
  s.handle("POST", "/sessions/" + id + "/run");
  const auto before = s.handle("GET", "/sessions/" + id + "/loops").body;
  s.handle("POST", "/sessions/" + id + "/edits", R"([{"step": 21, "op": "scale", "s": 2}])");
  const auto r = s.handle("POST", "/sessions/" + id + "/rewind", R"({"to_step": 0})");
  ASSERT_EQ(r.status, 200) << r.body;
  EXPECT_EQ(r.json()["emitted"], 0);
  EXPECT_EQ(r.json()["status"], "running");
  EXPECT_TRUE(deserialize_string(s.handle("GET", "/sessions/" + id + "/loops").body).tokens.empty());
  s.handle("POST", "/sessions/" + id + "/run");
  EXPECT_EQ(s.handle("GET", "/sessions/" + id + "/loops").body, before);
  expect_error(s.handle("POST", "/sessions/" + id + "/rewind", R"({"to_step": 50})"), 422, "to_step");
  expect_error(s.handle("POST", "/sessions/" + id + "/rewind", R"({"to_step": -1})"), 422, "to_step");
}

TEST_F(ServiceTest, PointsAreOriented) {
  Service s;
  const auto id = open(s, load(s), {{"z", kZ}});
  const auto empty = s.handle("GET", "/sessions/" + id + "/points");
  ASSERT_EQ(empty.status, 200) << empty.body;
  EXPECT_EQ(empty.json()["count"], 0);
  s.handle("POST", "/sessions/" + id + "/step", R"({"count": 4})");
  const auto r = s.handle("GET", "/sessions/" + id + "/points", "", {{"density", "50"}, {"samples", "8"}});
  ASSERT_EQ(r.status, 200) << r.body;
  const json j = r.json();
  EXPECT_GT(j["count"].get<std::size_t>(), 0u);
  EXPECT_EQ(j["points"].size(), j["normals"].size());
  for (const auto& n : j["normals"]) {
    EXPECT_NEAR(std::hypot(n[0].get<double>(), n[1].get<double>(), n[2].get<double>()), 1.0, 1e-6);
  }
  expect_error(s.handle("GET", "/sessions/" + id + "/points", "", {{"density", "-2"}}), 422, "density");
  expect_error(s.handle("GET", "/sessions/" + id + "/points", "", {{"samples", "abc"}}), 422, "samples");
}

TEST_F(ServiceTest, InterpolateEndpoints) {
  Service s;
  const auto m = load(s);
  const json za = latent_to_json(sample_latent(tiny_config(), 1));
  const json zb = latent_to_json(sample_latent(tiny_config(), 2));
  const auto r = s.handle("POST", "/interpolate", json{{"model_id", m}, {"z_a", za}, {"z_b", zb}, {"k", 2}}.dump());
  ASSERT_EQ(r.status, 200) << r.body;
  const json j = r.json();
  ASSERT_EQ(j["results"].size(), 2u);
  EXPECT_EQ(j["results"][0]["z"], za);
  EXPECT_EQ(j["results"][1]["z"], zb);
  EXPECT_EQ(j["results"][0]["loopseq"],
            serialize(decode(model_, sample_latent(tiny_config(), 1), default_options()).emitted()));
  EXPECT_EQ(j["results"][1]["loopseq"],
            serialize(decode(model_, sample_latent(tiny_config(), 2), default_options()).emitted()));
  const auto five = s.handle("POST", "/interpolate",
                             json{{"model_id", m}, {"z_a", {{"sample", 1}}}, {"z_b", zb}, {"k", 5}}.dump());
  EXPECT_EQ(five.json()["results"].size(), 5u);
  EXPECT_EQ(five.json()["results"][2]["alpha"], 0.5);
  expect_error(s.handle("POST", "/interpolate", json{{"model_id", m}, {"z_a", za}, {"z_b", zb}, {"k", 1}}.dump()),
               422, "k");
  expect_error(s.handle("POST", "/interpolate", json{{"model_id", m}, {"z_a", za}, {"k", 3}}.dump()), 422, "z_b");
}

TEST_F(ServiceTest, LeastRecentlyUsedEviction) {
  Service s(ServiceOptions{3});
  const auto m = load(s);
  const auto a = open(s, m), b = open(s, m), c = open(s, m);
  EXPECT_EQ(s.handle("GET", "/sessions/" + a).status, 200);
  const auto d = open(s, m);
  EXPECT_EQ(s.session_count(), 3u);
  EXPECT_EQ(s.handle("GET", "/sessions/" + b).status, 404);
  for (const auto& id : {a, c, d}) EXPECT_EQ(s.handle("GET", "/sessions/" + id).status, 200);
  EXPECT_EQ(s.handle("DELETE", "/sessions/" + a).status, 200);
  EXPECT_EQ(s.handle("GET", "/sessions/" + a).status, 404);
  EXPECT_EQ(s.session_count(), 2u);
}

TEST_F(ServiceTest, ConcurrentStepsOnOneSessionSerialize) {
  Service s;
  const auto id = open(s, load(s), {{"z", kZ}, {"stop_rule", StopRule::eos(20, 0.0).to_json()}});
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 4; ++k) s.handle("POST", "/sessions/" + id + "/step");
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(s.handle("GET", "/sessions/" + id).json()["emitted"], 16);
  s.handle("POST", "/sessions/" + id + "/run");
  const auto direct = decode(model_, kZ.get<std::vector<double>>(), {StopRule::eos(20, 0.0), default_options().planes, {}});
  EXPECT_EQ(deserialize_string(s.handle("GET", "/sessions/" + id + "/loops").body).tokens,
            direct.emitted().tokens);
}

TEST(Port, EnvironmentOverridesFlag) {
  unsetenv("LOOPFORGE_PORT");
  EXPECT_EQ(resolve_port(8080), 8080);
  setenv("LOOPFORGE_PORT", "9123", 1);
  EXPECT_EQ(resolve_port(8080), 9123);
  setenv("LOOPFORGE_PORT", "99999", 1);
  EXPECT_THROW(resolve_port(8080), Error);
  unsetenv("LOOPFORGE_PORT");
}

TEST_F(ServiceTest, HttpSmoke) {
  const fs::path web = fs::temp_directory_path() / "loopforge_service_static";
  fs::create_directories(web);
  std::ofstream(web / "index.html") << "<!doctype html><title>loops</title>";
  Service service;
  HttpServer server(service, web);
  const int port = server.bind("127.0.0.1", 0);
  std::thread loop([&] { server.listen(); });
  httplib::Client client("127.0.0.1", port);
  client.set_connection_timeout(5);
  for (int i = 0; i < 100; ++i) {
    if (client.Get("/health")) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  const auto health = client.Get("/health");
  ASSERT_TRUE(health);
  EXPECT_EQ(health->status, 200);
  const auto page = client.Get("/index.html");
  ASSERT_TRUE(page);
  EXPECT_NE(page->body.find("loops"), std::string::npos);

  const auto loaded = client.Post("/models/load", json{{"checkpoint_path", path_.string()}}.dump(), "application/json");
  ASSERT_TRUE(loaded);
  ASSERT_EQ(loaded->status, 200) << loaded->body;
  const std::string m = json::parse(loaded->body)["model_id"];
  const auto created = client.Post("/sessions", json{{"model_id", m}, {"z", kZ}}.dump(), "application/json");
  ASSERT_EQ(created->status, 200);
  const std::string id = json::parse(created->body)["session_id"];
  EXPECT_EQ(client.Post("/sessions/" + id + "/run", "", "application/json")->status, 200);
  const auto loops = client.Get("/sessions/" + id + "/loops");
  ASSERT_TRUE(loops);
  EXPECT_EQ(loops->body, serialize(decode(model_, kZ.get<std::vector<double>>(), default_options()).emitted()));
  const auto bad = client.Post("/sessions/" + id + "/edits", R"([{"step": 1, "op": "spin"}])", "application/json");
  EXPECT_EQ(bad->status, 422);
  EXPECT_EQ(json::parse(bad->body)["field"], "edits[0].op");
  const auto points = client.Get("/sessions/" + id + "/points?density=20");
  EXPECT_EQ(points->status, 200);

  server.stop();
  loop.join();
  fs::remove_all(web);
}

}  // namespace
}  // namespace loopforge
