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

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "loopforge/decode.hpp"
#include "loopforge/model.hpp"
#include "loopforge/recon.hpp"
#include "loopforge/synthetic.hpp"

namespace loopforge {

struct HttpResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";

  nlohmann::json json() const { return nlohmann::json::parse(body); }
};

struct ServiceOptions {
  /// Least recently used sessions beyond this are dropped.
  std::size_t max_sessions = 64;
};

/// Models and decode sessions behind a JSON request interface. Transport
/// free; see HttpServer for the socket side.
class Service {
 public:
  explicit Service(ServiceOptions options = {});

  /// Routes one request. Never throws; failures become {code, message, field?}.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::string& body = "",
                      const std::map<std::string, std::string>& query = {});

  std::size_t model_count() const;
  std::size_t session_count() const;

 private:
  struct ModelEntry {
    std::string id;
    std::shared_ptr<const LoopModel> model;
    DatasetConfig dataset;
    std::uint64_t step = 0;
    std::string checkpoint;
  };
  struct SessionEntry {
    std::string id;
    std::string model_id;
    std::mutex mutex;
    std::unique_ptr<DecodeSession> session;
    DatasetConfig dataset;
    std::int64_t created_ms = 0;
    std::int64_t updated_ms = 0;
  };

  nlohmann::json load_model(const nlohmann::json& req);
  nlohmann::json create_session(const nlohmann::json& req);
  nlohmann::json step(SessionEntry& e, const nlohmann::json& req, bool to_end);
  nlohmann::json add_edits(SessionEntry& e, const nlohmann::json& req);
  nlohmann::json rewind(SessionEntry& e, const nlohmann::json& req);
  nlohmann::json points(SessionEntry& e, const std::map<std::string, std::string>& query);
  nlohmann::json interpolate(const nlohmann::json& req);
  nlohmann::json resource(const SessionEntry& e) const;

  std::shared_ptr<ModelEntry> find_model(const std::string& id) const;
  std::shared_ptr<SessionEntry> find_session(const std::string& id);
  LatentCode latent_for(const ModelEntry& m, const nlohmann::json& req, const std::string& field);

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<ModelEntry>> models_;
  std::unordered_map<std::string, std::shared_ptr<SessionEntry>> sessions_;
  /// Most recently used first.
  std::list<std::string> lru_;
  std::uint64_t next_model_ = 1;
  std::uint64_t next_session_ = 1;
};

/// Serves a Service over HTTP/1.1, optionally with static files at "/".
class HttpServer {
 public:
  HttpServer(Service& service, std::filesystem::path static_dir = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Returns the bound port; port 0 picks a free one. Throws io on failure.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// LOOPFORGE_PORT when set and valid, otherwise `flag_port`.
int resolve_port(int flag_port);

}  // namespace loopforge
