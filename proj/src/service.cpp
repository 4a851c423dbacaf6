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

#include "loopforge/service.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "loopforge/errors.hpp"
#include "loopforge/loop_sequence.hpp"
#include "loopforge/train.hpp"

namespace loopforge {

using nlohmann::json;

namespace {

struct RequestError : std::runtime_error {
  RequestError(int status, std::string code, const std::string& message, std::string field = {})
      : std::runtime_error(message), status(status), code(std::move(code)), field(std::move(field)) {}
  int status;
  std::string code;
  std::string field;
};

RequestError not_found(const std::string& what) {
  return RequestError(404, "not_found", what + " not found");
}

std::int64_t now_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kState: return 409;
    case ErrorKind::kCheckpoint:
    case ErrorKind::kIo:
    case ErrorKind::kParse: return 400;
    case ErrorKind::kNumericalHealth: return 500;
    default: return 422;
  }
}

HttpResponse error_response(int status, const std::string& code, const std::string& message,
                            const std::string& field) {
  json body{{"code", code}, {"message", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body.dump(), "application/json"};
}

HttpResponse ok(const json& body) { return {200, body.dump(), "application/json"}; }

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) parts.push_back(cur);
  return parts;
}

const json& require(const json& req, const std::string& key) {
  if (!req.contains(key)) throw FieldError(key, "is required");
  return req.at(key);
}

std::string require_string(const json& req, const std::string& key) {
  const json& v = require(req, key);
  if (!v.is_string()) throw FieldError(key, "must be a string");
  return v.get<std::string>();
}

std::size_t positive_count(const json& v, const std::string& field) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 1) ||
      v.get<std::uint64_t>() == 0) {
    throw FieldError(field, "must be a positive integer");
  }
  return v.get<std::size_t>();
}

std::size_t index_field(const json& v, const std::string& field) {
  if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
    throw FieldError(field, "must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

double query_number(const std::map<std::string, std::string>& query, const std::string& key,
                    double fallback) {
  const auto it = query.find(key);
  if (it == query.end()) return fallback;
  double v = 0;
  const auto& text = it->second;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw FieldError(key, "is not a finite number: \"" + text + "\"");
  }
  return v;
}

json token_json(const LoopToken& t, std::size_t step, double flag_probability) {
  json pts = json::array();
  for (std::size_t i = 0; i + 1 < t.coords.size(); i += 2) pts.push_back({t.coords[i], t.coords[i + 1]});
  return {{"step", step}, {"loop", pts}, {"level_up", t.level_up},
          {"flag_probability", flag_probability}};
}

json vec_rows(const std::vector<Vec3>& v) {
  json out = json::array();
  for (const auto& p : v) out.push_back({p.x, p.y, p.z});
  return out;
}

}  // namespace

Service::Service(ServiceOptions options) : options_(options) {
  if (options_.max_sessions == 0) throw Error(ErrorKind::kInvalidInput, "max_sessions must be >= 1");
}

std::size_t Service::model_count() const {
  std::lock_guard lock(mutex_);
  return models_.size();
}

std::size_t Service::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

HttpResponse Service::handle(const std::string& method, const std::string& path,
                             const std::string& body,
                             const std::map<std::string, std::string>& query) {
  try {
    json req = json::object();
    if (!body.empty()) {
      try {
        req = json::parse(body);
      } catch (const json::exception& e) {
        throw RequestError(400, "parse", std::string("request body is not JSON: ") + e.what());
      }
    }
    const auto parts = split_path(path);
    auto expect = [&](const char* m) {
      if (method != m) throw RequestError(405, "method_not_allowed", method + " not allowed on " + path);
    };
    auto object_body = [&]() -> const json& {
      if (!req.is_object()) throw FieldError("body", "must be a JSON object");
      return req;
    };
    if (parts.size() == 1 && parts[0] == "health") {
      expect("GET");
      return ok({{"status", "ok"}});
    }
    if (parts.size() == 1 && parts[0] == "models") {
      expect("GET");
      std::lock_guard lock(mutex_);
      json list = json::array();
      for (const auto& [id, m] : models_) {
        list.push_back({{"model_id", id}, {"config", to_json(m->model->config())}});
      }
      return ok({{"models", list}});
    }
    if (parts.size() == 2 && parts[0] == "models" && parts[1] == "load") {
      expect("POST");
      return ok(load_model(object_body()));
    }
    if (parts.size() == 1 && parts[0] == "interpolate") {
      expect("POST");
      return ok(interpolate(object_body()));
    }
    if (!parts.empty() && parts[0] == "sessions") {
      if (parts.size() == 1) {
        expect("POST");
        return ok(create_session(object_body()));
      }
      const auto entry = find_session(parts[1]);
      if (parts.size() == 2) {
        if (method == "DELETE") {
          std::lock_guard lock(mutex_);
          sessions_.erase(entry->id);
          lru_.remove(entry->id);
          return ok({{"deleted", entry->id}});
        }
        expect("GET");
        std::lock_guard lock(entry->mutex);
        return ok(resource(*entry));
      }
      if (parts.size() == 3) {
        const std::string& action = parts[2];
        std::lock_guard lock(entry->mutex);
        if (action == "step" || action == "run") {
          expect("POST");
          return ok(step(*entry, object_body(), action == "run"));
        }
        if (action == "edits") {
          expect("POST");
          return ok(add_edits(*entry, req));
        }
        if (action == "rewind") {
          expect("POST");
          return ok(rewind(*entry, object_body()));
        }
        if (action == "loops") {
          expect("GET");
          return {200, serialize(entry->session->emitted()), "application/x-ndjson"};
        }
        if (action == "points") {
          expect("GET");
          return ok(points(*entry, query));
        }
      }
    }
    throw RequestError(404, "not_found", "no route for " + method + " " + path);
  } catch (const RequestError& e) {
    return error_response(e.status, e.code, e.what(), e.field);
  } catch (const FieldError& e) {
    return error_response(422, to_string(e.kind()), e.what(), e.field());
  } catch (const Error& e) {
    return error_response(status_for(e.kind()), to_string(e.kind()), e.what(), "");
  } catch (const std::exception& e) {
    return error_response(500, "internal", e.what(), "");
  }
}

std::shared_ptr<Service::ModelEntry> Service::find_model(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = models_.find(id);
  if (it == models_.end()) throw RequestError(404, "not_found", "model " + id + " not found", "model_id");
  return it->second;
}

std::shared_ptr<Service::SessionEntry> Service::find_session(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw not_found("session " + id);
  lru_.remove(id);
  lru_.push_front(id);
  return it->second;
}

json Service::load_model(const json& req) {
  const std::string path = require_string(req, "checkpoint_path");
  Checkpoint ck = [&] {
    try {
      return load_checkpoint(path);
    } catch (const Error& e) {
      throw RequestError(400, to_string(e.kind()), e.what(), "checkpoint_path");
    }
  }();
  auto entry = std::make_shared<ModelEntry>();
  entry->model = std::make_shared<const LoopModel>(std::move(ck.model));
  entry->dataset = dataset_from_metadata(ck.metadata);
  entry->step = ck.step;
  entry->checkpoint = path;
  {
    std::lock_guard lock(mutex_);
    entry->id = "model-" + std::to_string(next_model_++);
    models_[entry->id] = entry;
  }
  return {{"model_id", entry->id},
          {"config", to_json(entry->model->config())},
          {"step", entry->step},
          {"dataset", to_json(entry->dataset)}};
}

LatentCode Service::latent_for(const ModelEntry& m, const json& req, const std::string& field) {
  const auto& cfg = m.model->config();
  if (!req.contains(field)) return sample_latent(cfg, 0);
  const json& z = req.at(field);
  if (z.is_object()) {
    if (!z.contains("sample")) throw FieldError(field + ".sample", "is required");
    return sample_latent(cfg, index_field(z.at("sample"), field + ".sample"));
  }
  return latent_from_json(z, cfg.latent_dim, field);
}

json Service::resource(const SessionEntry& e) const {
  const DecodeSession& s = *e.session;
  return {{"session_id", e.id},
          {"model_id", e.model_id},
          {"status", status_name(s.status())},
          {"z", latent_to_json(s.z())},
          {"stop_rule", s.options().stop.to_json()},
          {"emitted", s.emitted().tokens.size()},
          {"level_ups", s.level_ups()},
          {"frozen_prefix", s.frozen_prefix()},
          {"pending_edits", edit_script_json(s.pending_edits())},
          {"created_ms", e.created_ms},
          {"updated_ms", e.updated_ms}};
}

json Service::create_session(const json& req) {
  const auto model = find_model(require_string(req, "model_id"));
  const LatentCode z = latent_for(*model, req, "z");
  std::optional<StopRule> stop;
  if (req.contains("stop_rule")) stop = StopRule::from_json(req.at("stop_rule"));
  auto entry = std::make_shared<SessionEntry>();
  entry->model_id = model->id;
  entry->dataset = model->dataset;
  entry->session = std::make_unique<DecodeSession>(model->model, z, session_options(model->dataset, stop));
  entry->created_ms = entry->updated_ms = now_ms();
  std::lock_guard lock(mutex_);
  entry->id = "session-" + std::to_string(next_session_++);
  sessions_[entry->id] = entry;
  lru_.push_front(entry->id);
  while (sessions_.size() > options_.max_sessions) {
    sessions_.erase(lru_.back());
    lru_.pop_back();
  }
  std::lock_guard session_lock(entry->mutex);
  return resource(*entry);
}

json Service::step(SessionEntry& e, const json& req, bool to_end) {
  DecodeSession& s = *e.session;
  const std::size_t count =
      to_end ? std::numeric_limits<std::size_t>::max() : req.contains("count") ? positive_count(req.at("count"), "count") : 1;
  if (s.status() != SessionStatus::kRunning) {
    throw RequestError(409, "state", "session " + e.id + " is " + status_name(s.status()));
  }
  const std::size_t before = s.emitted().tokens.size();
  s.step_n(count);
  json tokens = json::array();
  const auto& emitted = s.emitted().tokens;
  for (std::size_t t = before; t < emitted.size(); ++t) {
    tokens.push_back(token_json(emitted[t], t + 1, s.flag_probabilities()[t]));
  }
  e.updated_ms = now_ms();
  return {{"new_tokens", tokens}, {"status", status_name(s.status())}, {"emitted", emitted.size()}};
}

json Service::add_edits(SessionEntry& e, const json& req) {
  const json& script = req.is_object() ? require(req, "edits") : req;
  const auto edits = parse_edit_script(script, e.session->model().config().n_points);
  DecodeSession trial = *e.session;
  for (std::size_t i = 0; i < edits.size(); ++i) {
    try {
      trial.add_edit(edits[i]);
    } catch (const Error& err) {
      const std::string field = "edits[" + std::to_string(i) + "]";
      throw RequestError(status_for(err.kind()), to_string(err.kind()), err.what(), field);
    }
  }
  *e.session = std::move(trial);
  e.updated_ms = now_ms();
  json out = resource(e);
  out["accepted"] = edits.size();
  return out;
}

json Service::rewind(SessionEntry& e, const json& req) {
  const std::size_t to = index_field(require(req, "to_step"), "to_step");
  try {
    e.session->rewind(to);
  } catch (const Error& err) {
    throw RequestError(status_for(err.kind()), to_string(err.kind()), err.what(), "to_step");
  }
  e.updated_ms = now_ms();
  return resource(e);
}

json Service::points(SessionEntry& e, const std::map<std::string, std::string>& query) {
  const DecodeSession& s = *e.session;
  const double density = query_number(query, "density", 400.0);
  const double tilt = query_number(query, "tilt", kDefaultBoundaryTilt);
  const double samples = query_number(query, "samples", static_cast<double>(s.model().config().n_points));
  const double seed = query_number(query, "seed", 0.0);
  if (!(density > 0)) throw FieldError("density", "must be > 0");
  if (!(tilt >= 0 && tilt <= 1)) throw FieldError("tilt", "must lie in [0, 1]");
  if (!(samples >= 1) || samples != std::floor(samples) || samples > 1e6) {
    throw FieldError("samples", "must be a positive integer");
  }
  if (!(seed >= 0) || seed != std::floor(seed)) throw FieldError("seed", "must be a non-negative integer");
  OrientedPointCloud cloud;
  if (!s.emitted().tokens.empty()) {
    PlaneList planes = s.options().planes;
    if (planes.empty()) planes = make_plane_schedule(e.dataset);
    cloud = oriented_cloud(s.emitted(), planes, static_cast<std::size_t>(samples), density, tilt,
                           static_cast<std::uint64_t>(seed));
  }
  return {{"count", cloud.size()}, {"points", vec_rows(cloud.points)}, {"normals", vec_rows(cloud.normals)}};
}

json Service::interpolate(const json& req) {
  const auto model = find_model(require_string(req, "model_id"));
  if (!req.contains("z_a")) throw FieldError("z_a", "is required");
  if (!req.contains("z_b")) throw FieldError("z_b", "is required");
  const LatentCode za = latent_for(*model, req, "z_a");
  const LatentCode zb = latent_for(*model, req, "z_b");
  const std::size_t k = positive_count(require(req, "k"), "k");
  if (k < 2) throw FieldError("k", "must be >= 2");
  if (k > 1000) throw FieldError("k", "must be <= 1000");
  std::optional<StopRule> stop;
  if (req.contains("stop_rule")) stop = StopRule::from_json(req.at("stop_rule"));
  const SessionOptions opts = session_options(model->dataset, stop);
  json results = json::array();
  const auto codes = loopforge::interpolate(za, zb, k);
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const DecodeSession s = decode(model->model, codes[i], opts);
    results.push_back({{"alpha", static_cast<double>(i) / static_cast<double>(k - 1)},
                       {"z", latent_to_json(codes[i])},
                       {"status", status_name(s.status())},
                       {"loopseq", serialize(s.emitted())}});
  }
  return {{"k", k}, {"results", results}};
}

int resolve_port(int flag_port) {
  const char* env = std::getenv("LOOPFORGE_PORT");
  if (env == nullptr || *env == '\0') return flag_port;
  int port = 0;
  const std::string text(env);
  const auto r = std::from_chars(text.data(), text.data() + text.size(), port);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size() || port < 0 || port > 65535) {
    throw Error(ErrorKind::kInvalidInput, "LOOPFORGE_PORT is not a valid port: " + text);
  }
  return port;
}

}  // namespace loopforge
