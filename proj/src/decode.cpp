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

#include "loopforge/decode.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "loopforge/errors.hpp"

namespace loopforge {

using nlohmann::json;

json StopRule::to_json() const {
  if (kind == Kind::kPlaneCount) return {{"type", "plane_count"}, {"k", planes}};
  return {{"type", "eos"}, {"planes", planes}, {"eps", eps}};
}

StopRule StopRule::from_json(const json& j) {
  if (!j.is_object()) throw FieldError("stop_rule", "must be an object");
  const auto type = j.value("type", std::string());
  try {
    if (type == "plane_count") {
      if (!j.contains("k")) throw FieldError("stop_rule.k", "is required");
      const auto& k = j.at("k");
      if (!k.is_number_unsigned() || k.get<std::size_t>() == 0) {
        throw FieldError("stop_rule.k", "must be a positive integer");
      }
      return plane_count(k.get<std::size_t>());
    }
    if (type == "eos") {
      StopRule r = eos(j.value("planes", std::size_t{40}), j.value("eps", 0.01));
      if (r.planes == 0) throw FieldError("stop_rule.planes", "must be positive");
      if (!(r.eps >= 0) || !std::isfinite(r.eps)) {
        throw FieldError("stop_rule.eps", "must be a finite value >= 0");
      }
      return r;
    }
  } catch (const json::exception& e) {
    throw FieldError("stop_rule", e.what());
  }
  throw FieldError("stop_rule.type", "must be \"plane_count\" or \"eos\"");
}

std::string status_name(SessionStatus s) {
  switch (s) {
    case SessionStatus::kRunning: return "running";
    case SessionStatus::kDone: return "done";
    case SessionStatus::kAborted: return "aborted";
  }
  return "unknown";
}

EditOp EditOp::translate(std::optional<std::size_t> step, double dx, double dy) {
  EditOp e;
  e.kind = Kind::kTranslate;
  e.step = step;
  e.dx = dx;
  e.dy = dy;
  return e;
}

EditOp EditOp::scale(std::optional<std::size_t> step, double s) {
  EditOp e;
  e.kind = Kind::kScale;
  e.step = step;
  e.s = s;
  return e;
}

EditOp EditOp::replace(std::optional<std::size_t> step, LoopToken token) {
  EditOp e;
  e.kind = Kind::kReplace;
  e.step = step;
  e.tokens = {std::move(token)};
  return e;
}

EditOp EditOp::insert(std::optional<std::size_t> step, std::vector<LoopToken> tokens) {
  EditOp e;
  e.kind = Kind::kInsert;
  e.step = step;
  e.tokens = std::move(tokens);
  return e;
}

EditOp EditOp::freeze_prefix(std::size_t t) {
  EditOp e;
  e.kind = Kind::kFreezePrefix;
  e.step = t;
  return e;
}

namespace {

json loop_json(const LoopToken& t) {
  json pts = json::array();
  for (std::size_t i = 0; i + 1 < t.coords.size(); i += 2) {
    pts.push_back({t.coords[i], t.coords[i + 1]});
  }
  return {{"loop", pts}, {"level_up", t.level_up}};
}

LoopToken parse_loop(const json& j, const std::string& field, std::size_t n) {
  if (!j.is_object()) throw FieldError(field, "must be an object with loop and level_up");
  if (!j.contains("loop") || !j.at("loop").is_array()) {
    throw FieldError(field + ".loop", "must be an array of [x, y] points");
  }
  std::vector<Point2> pts;
  for (const auto& p : j.at("loop")) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw FieldError(field + ".loop", "points must be [x, y] number pairs");
    }
    const Point2 q{p[0].get<double>(), p[1].get<double>()};
    if (!std::isfinite(q.x) || !std::isfinite(q.y)) {
      throw FieldError(field + ".loop", "coordinates must be finite");
    }
    pts.push_back(q);
  }
  int flag = 0;
  if (j.contains("level_up")) {
    const auto& f = j.at("level_up");
    if (!f.is_number_integer() || (f.get<int>() != 0 && f.get<int>() != 1)) {
      throw FieldError(field + ".level_up", "must be 0 or 1");
    }
    flag = f.get<int>();
  }
  Loop loop;
  if (pts.size() == n) {
    loop.points = std::move(pts);
  } else {
    try {
      loop = resample_loop(pts, n);
    } catch (const Error& e) {
      throw FieldError(field + ".loop", e.what());
    }
  }
  return make_token(loop, flag);
}

double number_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw FieldError(path + "." + key, "is required");
  const auto& v = j.at(key);
  if (!v.is_number() || !std::isfinite(v.get<double>())) {
    throw FieldError(path + "." + key, "must be a finite number");
  }
  return v.get<double>();
}

}  // namespace

json EditOp::to_json() const {
  json j;
  j["step"] = step ? json(*step) : json("next");
  switch (kind) {
    case Kind::kTranslate:
      j["op"] = "translate";
      j["dx"] = dx;
      j["dy"] = dy;
      break;
    case Kind::kScale:
      j["op"] = "scale";
      j["s"] = s;
      break;
    case Kind::kReplace: {
      j["op"] = "replace";
      const json l = loop_json(tokens.front());
      j["loop"] = l["loop"];
      j["level_up"] = l["level_up"];
      break;
    }
    case Kind::kInsert: {
      j["op"] = "insert";
      json loops = json::array();
      for (const auto& t : tokens) loops.push_back(loop_json(t));
      j["loops"] = loops;
      break;
    }
    case Kind::kFreezePrefix:
      j["op"] = "freeze";
      break;
  }
  return j;
}

std::vector<EditOp> parse_edit_script(const json& script, std::size_t n_points) {
  if (!script.is_array()) throw FieldError("edits", "edit script must be a JSON array");
  std::vector<EditOp> edits;
  for (std::size_t i = 0; i < script.size(); ++i) {
    const json& item = script[i];
    const std::string path = "edits[" + std::to_string(i) + "]";
    if (!item.is_object()) throw FieldError(path, "must be an object");
    if (!item.contains("op") || !item.at("op").is_string()) {
      throw FieldError(path + ".op", "is required and must be a string");
    }
    std::optional<std::size_t> step;
    if (!item.contains("step")) throw FieldError(path + ".step", "is required");
    const json& st = item.at("step");
    if (st.is_string() && st.get<std::string>() == "next") {
      step = std::nullopt;
    } else if (st.is_number_unsigned() && st.get<std::size_t>() >= 1) {
      step = st.get<std::size_t>();
    } else {
      throw FieldError(path + ".step", "must be a positive integer or \"next\"");
    }
    const std::string op = item.at("op").get<std::string>();
    if (op == "translate") {
      edits.push_back(EditOp::translate(step, number_field(item, "dx", path),
                                        number_field(item, "dy", path)));
    } else if (op == "scale") {
      const double s = number_field(item, "s", path);
      if (!(s > 0)) throw FieldError(path + ".s", "must be > 0");
      edits.push_back(EditOp::scale(step, s));
    } else if (op == "replace") {
      edits.push_back(EditOp::replace(step, parse_loop(item, path, n_points)));
    } else if (op == "insert") {
      if (!item.contains("loops") || !item.at("loops").is_array() || item.at("loops").empty()) {
        throw FieldError(path + ".loops", "must be a non-empty array");
      }
      std::vector<LoopToken> tokens;
      for (std::size_t k = 0; k < item.at("loops").size(); ++k) {
        tokens.push_back(parse_loop(item.at("loops")[k],
                                    path + ".loops[" + std::to_string(k) + "]", n_points));
      }
      edits.push_back(EditOp::insert(step, std::move(tokens)));
    } else if (op == "freeze") {
      if (!step) throw FieldError(path + ".step", "freeze needs an explicit step");
      edits.push_back(EditOp::freeze_prefix(*step));
    } else {
      throw FieldError(path + ".op", "unknown op \"" + op + "\"");
    }
  }
  return edits;
}

json edit_script_json(const std::vector<EditOp>& edits) {
  json out = json::array();
  for (const auto& e : edits) out.push_back(e.to_json());
  return out;
}

DecodeSession::DecodeSession(std::shared_ptr<const LoopModel> model, LatentCode z,
                             SessionOptions options)
    : model_(std::move(model)),
      z_(std::move(z)),
      options_(std::move(options)),
      decoder_(*model_, z_) {
  const auto& stop = options_.stop;
  if (stop.planes == 0) throw Error(ErrorKind::kInvalidInput, "stop rule needs planes >= 1");
  if (!options_.planes.empty() && stop.kind == StopRule::Kind::kPlaneCount &&
      options_.planes.size() != stop.planes) {
    throw Error(ErrorKind::kInvalidInput,
                "plane schedule has " + std::to_string(options_.planes.size()) +
                    " planes but the stop rule expects " + std::to_string(stop.planes));
  }
  emitted_.n_points = model_->config().n_points;
  emitted_.plane_count = options_.planes.empty() ? stop.planes : options_.planes.size();
  emitted_.planes = options_.planes;
  emitted_.axis = options_.axis;
}

void DecodeSession::apply(const EditOp& edit, std::size_t, LoopToken& token) const {
  switch (edit.kind) {
    case EditOp::Kind::kTranslate:
      for (std::size_t i = 0; i + 1 < token.coords.size(); i += 2) {
        token.coords[i] += edit.dx;
        token.coords[i + 1] += edit.dy;
      }
      break;
    case EditOp::Kind::kScale: {
      const Loop loop = token_loop(token);
      const Point2 c = loop_centroid(loop.points);
      for (std::size_t i = 0; i + 1 < token.coords.size(); i += 2) {
        token.coords[i] += (edit.s - 1.0) * (token.coords[i] - c.x);
        token.coords[i + 1] += (edit.s - 1.0) * (token.coords[i + 1] - c.y);
      }
      break;
    }
    case EditOp::Kind::kReplace:
      token = edit.tokens.front();
      break;
    case EditOp::Kind::kInsert:
    case EditOp::Kind::kFreezePrefix:
      break;
  }
}

StepResult DecodeSession::step() {
  if (status_ != SessionStatus::kRunning) {
    throw Error(ErrorKind::kState, "session is " + status_name(status_));
  }
  const auto& cfg = model_->config();
  const std::size_t t = emitted_.tokens.size() + 1;
  const auto& raw = decoder_.prediction();
  const std::size_t nc = 2 * cfg.n_points;
  StepResult result;
  result.flag_probability = flag_probability(raw[nc]);
  LoopToken token;
  token.coords.assign(raw.begin(), raw.begin() + static_cast<long>(nc));
  token.level_up = result.flag_probability >= 0.5 ? 1 : 0;

  auto it = pending_.begin();
  while (it != pending_.end()) {
    if (*it->step == t) {
      apply(*it, t, token);
      it = pending_.erase(it);
    } else {
      ++it;
    }
  }
  if (t == 1) token.level_up = 1;
  for (double v : token.coords) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNumericalHealth, "non-finite token");
  }

  const std::size_t ups = emitted_.level_up_count();
  const auto& stop = options_.stop;
  if (stop.kind == StopRule::Kind::kPlaneCount) {
    if (token.level_up == 1 && ups == stop.planes) {
      status_ = SessionStatus::kDone;
      result.status = status_;
      return result;
    }
  } else {
    double peak = 0;
    for (double v : token.coords) peak = std::max(peak, std::abs(v));
    if (token.level_up == 1 && peak <= stop.eps) {
      status_ = SessionStatus::kDone;
      result.status = status_;
      return result;
    }
    if (token.level_up == 1 && ups == stop.planes) {
      status_ = SessionStatus::kAborted;
      result.status = status_;
      return result;
    }
  }

  emitted_.tokens.push_back(token);
  flag_probs_.push_back(result.flag_probability);
  if (emitted_.tokens.size() >= cfg.max_seq_len) {
    const bool complete = stop.kind == StopRule::Kind::kPlaneCount &&
                          emitted_.level_up_count() == stop.planes;
    status_ = complete ? SessionStatus::kDone : SessionStatus::kAborted;
  } else {
    std::vector<double> row = token.coords;
    row.push_back(token.level_up);
    decoder_.push(row);
  }
  result.token = std::move(token);
  result.status = status_;
  return result;
}

std::vector<StepResult> DecodeSession::step_n(std::size_t count) {
  std::vector<StepResult> out;
  for (std::size_t i = 0; i < count && status_ == SessionStatus::kRunning; ++i) {
    out.push_back(step());
  }
  return out;
}

void DecodeSession::run() {
  while (status_ == SessionStatus::kRunning) step();
}

void DecodeSession::truncate(std::size_t tokens) {
  emitted_.tokens.resize(tokens);
  flag_probs_.resize(tokens);
  decoder_.truncate(tokens);
  status_ = SessionStatus::kRunning;
}

void DecodeSession::add_edit(EditOp edit) {
  const auto& cfg = model_->config();
  const std::size_t emitted = emitted_.tokens.size();
  if (edit.kind == EditOp::Kind::kFreezePrefix) {
    const std::size_t t = edit.step.value_or(emitted);
    if (t > emitted) {
      throw Error(ErrorKind::kRange, "cannot freeze " + std::to_string(t) + " tokens; only " +
                                         std::to_string(emitted) + " emitted");
    }
    frozen_ = std::max(frozen_, t);
    return;
  }
  const std::size_t step = edit.step.value_or(emitted + 1);
  if (step == 0) throw Error(ErrorKind::kRange, "edit steps are 1-based");
  if (step <= frozen_) {
    throw Error(ErrorKind::kState, "step " + std::to_string(step) + " lies in the frozen prefix 1.." +
                                       std::to_string(frozen_));
  }
  const std::size_t span = edit.kind == EditOp::Kind::kInsert ? edit.tokens.size() : 1;
  if (span == 0) throw Error(ErrorKind::kInvalidInput, "insert needs at least one loop");
  if (step + span - 1 > cfg.max_seq_len) {
    throw Error(ErrorKind::kRange, "edit reaches step " + std::to_string(step + span - 1) +
                                       " beyond max_seq_len " + std::to_string(cfg.max_seq_len));
  }
  if (edit.kind == EditOp::Kind::kScale && !(edit.s > 0 && std::isfinite(edit.s))) {
    throw Error(ErrorKind::kInvalidInput, "scale factor must be > 0");
  }
  if (edit.kind == EditOp::Kind::kTranslate && !(std::isfinite(edit.dx) && std::isfinite(edit.dy))) {
    throw Error(ErrorKind::kInvalidInput, "translation must be finite");
  }
  for (const auto& t : edit.tokens) {
    if (t.coords.size() != 2 * cfg.n_points || (t.level_up != 0 && t.level_up != 1)) {
      throw Error(ErrorKind::kShape, "edit loop must have " + std::to_string(cfg.n_points) +
                                         " points and a 0/1 flag");
    }
    for (double v : t.coords) {
      if (!std::isfinite(v)) throw Error(ErrorKind::kInvalidInput, "edit loop is not finite");
    }
  }
  if (step <= emitted) {
    truncate(step - 1);
  } else if (status_ != SessionStatus::kRunning) {
    throw Error(ErrorKind::kState, "session is " + status_name(status_) +
                                       "; rewind before editing future steps");
  }
  if (edit.kind == EditOp::Kind::kInsert) {
    for (std::size_t i = 0; i < span; ++i) {
      pending_.push_back(EditOp::replace(step + i, edit.tokens[i]));
    }
  } else {
    edit.step = step;
    pending_.push_back(std::move(edit));
  }
}

void DecodeSession::add_edits(const std::vector<EditOp>& edits) {
  for (const auto& e : edits) add_edit(e);
}

void DecodeSession::transplant(const LoopSequence& donor, std::size_t first, std::size_t last,
                               std::size_t at_step) {
  if (donor.n_points != model_->config().n_points) {
    throw Error(ErrorKind::kShape, "donor has N = " + std::to_string(donor.n_points));
  }
  if (first == 0 || first > last || last > donor.tokens.size()) {
    throw Error(ErrorKind::kRange, "donor steps " + std::to_string(first) + ".." +
                                       std::to_string(last) + " outside 1.." +
                                       std::to_string(donor.tokens.size()));
  }
  if (at_step == 0 || at_step > emitted_.tokens.size() + 1) {
    throw Error(ErrorKind::kRange, "transplant step " + std::to_string(at_step) +
                                       " beyond emitted length + 1 = " +
                                       std::to_string(emitted_.tokens.size() + 1));
  }
  std::vector<LoopToken> tokens(donor.tokens.begin() + static_cast<long>(first - 1),
                                donor.tokens.begin() + static_cast<long>(last));
  add_edit(EditOp::insert(at_step, std::move(tokens)));
}

void DecodeSession::rewind(std::size_t to_step) {
  if (to_step > emitted_.tokens.size()) {
    throw Error(ErrorKind::kRange, "cannot rewind to " + std::to_string(to_step) + "; only " +
                                       std::to_string(emitted_.tokens.size()) + " emitted");
  }
  if (to_step < frozen_) {
    throw Error(ErrorKind::kState, "cannot rewind into the frozen prefix 1.." +
                                       std::to_string(frozen_));
  }
  truncate(to_step);
  pending_.clear();
}

DecodeSession decode(std::shared_ptr<const LoopModel> model, const LatentCode& z,
                     const SessionOptions& options, const std::vector<EditOp>& edits) {
  DecodeSession session(std::move(model), z, options);
  session.add_edits(edits);
  session.run();
  return session;
}

DatasetConfig dataset_from_metadata(const json& metadata) {
  if (!metadata.is_object() || !metadata.contains("dataset")) {
    return DatasetConfig::preset(ShapeCategory::kVase);
  }
  return dataset_config_from_json(metadata.at("dataset"));
}

SessionOptions session_options(const DatasetConfig& ds, std::optional<StopRule> stop) {
  SessionOptions o;
  o.stop = stop ? *stop
                : (ds.eos_token ? StopRule::eos(ds.plane_count) : StopRule::plane_count(ds.plane_count));
  o.axis = ds.slice_axis;
  if (o.stop.planes >= 2) {
    o.planes = make_plane_schedule(ds.slice_axis, o.stop.planes, ds.range_low, ds.range_high);
  }
  return o;
}

json latent_to_json(const LatentCode& z) {
  json out = json::array();
  char buf[64];
  for (double v : z) {
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.push_back(std::string(buf, r.ptr));
  }
  return out;
}

LatentCode latent_from_json(const json& j, std::size_t dim, const std::string& field) {
  if (!j.is_array()) throw FieldError(field, "must be an array of numbers or decimal strings");
  if (j.size() != dim) {
    throw FieldError(field, "has " + std::to_string(j.size()) + " entries; the model expects " +
                                std::to_string(dim));
  }
  LatentCode z;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = field + "[" + std::to_string(i) + "]";
    double v = 0;
    if (j[i].is_number()) {
      v = j[i].get<double>();
    } else if (j[i].is_string()) {
      const auto& text = j[i].get_ref<const std::string&>();
      const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
      if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
        throw FieldError(at, "is not a decimal number: \"" + text + "\"");
      }
    } else {
      throw FieldError(at, "must be a number or decimal string");
    }
    if (!std::isfinite(v)) throw FieldError(at, "must be finite");
    z.push_back(v);
  }
  return z;
}

LatentCode sample_latent(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_standard_normal(cfg.latent_dim, rng);
}

std::vector<LatentCode> interpolate(const LatentCode& a, const LatentCode& b, std::size_t k) {
  if (a.size() != b.size()) throw Error(ErrorKind::kShape, "latent codes differ in length");
  if (k < 2) throw Error(ErrorKind::kInvalidInput, "interpolation needs k >= 2");
  std::vector<LatentCode> out;
  for (std::size_t i = 0; i < k; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(k - 1);
    LatentCode z(a.size());
    for (std::size_t d = 0; d < a.size(); ++d) z[d] = (1.0 - alpha) * a[d] + alpha * b[d];
    out.push_back(std::move(z));
  }
  return out;
}

}  // namespace loopforge
