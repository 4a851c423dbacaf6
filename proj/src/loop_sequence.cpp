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

#include "loopforge/loop_sequence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loopforge/errors.hpp"

namespace loopforge {

using nlohmann::json;

namespace {

bool same_planes(const PlaneList& a, const PlaneList& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!(a[i].origin == b[i].origin) || !(a[i].normal == b[i].normal) ||
        !(a[i].basis_x == b[i].basis_x) || !(a[i].basis_y == b[i].basis_y)) {
      return false;
    }
  }
  return true;
}

// Intra-plane order: larger |area| first, then start point (x, then y).
bool loop_order(const Loop& a, const Loop& b) {
  const double aa = std::abs(signed_area(a));
  const double ab = std::abs(signed_area(b));
  if (aa != ab) return aa > ab;
  const Point2 pa = a.points.empty() ? Point2{} : a.points.front();
  const Point2 pb = b.points.empty() ? Point2{} : b.points.front();
  if (pa.x != pb.x) return pa.x < pb.x;
  return pa.y < pb.y;
}

json vec_json(Vec3 v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j, std::size_t line, const char* what) {
  if (!j.is_array() || j.size() != 3) {
    throw ParseError(line, std::string(what) + " must be a 3-vector");
  }
  Vec3 v;
  double* dst[3] = {&v.x, &v.y, &v.z};
  for (std::size_t i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw ParseError(line, std::string(what) + " must be numeric");
    *dst[i] = j[i].get<double>();
    if (!std::isfinite(*dst[i])) throw ParseError(line, std::string(what) + " not finite");
  }
  return v;
}

std::size_t trimmed_size(const LoopSequence& seq) {
  std::size_t n = seq.tokens.size();
  if (n > 0 && is_eos_token(seq.tokens.back())) --n;
  return n;
}

}  // namespace

std::size_t LoopSequence::level_up_count() const {
  return static_cast<std::size_t>(std::count_if(
      tokens.begin(), tokens.end(), [](const LoopToken& t) { return t.level_up == 1; }));
}

bool operator==(const LoopSequence& a, const LoopSequence& b) {
  return a.n_points == b.n_points && a.plane_count == b.plane_count &&
         a.axis == b.axis && same_planes(a.planes, b.planes) && a.tokens == b.tokens;
}

std::vector<double> token_pack(const Loop& loop, int level_up) {
  if (level_up != 0 && level_up != 1) {
    throw Error(ErrorKind::kShape, "level-up flag must be 0 or 1");
  }
  std::vector<double> v;
  v.reserve(2 * loop.points.size() + 1);
  for (const auto& p : loop.points) {
    v.push_back(p.x);
    v.push_back(p.y);
  }
  v.push_back(static_cast<double>(level_up));
  return v;
}

std::pair<Loop, int> token_unpack(std::span<const double> v, std::size_t n) {
  if (v.size() != 2 * n + 1) {
    throw Error(ErrorKind::kShape, "token has length " + std::to_string(v.size()) +
                                       ", expected " + std::to_string(2 * n + 1));
  }
  const double flag = v[2 * n];
  if (flag != 0.0 && flag != 1.0) {
    throw Error(ErrorKind::kShape, "level-up flag must be 0 or 1");
  }
  Loop loop;
  loop.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) loop.points.push_back({v[2 * i], v[2 * i + 1]});
  return {std::move(loop), static_cast<int>(flag)};
}

LoopToken make_token(const Loop& loop, int level_up) {
  auto packed = token_pack(loop, level_up);
  packed.pop_back();
  return LoopToken{std::move(packed), level_up};
}

Loop token_loop(const LoopToken& token) {
  Loop loop;
  loop.points.reserve(token.n_points());
  for (std::size_t i = 0; i + 1 < token.coords.size(); i += 2) {
    loop.points.push_back({token.coords[i], token.coords[i + 1]});
  }
  return loop;
}

LoopToken eos_token(std::size_t n) { return LoopToken{std::vector<double>(2 * n, 0.0), 1}; }

bool is_eos_token(const LoopToken& token) {
  return token.level_up == 1 &&
         std::all_of(token.coords.begin(), token.coords.end(),
                     [](double c) { return c == 0.0; });
}

LoopSequence encode_sequence(const std::vector<std::vector<Loop>>& per_plane,
                             std::size_t plane_count) {
  if (per_plane.size() > plane_count) {
    throw Error(ErrorKind::kPlaneOverflow, "more plane groups than planes");
  }
  LoopSequence seq;
  seq.plane_count = plane_count;
  bool n_known = false;
  for (const auto& group : per_plane) {
    if (group.empty()) continue;
    std::vector<Loop> ordered = group;
    std::stable_sort(ordered.begin(), ordered.end(), loop_order);
    for (std::size_t k = 0; k < ordered.size(); ++k) {
      if (!n_known) {
        seq.n_points = ordered[k].points.size();
        n_known = true;
      } else if (ordered[k].points.size() != seq.n_points) {
        throw Error(ErrorKind::kShape, "loops have differing point counts");
      }
      seq.tokens.push_back(make_token(ordered[k], k == 0 ? 1 : 0));
    }
  }
  if (seq.tokens.empty()) throw Error(ErrorKind::kEmptyShape, "every plane is empty");
  return seq;
}

LoopSequence encode_sequence(const std::vector<std::vector<Loop>>& per_plane,
                             const PlaneList& planes, std::optional<Axis> axis) {
  LoopSequence seq = encode_sequence(per_plane, planes.size());
  seq.planes = planes;
  seq.axis = axis;
  return seq;
}

std::vector<std::size_t> plane_assignment(const LoopSequence& seq,
                                          std::size_t plane_limit) {
  const std::size_t n = trimmed_size(seq);
  std::vector<std::size_t> out;
  out.reserve(n);
  std::size_t current = 0;  // 0 is the no-plane state; plane i is i + 1
  for (std::size_t t = 0; t < n; ++t) {
    if (seq.tokens[t].level_up == 1) {
      ++current;
      if (current > plane_limit) {
        throw Error(ErrorKind::kPlaneOverflow,
                    "token " + std::to_string(t) + " levels up past the last of " +
                        std::to_string(plane_limit) + " planes");
      }
    } else if (current == 0) {
      throw Error(ErrorKind::kOrphanLoop,
                  "token " + std::to_string(t) + " has no plane (first flag is 0)");
    }
    out.push_back(current - 1);
  }
  return out;
}

std::vector<std::vector<Loop>> decode_sequence(const LoopSequence& seq,
                                               const PlaneList& planes) {
  const auto assignment = plane_assignment(seq, planes.size());
  std::vector<std::vector<Loop>> out(planes.size());
  for (std::size_t t = 0; t < assignment.size(); ++t) {
    out[assignment[t]].push_back(token_loop(seq.tokens[t]));
  }
  return out;
}

std::vector<std::vector<Loop>> decode_sequence(const LoopSequence& seq) {
  const auto assignment = plane_assignment(seq, seq.plane_count);
  std::vector<std::vector<Loop>> out(seq.plane_count);
  for (std::size_t t = 0; t < assignment.size(); ++t) {
    out[assignment[t]].push_back(token_loop(seq.tokens[t]));
  }
  return out;
}

void validate_sequence(const LoopSequence& seq, std::size_t max_len) {
  if (seq.tokens.size() > max_len) {
    throw Error(ErrorKind::kLength, "sequence has " + std::to_string(seq.tokens.size()) +
                                        " tokens, limit " + std::to_string(max_len));
  }
  if (!seq.planes.empty() && seq.planes.size() != seq.plane_count) {
    throw Error(ErrorKind::kShape, "plane list size differs from plane_count");
  }
  for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
    const auto& tok = seq.tokens[t];
    if (tok.coords.size() != 2 * seq.n_points) {
      throw Error(ErrorKind::kShape, "token " + std::to_string(t) + " has " +
                                         std::to_string(tok.coords.size()) + " coords");
    }
    if (tok.level_up != 0 && tok.level_up != 1) {
      throw Error(ErrorKind::kShape, "token " + std::to_string(t) + " has a bad flag");
    }
    for (double c : tok.coords) {
      if (!std::isfinite(c)) {
        throw Error(ErrorKind::kShape, "token " + std::to_string(t) + " is not finite");
      }
    }
  }
  plane_assignment(seq, seq.plane_count);
}

void serialize(const LoopSequence& seq, std::ostream& out) {
  json header;
  header["version"] = kLoopSeqVersion;
  header["N"] = seq.n_points;
  header["plane_count"] = seq.plane_count;
  header["axis"] = seq.axis ? json(std::string(1, axis_name(*seq.axis))) : json(nullptr);
  json origins = json::array();
  for (const auto& p : seq.planes.planes) origins.push_back(vec_json(p.origin));
  header["plane_origins"] = origins;
  header["plane_normal"] =
      seq.planes.empty() ? json(nullptr) : vec_json(seq.planes[0].normal);
  out << header.dump() << '\n';
  for (std::size_t t = 0; t < seq.tokens.size(); ++t) {
    const auto& tok = seq.tokens[t];
    for (double c : tok.coords) {
      if (!std::isfinite(c)) {
        throw Error(ErrorKind::kShape,
                    "cannot serialize non-finite coordinate in token " + std::to_string(t));
      }
    }
    json rec;
    rec["coords"] = tok.coords;
    rec["level_up"] = tok.level_up;
    out << rec.dump() << '\n';
  }
}

std::string serialize(const LoopSequence& seq) {
  std::ostringstream out;
  serialize(seq, out);
  return out.str();
}

LoopSequence deserialize(std::istream& in) {
  LoopSequence seq;
  std::string raw;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty()) continue;
    json rec;
    try {
      rec = json::parse(raw);
    } catch (const json::parse_error& e) {
      throw ParseError(line, std::string("malformed record: ") + e.what());
    }
    if (!rec.is_object()) throw ParseError(line, "record is not an object");
    if (!have_header) {
      if (!rec.contains("version") || !rec["version"].is_number_integer()) {
        throw ParseError(line, "header lacks an integer version");
      }
      if (rec["version"].get<int>() != kLoopSeqVersion) {
        throw ParseError(line, "unsupported version " + rec["version"].dump());
      }
      if (!rec.contains("N") || !rec["N"].is_number_unsigned() ||
          !rec.contains("plane_count") || !rec["plane_count"].is_number_unsigned()) {
        throw ParseError(line, "header needs unsigned N and plane_count");
      }
      seq.n_points = rec["N"].get<std::size_t>();
      seq.plane_count = rec["plane_count"].get<std::size_t>();
      if (rec.contains("axis") && rec["axis"].is_string()) {
        const auto name = rec["axis"].get<std::string>();
        if (name.size() != 1) throw ParseError(line, "bad axis");
        try {
          seq.axis = parse_axis(name[0]);
        } catch (const Error& e) {
          throw ParseError(line, e.what());
        }
      }
      const json origins = rec.value("plane_origins", json::array());
      if (!origins.is_array()) throw ParseError(line, "plane_origins must be an array");
      if (!origins.empty()) {
        const Vec3 normal = vec_from_json(rec.value("plane_normal", json()), line,
                                          "plane_normal");
        for (const auto& o : origins) {
          try {
            seq.planes.planes.push_back(
                plane_basis(normal, vec_from_json(o, line, "plane origin")));
          } catch (const ParseError&) {
            throw;
          } catch (const Error& e) {
            throw ParseError(line, e.what());
          }
        }
        if (seq.planes.size() != seq.plane_count) {
          throw ParseError(line, "plane_origins count differs from plane_count");
        }
      }
      have_header = true;
      continue;
    }
    if (!rec.contains("coords") || !rec["coords"].is_array()) {
      throw ParseError(line, "token record lacks a coords array");
    }
    const auto& coords = rec["coords"];
    if (coords.size() != 2 * seq.n_points) {
      throw ParseError(line, "token has " + std::to_string(coords.size()) +
                                 " coords, expected " + std::to_string(2 * seq.n_points));
    }
    LoopToken tok;
    tok.coords.reserve(coords.size());
    for (const auto& c : coords) {
      if (!c.is_number()) throw ParseError(line, "coordinate is not a finite number");
      const double v = c.get<double>();
      if (!std::isfinite(v)) throw ParseError(line, "coordinate is not finite");
      tok.coords.push_back(v);
    }
    if (!rec.contains("level_up") || !rec["level_up"].is_number_integer()) {
      throw ParseError(line, "token record lacks an integer level_up");
    }
    tok.level_up = rec["level_up"].get<int>();
    if (tok.level_up != 0 && tok.level_up != 1) {
      throw ParseError(line, "level_up must be 0 or 1");
    }
    seq.tokens.push_back(std::move(tok));
  }
  if (!have_header) throw ParseError(line + 1, "missing header record");
  return seq;
}

LoopSequence deserialize_string(const std::string& text) {
  std::istringstream in(text);
  return deserialize(in);
}

void save_loopseq(const std::filesystem::path& path, const LoopSequence& seq) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  serialize(seq, out);
}

LoopSequence load_loopseq(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return deserialize(in);
}

std::vector<Vec3> sequence_points(const LoopSequence& seq) {
  if (seq.planes.empty()) {
    throw Error(ErrorKind::kInvalidInput, "sequence carries no plane schedule");
  }
  const auto per_plane = decode_sequence(seq, seq.planes);
  std::vector<Vec3> out;
  for (std::size_t i = 0; i < per_plane.size(); ++i) {
    for (const auto& loop : per_plane[i]) {
      for (const auto& p : loop.points) out.push_back(from_plane_coords(seq.planes[i], p));
    }
  }
  return out;
}

}  // namespace loopforge
