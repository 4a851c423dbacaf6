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

#include "loopforge/obj_io.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "loopforge/errors.hpp"

namespace loopforge {

namespace {

long resolve_index(const std::string& token, std::size_t vertex_count,
                   std::size_t line) {
  const std::string head = token.substr(0, token.find('/'));
  long idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stol(head, &used);
    if (used != head.size()) throw std::invalid_argument(head);
  } catch (const std::exception&) {
    throw ParseError(line, "bad face index '" + token + "'");
  }
  const long n = static_cast<long>(vertex_count);
  const long resolved = idx > 0 ? idx - 1 : n + idx;
  if (idx == 0 || resolved < 0 || resolved >= n) {
    throw ParseError(line, "face index " + head + " out of range");
  }
  return resolved;
}

}  // namespace

Mesh read_obj(std::istream& in) {
  Mesh mesh;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::istringstream rec(raw);
    std::string tag;
    if (!(rec >> tag)) continue;
    if (tag == "v") {
      Vec3 v;
      if (!(rec >> v.x >> v.y >> v.z)) throw ParseError(line, "bad vertex record");
      mesh.vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<std::uint32_t> poly;
      std::string tok;
      while (rec >> tok) {
        poly.push_back(static_cast<std::uint32_t>(
            resolve_index(tok, mesh.vertices.size(), line)));
      }
      if (poly.size() < 3) throw ParseError(line, "face with fewer than 3 vertices");
      for (std::size_t k = 1; k + 1 < poly.size(); ++k) {
        mesh.faces.push_back({poly[0], poly[k], poly[k + 1]});
      }
    }
  }
  return mesh;
}

Mesh load_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return read_obj(in);
}

void write_obj(std::ostream& out, const Mesh& mesh) {
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) {
    out << "v " << v.x << ' ' << v.y << ' ' << v.z << '\n';
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void save_obj(const std::filesystem::path& path, const Mesh& mesh) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  write_obj(out, mesh);
}

}  // namespace loopforge
