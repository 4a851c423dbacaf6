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

#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "loopforge/decode.hpp"
#include "loopforge/errors.hpp"
#include "loopforge/geometry.hpp"
#include "loopforge/loop_sequence.hpp"
#include "loopforge/model.hpp"
#include "loopforge/nn.hpp"
#include "loopforge/obj_io.hpp"
#include "loopforge/recon.hpp"
#include "loopforge/service.hpp"
#include "loopforge/synthetic.hpp"
#include "loopforge/train.hpp"

namespace loopforge {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kParse, path.string() + ": " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string file_hash(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream bytes;
  bytes << in.rdbuf();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes.str())));
  return buf;
}

json parse_flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

/// One `--<key>` flag per config-file key; given flags override the file.
class ConfigFlags {
 public:
  ConfigFlags(CLI::App* cmd, const json& keys) {
    for (const auto& [key, value] : keys.items()) {
      cmd->add_option("--" + key, values_[key], "overrides config key " + key);
    }
  }
  json apply(json base) const {
    for (const auto& [key, text] : values_) {
      if (!text.empty()) base[key] = parse_flag_value(text);
    }
    return base;
  }

 private:
  std::map<std::string, std::string> values_;
};

json base_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j = read_json_file(path);
  if (!j.is_object()) throw Error(ErrorKind::kInvalidInput, path + ": config must be a JSON object");
  return j;
}

LatentCode read_latent(const fs::path& path, const ModelConfig& cfg) {
  const json j = read_json_file(path);
  if (j.is_object() && j.contains("sample")) {
    const json& s = j.at("sample");
    if (!s.is_number_unsigned()) throw FieldError("sample", "must be a non-negative integer");
    return sample_latent(cfg, s.get<std::uint64_t>());
  }
  return latent_from_json(j, cfg.latent_dim, path.string());
}

SessionOptions options_for(const Checkpoint& ck, const std::string& stop_rule) {
  std::optional<StopRule> stop;
  if (!stop_rule.empty()) {
    try {
      stop = StopRule::from_json(json::parse(stop_rule));
    } catch (const json::exception& e) {
      throw FieldError("stop_rule", e.what());
    }
  }
  return session_options(dataset_from_metadata(ck.metadata), stop);
}

json session_summary(const DecodeSession& s) {
  return {{"status", status_name(s.status())},
          {"tokens", s.emitted().tokens.size()},
          {"level_ups", s.level_ups()},
          {"z", latent_to_json(s.z())}};
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw FieldError("range", "expected lo,hi");
  try {
    std::size_t used_a = 0, used_b = 0;
    const std::string a = text.substr(0, comma), b = text.substr(comma + 1);
    const double lo = std::stod(a, &used_a), hi = std::stod(b, &used_b);
    if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument(text);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw FieldError("range", "expected two numbers lo,hi, got \"" + text + "\"");
  }
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Loop-sequence shape generation: slicing, training, decoding and export."};
  app.name("loopforge");
  app.require_subcommand(1);
  std::function<int()> action;

  // slice
  struct {
    std::string mesh, out, axis = "y", range = "0.0125,0.9875";
    std::size_t planes = 40, points = kDefaultLoopPoints;
    bool raw = false;
  } sl;
  auto* slice = app.add_subcommand("slice", "Slice an OBJ mesh into a .loopseq");
  slice->add_option("--mesh", sl.mesh, "input OBJ")->required()->check(CLI::ExistingFile);
  slice->add_option("--planes", sl.planes, "plane count")->check(CLI::Range(2, 100000));
  slice->add_option("--axis", sl.axis, "slice axis")->check(CLI::IsMember({"x", "y", "z"}));
  slice->add_option("--range", sl.range, "plane range lo,hi in normalized coordinates");
  slice->add_option("--points", sl.points, "points per loop")->check(CLI::Range(3, 100000));
  slice->add_flag("--no-normalize", sl.raw, "slice the mesh as given instead of fitting the unit cube");
  slice->add_option("--out", sl.out, "output .loopseq")->required();
  slice->callback([&] {
    action = [&] {
      Mesh mesh = load_obj(sl.mesh);
      if (!sl.raw) mesh = normalize_mesh(mesh);
      const auto [lo, hi] = parse_range(sl.range);
      const Axis axis = parse_axis(sl.axis[0]);
      const PlaneList planes = make_plane_schedule(axis, sl.planes, lo, hi);
      const auto per_plane = slice_mesh(mesh, planes, kDefaultChainTolerance, sl.points);
      const LoopSequence seq = encode_sequence(per_plane, planes, axis);
      save_loopseq(sl.out, seq);
      json loops = json::array();
      for (const auto& g : per_plane) loops.push_back(g.size());
      out << json{{"out", sl.out}, {"tokens", seq.tokens.size()}, {"loops_per_plane", loops}}.dump()
          << '\n';
      return kExitOk;
    };
  });

  // dataset
  std::string ds_config, ds_out;
  auto* dataset = app.add_subcommand("dataset", "Build a procedural or OBJ-directory dataset");
  dataset->add_option("--config", ds_config, "dataset config JSON")->check(CLI::ExistingFile);
  dataset->add_option("--out", ds_out, "output directory")->required();
  ConfigFlags ds_flags(dataset, to_json(DatasetConfig::preset(ShapeCategory::kVase)));
  dataset->callback([&] {
    action = [&] {
      const DatasetConfig cfg = dataset_config_from_json(ds_flags.apply(base_config(ds_config)));
      const Dataset ds = build_dataset(cfg);
      write_dataset(ds, ds_out);
      out << json{{"out", ds_out}, {"shapes", ds.records.size()}, {"rejected", ds.rejected}}.dump()
          << '\n';
      return kExitOk;
    };
  });

  // train
  std::string tr_dataset, tr_config, tr_out;
  auto* trainer = app.add_subcommand("train", "Train the model on a dataset directory");
  trainer->add_option("--dataset", tr_dataset, "dataset directory")->required()->check(CLI::ExistingDirectory);
  trainer->add_option("--config", tr_config, "model config JSON")->check(CLI::ExistingFile);
  trainer->add_option("--out", tr_out, "output checkpoint")->required();
  ConfigFlags tr_flags(trainer, to_json(ModelConfig::desk()));
  trainer->callback([&] {
    action = [&] {
      const Dataset ds = load_dataset(tr_dataset);
      json j = tr_flags.apply(base_config(tr_config));
      if (!j.contains("n_points")) j["n_points"] = ds.config.n_points;
      LoopModel model(model_config_from_json(j));
      std::vector<LoopSequence> data;
      for (const auto& r : ds.records) data.push_back(r.sequence);
      TrainOptions opts;
      opts.log = &out;
      opts.checkpoint_path = tr_out;
      opts.metadata = {{"dataset", to_json(ds.config)}};
      const TrainResult r = train(model, data, opts);
      out << json{{"event", "done"},
                  {"checkpoint", tr_out},
                  {"steps", r.steps},
                  {"checkpoint_fnv1a64", file_hash(tr_out)}}
                 .dump()
          << '\n';
      return kExitOk;
    };
  });

  // gradcheck
  struct {
    std::string config;
    std::size_t probes = 200, length = 6;
    double h = 1e-3, tol = 1e-5;
    std::uint64_t seed = 0;
  } gc;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the full loss gradient");
  grad->add_option("--config", gc.config, "model config JSON")->check(CLI::ExistingFile);
  grad->add_option("--probes", gc.probes, "random parameter probes")->check(CLI::PositiveNumber);
  grad->add_option("--length", gc.length, "sequence length")->check(CLI::PositiveNumber);
  grad->add_option("--step-size", gc.h, "largest finite difference step")->check(CLI::PositiveNumber);
  grad->add_option("--tol", gc.tol, "max relative error")->check(CLI::PositiveNumber);
  grad->add_option("--probe-seed", gc.seed, "probe and input seed");
  ConfigFlags gc_flags(grad, to_json(ModelConfig::desk()));
  grad->callback([&] {
    action = [&] {
      LoopModel model(model_config_from_json(gc_flags.apply(base_config(gc.config))));
      const auto& cfg = model.config();
      std::mt19937_64 rng(gc.seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      LoopSequence seq;
      seq.n_points = cfg.n_points;
      seq.plane_count = gc.length;
      for (std::size_t t = 0; t < gc.length; ++t) {
        LoopToken tok;
        for (std::size_t i = 0; i < 2 * cfg.n_points; ++i) tok.coords.push_back(u(rng));
        tok.level_up = t == 0 || u(rng) < 0.5 ? 1 : 0;
        seq.tokens.push_back(tok);
      }
      const Tensor tokens = sequence_tensor(seq);
      Tensor eps(1, cfg.latent_dim);
      std::normal_distribution<double> normal(0.0, 1.0);
      for (auto& v : eps.values) v = normal(rng);
      auto loss = [&](ParamStore&, bool backward) {
        Graph g;
        const Var l = model.sequence_loss(g, tokens, eps, cfg.beta_kl, nullptr);
        if (backward) g.backward(l);
        return l.value().values[0];
      };
      const auto r = nn::gradcheck(model.params(), loss, gc.probes, gc.h, gc.seed);
      const bool pass = r.max_rel_error <= gc.tol;
      out << json{{"max_rel_error", r.max_rel_error},
                  {"worst_param", r.worst_param},
                  {"worst_index", r.worst_index},
                  {"analytic", r.worst_analytic},
                  {"numeric", r.worst_numeric},
                  {"probes", r.probes},
                  {"tolerance", gc.tol},
                  {"pass", pass}}
                 .dump()
          << '\n';
      return pass ? kExitOk : kExitNumerical;
    };
  });

  // sample
  struct {
    std::string ckpt, out, z, z_out, stop;
    std::uint64_t seed = 0;
  } sm;
  auto* sample = app.add_subcommand("sample", "Decode z ~ N(0, I) from a seed");
  sample->add_option("--ckpt", sm.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  auto* seed_opt = sample->add_option("--seed", sm.seed, "latent seed");
  auto* z_opt = sample->add_option("--z", sm.z, "latent JSON file instead of a seed")->check(CLI::ExistingFile);
  seed_opt->excludes(z_opt);
  sample->add_option("--stop-rule", sm.stop, "stop rule JSON");
  sample->add_option("--z-out", sm.z_out, "write the latent code here");
  sample->add_option("--out", sm.out, "output .loopseq")->required();
  sample->callback([&] {
    action = [&] {
      const Checkpoint ck = load_checkpoint(sm.ckpt);
      const LatentCode z = sm.z.empty() ? sample_latent(ck.model.config(), sm.seed)
                                        : read_latent(sm.z, ck.model.config());
      auto model = std::make_shared<const LoopModel>(ck.model);
      const DecodeSession s = decode(model, z, options_for(ck, sm.stop));
      save_loopseq(sm.out, s.emitted());
      if (!sm.z_out.empty()) write_json_file(sm.z_out, latent_to_json(z));
      json summary = session_summary(s);
      summary["out"] = sm.out;
      out << summary.dump() << '\n';
      return kExitOk;
    };
  });

  // interpolate
  struct {
    std::string ckpt, za, zb, out, stop;
    std::size_t k = 5;
  } ip;
  auto* interp = app.add_subcommand("interpolate", "Decode evenly spaced latent interpolants");
  interp->add_option("--ckpt", ip.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  interp->add_option("--za", ip.za, "first latent JSON")->required()->check(CLI::ExistingFile);
  interp->add_option("--zb", ip.zb, "second latent JSON")->required()->check(CLI::ExistingFile);
  interp->add_option("-k", ip.k, "number of codes including both ends")->check(CLI::Range(2, 100000));
  interp->add_option("--stop-rule", ip.stop, "stop rule JSON");
  interp->add_option("--out", ip.out, "output directory")->required();
  interp->callback([&] {
    action = [&] {
      const Checkpoint ck = load_checkpoint(ip.ckpt);
      const auto& cfg = ck.model.config();
      const auto codes = interpolate(read_latent(ip.za, cfg), read_latent(ip.zb, cfg), ip.k);
      const SessionOptions opts = options_for(ck, ip.stop);
      auto model = std::make_shared<const LoopModel>(ck.model);
      fs::create_directories(ip.out);
      for (std::size_t i = 0; i < codes.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "interp_%03zu", i);
        const DecodeSession s = decode(model, codes[i], opts);
        const fs::path seq_path = fs::path(ip.out) / (std::string(name) + ".loopseq");
        save_loopseq(seq_path, s.emitted());
        write_json_file(fs::path(ip.out) / (std::string(name) + ".z.json"), latent_to_json(codes[i]));
        json summary = session_summary(s);
        summary["index"] = i;
        summary["out"] = seq_path.string();
        out << summary.dump() << '\n';
      }
      return kExitOk;
    };
  });

  // edit
  struct {
    std::string ckpt, z, script, out, stop;
    std::uint64_t seed = 0;
  } ed;
  auto* edit = app.add_subcommand("edit", "Decode with an edit script applied during decoding");
  edit->add_option("--ckpt", ed.ckpt, "checkpoint")->required()->check(CLI::ExistingFile);
  auto* ed_z = edit->add_option("--z", ed.z, "latent JSON file")->check(CLI::ExistingFile);
  auto* ed_seed = edit->add_option("--seed", ed.seed, "latent seed instead of --z");
  ed_z->excludes(ed_seed);
  edit->add_option("--script", ed.script, "edit script JSON")->required()->check(CLI::ExistingFile);
  edit->add_option("--stop-rule", ed.stop, "stop rule JSON");
  edit->add_option("--out", ed.out, "output .loopseq")->required();
  edit->callback([&] {
    action = [&] {
      const Checkpoint ck = load_checkpoint(ed.ckpt);
      const auto& cfg = ck.model.config();
      const LatentCode z = ed.z.empty() ? sample_latent(cfg, ed.seed) : read_latent(ed.z, cfg);
      const auto edits = parse_edit_script(read_json_file(ed.script), cfg.n_points);
      auto model = std::make_shared<const LoopModel>(ck.model);
      const DecodeSession s = decode(model, z, options_for(ck, ed.stop), edits);
      save_loopseq(ed.out, s.emitted());
      json summary = session_summary(s);
      summary["edits"] = edits.size();
      summary["out"] = ed.out;
      out << summary.dump() << '\n';
      return kExitOk;
    };
  });

  // export-ply
  struct {
    std::string loopseq, out;
    double density = 400, tilt = kDefaultBoundaryTilt;
    std::size_t samples = 0;
    std::uint64_t seed = 0;
  } ex;
  auto* ply = app.add_subcommand("export-ply", "Oriented point cloud of a .loopseq as ASCII PLY");
  ply->add_option("--loopseq", ex.loopseq, "input .loopseq")->required()->check(CLI::ExistingFile);
  ply->add_option("--density", ex.density, "cap points per unit area")->check(CLI::PositiveNumber);
  ply->add_option("--samples", ex.samples, "samples per loop (default: loop point count)");
  ply->add_option("--tilt", ex.tilt, "boundary normal tilt")->check(CLI::Range(0.0, 1.0));
  ply->add_option("--seed", ex.seed, "cap sampling seed");
  ply->add_option("--out", ex.out, "output .ply")->required();
  ply->callback([&] {
    action = [&] {
      const LoopSequence seq = load_loopseq(ex.loopseq);
      const std::size_t samples = ex.samples > 0 ? ex.samples : seq.n_points;
      const auto cloud = oriented_cloud(seq, seq.planes, samples, ex.density, ex.tilt, ex.seed);
      export_ply(cloud, ex.out);
      out << json{{"out", ex.out}, {"points", cloud.size()}}.dump() << '\n';
      return kExitOk;
    };
  });

  // serve
  struct {
    int port = 8080;
    std::string host = "127.0.0.1", web;
    std::vector<std::string> ckpts;
    std::size_t max_sessions = 64;
  } sv;
  auto* serve = app.add_subcommand("serve", "HTTP/JSON session service");
  serve->add_option("--port", sv.port, "port (LOOPFORGE_PORT overrides)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", sv.host, "bind address");
  serve->add_option("--static", sv.web, "serve files from this directory at /")->check(CLI::ExistingDirectory);
  serve->add_option("--ckpt", sv.ckpts, "preload checkpoints")->check(CLI::ExistingFile);
  serve->add_option("--max-sessions", sv.max_sessions, "session cache size")->check(CLI::PositiveNumber);
  serve->callback([&] {
    action = [&] {
      Service service(ServiceOptions{sv.max_sessions});
      for (const auto& path : sv.ckpts) {
        const auto r = service.handle("POST", "/models/load", json{{"checkpoint_path", path}}.dump());
        if (r.status != 200) throw Error(ErrorKind::kCheckpoint, r.json().value("message", path));
        out << r.body << '\n';
      }
      HttpServer server(service, sv.web);
      const int port = server.bind(sv.host, resolve_port(sv.port));
      out << json{{"event", "listening"}, {"host", sv.host}, {"port", port}}.dump() << '\n' << std::flush;
      server.listen();
      return kExitOk;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }
  try {
    return action ? action() : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << to_string(e.kind()) << ": " << e.what() << '\n';
    return e.kind() == ErrorKind::kNumericalHealth ? kExitNumerical : kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace loopforge
