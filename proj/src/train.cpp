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

#include "loopforge/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "loopforge/errors.hpp"

namespace loopforge {

namespace fs = std::filesystem;
using nlohmann::json;

json EpochRecord::to_json() const {
  return {{"epoch", epoch}, {"step", step}, {"L_R", recon},
          {"L_KL", kl},     {"beta_eff", beta_eff}, {"lr", lr}};
}

namespace {

void check_grads(const ParamStore& params, std::size_t epoch, std::uint64_t step) {
  for (const auto& e : params.entries()) {
    for (double v : e.grad.values) {
      if (!std::isfinite(v)) {
        throw Error(ErrorKind::kNumericalHealth, "non-finite gradient for " + e.name +
                                                     " at epoch " + std::to_string(epoch) +
                                                     ", step " + std::to_string(step));
      }
    }
  }
}

}  // namespace

TrainResult train(LoopModel& model, const std::vector<LoopSequence>& data,
                  const TrainOptions& options) {
  const ModelConfig& cfg = model.config();
  if (data.empty()) throw Error(ErrorKind::kInvalidInput, "training set is empty");
  std::vector<Tensor> tensors;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].n_points != cfg.n_points) {
      throw Error(ErrorKind::kShape, "sequence " + std::to_string(i) + " has N = " +
                                         std::to_string(data[i].n_points) + ", model expects " +
                                         std::to_string(cfg.n_points));
    }
    model.check_length(data[i].tokens.size());
    tensors.push_back(sequence_tensor(data[i]));
  }

  std::seed_seq seq{cfg.seed, std::uint64_t{1}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Adam opt(model.params());
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::string last_good = "none";
  ParamStore& params = model.params();
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = lr_schedule(epoch, cfg);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const double inv_batch = 1.0 / static_cast<double>(end - start);
        const double beta = kl_anneal(result.steps, cfg);
        params.zero_grad();
        for (std::size_t b = start; b < end; ++b) {
          Tensor eps(1, cfg.latent_dim);
          for (auto& v : eps.values) v = normal(rng);
          Graph g;
          LossParts parts;
          const Var total = model.sequence_loss(g, tensors[order[b]], eps, beta, &parts);
          g.backward(scale(total, inv_batch));
          rec.recon += parts.recon;
          rec.kl += parts.kl;
        }
        check_grads(params, epoch, result.steps);
        opt.step(params, lr);
        ++result.steps;
        rec.beta_eff = beta;
      }
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumericalHealth) throw;
      throw Error(ErrorKind::kNumericalHealth,
                  std::string(e.what()) + " (epoch " + std::to_string(epoch) +
                      "; last good checkpoint: " + last_good + ")");
    }
    rec.recon /= static_cast<double>(data.size());
    rec.kl /= static_cast<double>(data.size());
    rec.step = result.steps;
    result.history.push_back(rec);
    if (options.log != nullptr) *options.log << rec.to_json().dump() << '\n' << std::flush;
    if (options.on_epoch) options.on_epoch(rec);
    const bool periodic = cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0;
    if (!options.checkpoint_path.empty() && periodic) {
      save_checkpoint(model, result.steps, options.checkpoint_path, options.metadata);
      last_good = options.checkpoint_path.string() + " @ step " + std::to_string(result.steps);
    }
  }
  if (!options.checkpoint_path.empty()) {
    save_checkpoint(model, result.steps, options.checkpoint_path, options.metadata);
  }
  return result;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

void append_le(std::string& out, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xff));
    bits >>= 8;
  }
}

double read_le(const char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
  return std::bit_cast<double>(bits);
}

struct Parsed {
  ModelConfig config;
  std::uint64_t step = 0;
  json tensors;
  json metadata;
  std::string data;
};

Parsed parse_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open checkpoint " + path.string());
  std::string header_line;
  if (!std::getline(in, header_line)) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint has no header: " + path.string());
  }
  json header;
  try {
    header = json::parse(header_line);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint header is not JSON: " + std::string(e.what()));
  }
  if (!header.is_object() || header.value("format", "") != "loopforge-checkpoint") {
    throw Error(ErrorKind::kCheckpoint, "not a loopforge checkpoint: " + path.string());
  }
  if (header.value("version", -1) != kCheckpointVersion) {
    throw Error(ErrorKind::kCheckpoint,
                "checkpoint version " + header.value("version", json(-1)).dump() +
                    " is not supported (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  Parsed p;
  try {
    p.config = model_config_from_json(header.at("config"));
    p.step = header.at("step").get<std::uint64_t>();
    p.tensors = header.at("tensors");
    p.metadata = header.value("metadata", json::object());
    if (!p.metadata.is_object()) throw Error(ErrorKind::kCheckpoint, "checkpoint metadata must be an object");
    std::ostringstream rest;
    rest << in.rdbuf();
    p.data = rest.str();
    const auto bytes = header.at("data_bytes").get<std::size_t>();
    if (p.data.size() != bytes) {
      throw Error(ErrorKind::kCheckpoint, "checkpoint data is " + std::to_string(p.data.size()) +
                                              " bytes, header says " + std::to_string(bytes));
    }
    if (hex64(fnv1a64(p.data)) != header.at("checksum").get<std::string>()) {
      throw Error(ErrorKind::kCheckpoint, "checkpoint checksum mismatch: " + path.string());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCheckpoint, "malformed checkpoint header: " + std::string(e.what()));
  }
  return p;
}

void fill_params(LoopModel& model, const Parsed& p) {
  auto& entries = model.params().entries();
  if (p.tensors.size() != entries.size()) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint has " + std::to_string(p.tensors.size()) +
                                            " tensors, model has " +
                                            std::to_string(entries.size()));
  }
  if (p.data.size() != 8 * model.params().scalar_count()) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint data size does not match the tensor table");
  }
  std::size_t offset = 0;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& t = p.tensors[i];
    auto& e = entries[i];
    const auto name = t.at("name").get<std::string>();
    const auto shape = t.at("shape").get<std::vector<std::size_t>>();
    if (name != e.name || shape != e.value.shape()) {
      throw Error(ErrorKind::kCheckpoint, "checkpoint tensor " + name + " does not match model " +
                                              e.name + " " + shape_string(e.value));
    }
    for (auto& v : e.value.values) {
      v = read_le(p.data.data() + offset);
      offset += 8;
    }
    check_finite(e.value, "checkpoint tensor " + name);
  }
}

}  // namespace

void save_checkpoint(const LoopModel& model, std::uint64_t step, const fs::path& path,
                     const json& metadata) {
  if (!metadata.is_object()) throw Error(ErrorKind::kInvalidInput, "checkpoint metadata must be an object");
  std::string data;
  json tensors = json::array();
  for (const auto& e : model.params().entries()) {
    tensors.push_back({{"name", e.name}, {"shape", e.value.shape()}});
    for (double v : e.value.values) append_le(data, v);
  }
  const json header{{"format", "loopforge-checkpoint"},
                    {"version", kCheckpointVersion},
                    {"config", to_json(model.config())},
                    {"step", step},
                    {"tensors", tensors},
                    {"data_bytes", data.size()},
                    {"checksum", hex64(fnv1a64(data))},
                    {"metadata", metadata}};
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint " + tmp.string());
    out << header.dump() << '\n';
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!out) throw Error(ErrorKind::kIo, "failed writing checkpoint " + tmp.string());
  }
  fs::rename(tmp, path);
}

Checkpoint load_checkpoint(const fs::path& path) {
  const Parsed p = parse_checkpoint(path);
  Checkpoint ck{LoopModel(p.config), p.step, p.metadata};
  fill_params(ck.model, p);
  return ck;
}

void load_checkpoint_into(LoopModel& model, const fs::path& path) {
  const Parsed p = parse_checkpoint(path);
  if (!(p.config == model.config())) {
    throw Error(ErrorKind::kCheckpoint, "checkpoint config differs from the model config");
  }
  fill_params(model, p);
}

}  // namespace loopforge
