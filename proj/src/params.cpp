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

#include "loopforge/params.hpp"

#include <cmath>

#include "loopforge/errors.hpp"

namespace loopforge {

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (has(name)) throw Error(ErrorKind::kInvalidInput, "duplicate parameter name: " + name);
  index_[name] = entries_.size();
  Tensor grad(init.rows, init.cols);
  entries_.push_back({name, std::move(init), std::move(grad)});
  return entries_.back().value;
}

ParamStore::Entry& ParamStore::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::kInvalidInput, "unknown parameter: " + name);
  return entries_[it->second];
}

const ParamStore::Entry& ParamStore::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorKind::kInvalidInput, "unknown parameter: " + name);
  return entries_[it->second];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) e.grad.fill(0.0);
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor t(fan_in, fan_out);
  for (auto& v : t.values) v = u(rng);
  return t;
}

Adam::Adam(const ParamStore& params, AdamConfig cfg) : cfg_(cfg) {
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.value.rows, e.value.cols);
    v_.emplace_back(e.value.rows, e.value.cols);
  }
}

void Adam::step(ParamStore& params, double lr) {
  if (params.size() != m_.size()) {
    throw Error(ErrorKind::kState, "optimizer state does not match parameter store");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto& entries = params.entries();
  for (std::size_t p = 0; p < entries.size(); ++p) {
    auto& value = entries[p].value.values;
    const auto& grad = entries[p].grad.values;
    auto& m = m_[p].values;
    auto& v = v_[p].values;
    for (std::size_t i = 0; i < value.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * grad[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      value[i] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace loopforge
