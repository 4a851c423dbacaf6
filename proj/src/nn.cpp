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

#include <array>
#include "loopforge/nn.hpp"

#include <algorithm>
#include <cmath>

#include "loopforge/errors.hpp"

namespace loopforge::nn {

Tensor positional_encoding(std::size_t length, std::size_t width) {
  Tensor pe(length, width);
  for (std::size_t t = 0; t < length; ++t) {
    for (std::size_t c = 0; c < width; ++c) {
      const std::size_t k2 = c - c % 2;
      const double angle = static_cast<double>(t) /
                           std::pow(10000.0, static_cast<double>(k2) / static_cast<double>(width));
      pe(t, c) = c % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng) {
  store.add(prefix + ".W", xavier_uniform(in, out, rng));
  store.add(prefix + ".b", Tensor(1, out));
}

Var linear(Graph& g, ParamStore& store, const std::string& prefix, Var x) {
  return loopforge::linear(x, g.param(store, prefix + ".W"), g.param(store, prefix + ".b"));
}

void add_layer_norm(ParamStore& store, const std::string& prefix, std::size_t width) {
  store.add(prefix + ".gamma", Tensor(1, width, 1.0));
  store.add(prefix + ".beta", Tensor(1, width));
}

Var layer_norm(Graph& g, ParamStore& store, const std::string& prefix, Var x) {
  return loopforge::layer_norm(x, g.param(store, prefix + ".gamma"),
                               g.param(store, prefix + ".beta"));
}

void add_mlp(ParamStore& store, const std::string& prefix, const std::vector<std::size_t>& sizes,
             std::mt19937_64& rng) {
  if (sizes.size() < 2) throw Error(ErrorKind::kInvalidInput, "mlp needs at least two sizes");
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    add_linear(store, prefix + "." + std::to_string(i), sizes[i], sizes[i + 1], rng);
  }
}

Var mlp(Graph& g, ParamStore& store, const std::string& prefix, std::size_t depth, Var x) {
  for (std::size_t i = 0; i < depth; ++i) {
    x = linear(g, store, prefix + "." + std::to_string(i), x);
    if (i + 1 < depth) x = relu(x);
  }
  return x;
}

void add_transformer_layer(ParamStore& store, const std::string& prefix, const LayerShape& shape,
                           std::mt19937_64& rng) {
  if (shape.heads == 0 || shape.width % shape.heads != 0) {
    throw Error(ErrorKind::kInvalidInput, "width must be divisible by heads");
  }
  add_layer_norm(store, prefix + ".ln1", shape.width);
  add_linear(store, prefix + ".q", shape.width, shape.width, rng);
  // No key bias: it shifts every score in a softmax row equally.
  store.add(prefix + ".k.W", xavier_uniform(shape.width, shape.width, rng));
  add_linear(store, prefix + ".v", shape.width, shape.width, rng);
  add_linear(store, prefix + ".o", shape.width, shape.width, rng);
  add_layer_norm(store, prefix + ".ln2", shape.width);
  add_linear(store, prefix + ".ff1", shape.width, shape.ffn, rng);
  add_linear(store, prefix + ".ff2", shape.ffn, shape.width, rng);
}

Var transformer_layer(Graph& g, ParamStore& store, const std::string& prefix,
                      const LayerShape& shape, Var x, bool causal) {
  const Var h = layer_norm(g, store, prefix + ".ln1", x);
  const Var q = linear(g, store, prefix + ".q", h);
  const Var k = loopforge::linear(h, g.param(store, prefix + ".k.W"), Var{});
  const Var v = linear(g, store, prefix + ".v", h);
  const Var a = linear(g, store, prefix + ".o", attention(q, k, v, shape.heads, causal));
  x = add(x, a);
  const Var h2 = layer_norm(g, store, prefix + ".ln2", x);
  const Var f = linear(g, store, prefix + ".ff2", relu(linear(g, store, prefix + ".ff1", h2)));
  return add(x, f);
}

GradcheckResult gradcheck(ParamStore& store, const LossFn& loss, std::size_t probes, double h,
                          std::uint64_t seed) {
  store.zero_grad();
  loss(store, true);
  std::vector<Tensor> analytic;
  for (const auto& e : store.entries()) analytic.push_back(e.grad);

  const std::size_t total = store.scalar_count();
  if (total == 0) throw Error(ErrorKind::kInvalidInput, "gradcheck: no parameters");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  GradcheckResult result;
  result.probes = probes;
  auto& entries = store.entries();
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t flat = pick(rng);
    std::size_t e = 0;
    while (flat >= entries[e].value.size()) flat -= entries[e++].value.size();
    double& theta = entries[e].value.values[flat];
    const double saved = theta;
    auto at = [&](double offset) {
      theta = saved + offset;
      return loss(store, false);
    };
    auto five_point = [&](double step) {
      const double d1 = at(step) - at(-step);
      const double d2 = at(2 * step) - at(-2 * step);
      return (8.0 * d1 - d2) / (12.0 * step);
    };
    // Steps h, h/10, h/100, h/1000; keep the estimate whose neighbour agrees best.
    std::array<double, 4> est{};
    double step = h;
    for (double& v : est) {
      v = five_point(step);
      step /= 10.0;
    }
    theta = saved;
    double numeric = est[1];
    double spread = std::abs(est[0] - est[1]);
    for (std::size_t k = 1; k + 1 < est.size(); ++k) {
      const double s = std::abs(est[k] - est[k + 1]);
      if (s < spread) {
        spread = s;
        numeric = est[k + 1];
      }
    }
    const double a = analytic[e].values[flat];
    const double err =
        std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
    if (p == 0 || err > result.max_rel_error) {
      result.max_rel_error = err;
      result.worst_param = entries[e].name;
      result.worst_index = flat;
      result.worst_analytic = a;
      result.worst_numeric = numeric;
    }
  }
  return result;
}

}  // namespace loopforge::nn
