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

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "loopforge/autograd.hpp"
#include "loopforge/params.hpp"
#include "loopforge/tensor.hpp"

namespace loopforge::nn {

/// pe[t, 2k] = sin(t / 10000^(2k/d)), pe[t, 2k+1] = cos(t / 10000^(2k/d)).
Tensor positional_encoding(std::size_t length, std::size_t width);

/// `<prefix>.W` (Xavier) and `<prefix>.b` (zeros).
void add_linear(ParamStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                std::mt19937_64& rng);
Var linear(Graph& g, ParamStore& store, const std::string& prefix, Var x);

/// `<prefix>.gamma` (ones) and `<prefix>.beta` (zeros).
void add_layer_norm(ParamStore& store, const std::string& prefix, std::size_t width);
Var layer_norm(Graph& g, ParamStore& store, const std::string& prefix, Var x);

/// Dense stack: sizes {in, h1, ..., out}, ReLU between layers, none after the last.
void add_mlp(ParamStore& store, const std::string& prefix, const std::vector<std::size_t>& sizes,
             std::mt19937_64& rng);
Var mlp(Graph& g, ParamStore& store, const std::string& prefix, std::size_t depth, Var x);

struct LayerShape {
  std::size_t width = 64;
  std::size_t heads = 2;
  std::size_t ffn = 128;
};

/// Pre-norm block: x + MHA(LN(x)), then + FFN(LN(.)) with one ReLU hidden layer.
/// The key projection has no bias.
void add_transformer_layer(ParamStore& store, const std::string& prefix, const LayerShape& shape,
                           std::mt19937_64& rng);
Var transformer_layer(Graph& g, ParamStore& store, const std::string& prefix,
                      const LayerShape& shape, Var x, bool causal);

struct GradcheckResult {
  double max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0;
  double worst_numeric = 0;
  std::size_t probes = 0;
};

/// `loss(store, backward)` evaluates the scalar loss and, when asked, leaves
/// analytic gradients in the store. Probes are uniform over all scalars.
using LossFn = std::function<double(ParamStore&, bool)>;
GradcheckResult gradcheck(ParamStore& store, const LossFn& loss, std::size_t probes, double h,
                          std::uint64_t seed);

}  // namespace loopforge::nn
