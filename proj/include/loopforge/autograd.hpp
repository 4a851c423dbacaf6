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
#include <functional>
#include <string>
#include <vector>

#include "loopforge/params.hpp"
#include "loopforge/tensor.hpp"

namespace loopforge {

class Graph;

/// Handle to a node on a Graph's tape.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Reverse-mode tape. Nodes are appended in evaluation order; backward walks
/// them in reverse. Parameter nodes read the store's tensors in place and
/// accumulate into its gradient buffers.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// A differentiable leaf whose gradient is kept on the tape.
  Var input(Tensor value);
  Var param(ParamStore& store, const std::string& name);

  const Tensor& value(Var v) const;
  /// Gradient of a tape-owned node after backward(); zeros if unreached.
  const Tensor& grad(Var v);

  /// Seeds d(root)/d(root) = 1 for a 1 x 1 root and propagates.
  void backward(Var root);

  std::size_t node_count() const { return nodes_.size(); }

  // Op plumbing.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  Tensor& grad_buffer(std::size_t id);
  const Tensor& grad_of(std::size_t id) const;
  const Tensor& value_of(std::size_t id) const;

 private:
  struct Node {
    Tensor own_value;
    const Tensor* ref_value = nullptr;
    Tensor own_grad;
    Tensor* ref_grad = nullptr;
    bool requires_grad = false;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

/// x[T, in] W[in, out] + b[1, out]; b may be omitted by passing a null Var graph.
Var linear(Var x, Var w, Var b);
Var add(Var a, Var b);
/// Adds a constant tensor of the same shape.
Var add_constant(Var a, const Tensor& c);
Var scale(Var a, double s);
Var relu(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
/// Gradient passes only where lo < x < hi.
Var clamp(Var a, double lo, double hi);
Var layer_norm(Var x, Var gamma, Var beta);
/// Multi-head scaled dot-product attention over [T, d] projections; heads
/// split the columns evenly. With `causal`, row i sees rows 0..i only.
Var attention(Var q, Var k, Var v, std::size_t heads, bool causal);
Var concat_rows(Var a, Var b);
Var slice_row(Var a, std::size_t r);
Var sum(Var a);
Var sum_squares(Var a);
/// z = mu + exp(logvar / 2) * eps, eps a constant.
Var reparameterize(Var mu, Var logvar, const Tensor& eps);

/// Reconstruction loss for raw head outputs [T, 2N+1] (last column a flag
/// logit) against targets: per row, squared L2 over the coordinates plus
/// binary cross-entropy of the clamped flag probability; summed over rows.
Var recon_loss(Var head, const Tensor& target);
constexpr double kFlagProbClamp = 1e-7;

/// (beta / nz) * max(sum_i -1/2 (1 + lv_i - mu_i^2 - exp(lv_i)), floor).
Var kl_loss(Var mu, Var logvar, double beta, double floor);

}  // namespace loopforge
