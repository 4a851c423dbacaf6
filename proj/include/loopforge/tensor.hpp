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
#include <string>
#include <vector>

namespace loopforge {

/// Dense row-major matrix of doubles. Vectors are 1 x n.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0);
  Tensor(std::size_t r, std::size_t c, std::vector<double> data);

  std::size_t size() const { return values.size(); }
  std::vector<std::size_t> shape() const { return {rows, cols}; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& operator()(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  double* row(std::size_t r) { return values.data() + r * cols; }
  const double* row(std::size_t r) const { return values.data() + r * cols; }

  void fill(double v);
  bool operator==(const Tensor&) const = default;
};

/// Throws a numerical-health error naming `where` if any value is NaN or infinite.
void check_finite(const Tensor& t, const std::string& where);

std::string shape_string(const Tensor& t);

/// Row kernels shared by the differentiable ops and the incremental decoder.
/// Each output row depends only on its own input row with a fixed summation
/// order, so batched and one-row evaluation agree bit for bit.
namespace kernels {

/// out[j] = sum_k x[k] * W(k, j), then + b[j] (b may be null).
void linear_row(const double* x, const Tensor& w, const double* b, double* out);

/// Normalizes one row; writes xhat and returns 1/sqrt(var + eps).
double layer_norm_row(const double* x, std::size_t d, const double* gamma, const double* beta,
                      double eps, double* out, double* xhat);

/// One query row against `count` key/value rows (row stride `ld`).
/// Writes the head output and the softmax weights.
void attention_row(const double* q, const double* k, const double* v, std::size_t ld,
                   std::size_t count, std::size_t head_dim, double scale, double* out,
                   double* weights);

}  // namespace kernels

constexpr double kLayerNormEps = 1e-5;

}  // namespace loopforge
