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

#include "loopforge/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "loopforge/errors.hpp"

namespace loopforge {

Tensor::Tensor(std::size_t r, std::size_t c, double fill) : rows(r), cols(c), values(r * c, fill) {}

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> data)
    : rows(r), cols(c), values(std::move(data)) {
  if (values.size() != r * c) {
    throw Error(ErrorKind::kShape, "tensor data has " + std::to_string(values.size()) +
                                       " values for shape " + std::to_string(r) + "x" +
                                       std::to_string(c));
  }
}

void Tensor::fill(double v) { std::fill(values.begin(), values.end(), v); }

void check_finite(const Tensor& t, const std::string& where) {
  for (double v : t.values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::kNumericalHealth, "non-finite value in " + where);
  }
}

std::string shape_string(const Tensor& t) {
  return "[" + std::to_string(t.rows) + ", " + std::to_string(t.cols) + "]";
}

namespace kernels {

void linear_row(const double* x, const Tensor& w, const double* b, double* out) {
  const std::size_t n = w.cols;
  std::fill(out, out + n, 0.0);
  for (std::size_t k = 0; k < w.rows; ++k) {
    const double a = x[k];
    const double* wr = w.row(k);
    for (std::size_t j = 0; j < n; ++j) out[j] += a * wr[j];
  }
  if (b != nullptr) {
    for (std::size_t j = 0; j < n; ++j) out[j] += b[j];
  }
}

double layer_norm_row(const double* x, std::size_t d, const double* gamma, const double* beta,
                      double eps, double* out, double* xhat) {
  double mean = 0;
  for (std::size_t j = 0; j < d; ++j) mean += x[j];
  mean /= static_cast<double>(d);
  double var = 0;
  for (std::size_t j = 0; j < d; ++j) {
    const double c = x[j] - mean;
    var += c * c;
  }
  var /= static_cast<double>(d);
  const double rstd = 1.0 / std::sqrt(var + eps);
  for (std::size_t j = 0; j < d; ++j) {
    xhat[j] = (x[j] - mean) * rstd;
    out[j] = gamma[j] * xhat[j] + beta[j];
  }
  return rstd;
}

void attention_row(const double* q, const double* k, const double* v, std::size_t ld,
                   std::size_t count, std::size_t head_dim, double scale, double* out,
                   double* weights) {
  double max_score = -INFINITY;
  for (std::size_t j = 0; j < count; ++j) {
    const double* kr = k + j * ld;
    double s = 0;
    for (std::size_t c = 0; c < head_dim; ++c) s += q[c] * kr[c];
    weights[j] = s * scale;
    max_score = std::max(max_score, weights[j]);
  }
  double total = 0;
  for (std::size_t j = 0; j < count; ++j) {
    weights[j] = std::exp(weights[j] - max_score);
    total += weights[j];
  }
  for (std::size_t j = 0; j < count; ++j) weights[j] /= total;
  std::fill(out, out + head_dim, 0.0);
  for (std::size_t j = 0; j < count; ++j) {
    const double* vr = v + j * ld;
    const double w = weights[j];
    for (std::size_t c = 0; c < head_dim; ++c) out[c] += w * vr[c];
  }
}

}  // namespace kernels
}  // namespace loopforge
