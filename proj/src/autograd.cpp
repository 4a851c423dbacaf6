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

#include "loopforge/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "loopforge/errors.hpp"

namespace loopforge {

namespace {

Graph& graph_of(Var a) {
  if (a.graph == nullptr) throw Error(ErrorKind::kState, "variable is not attached to a graph");
  return *a.graph;
}

Graph& common_graph(Var a, Var b) {
  if (a.graph != b.graph) throw Error(ErrorKind::kState, "variables belong to different graphs");
  return graph_of(a);
}

void require_shape(bool ok, const char* op, const Tensor& a, const Tensor& b) {
  if (!ok) {
    throw Error(ErrorKind::kShape,
                std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                    shape_string(b));
  }
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const { return graph_of(*this).value(*this); }

Var Graph::constant(Tensor value) {
  check_finite(value, "constant");
  Node n;
  n.own_value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::input(Tensor value) {
  check_finite(value, "input");
  Node n;
  n.own_value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::param(ParamStore& store, const std::string& name) {
  auto& entry = store.at(name);
  Node n;
  n.ref_value = &entry.value;
  n.ref_grad = &entry.grad;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

const Tensor& Graph::value_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref_value != nullptr ? *n.ref_value : n.own_value;
}

const Tensor& Graph::value(Var v) const { return value_of(v.id); }

Tensor& Graph::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.ref_grad != nullptr) return *n.ref_grad;
  if (n.own_grad.size() == 0) {
    const Tensor& v = value_of(id);
    n.own_grad = Tensor(v.rows, v.cols);
  }
  return n.own_grad;
}

const Tensor& Graph::grad_of(std::size_t id) const {
  const Node& n = nodes_[id];
  return n.ref_grad != nullptr ? *n.ref_grad : n.own_grad;
}

const Tensor& Graph::grad(Var v) { return grad_buffer(v.id); }

Var Graph::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn, const char* op) {
  check_finite(value, op);
  Node n;
  n.own_value = std::move(value);
  for (std::size_t i : inputs) n.requires_grad = n.requires_grad || nodes_[i].requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

void Graph::backward(Var root) {
  if (root.graph != this) throw Error(ErrorKind::kState, "root is not on this graph");
  const Tensor& rv = value_of(root.id);
  if (rv.size() != 1) {
    throw Error(ErrorKind::kShape, "backward needs a scalar root, got " + shape_string(rv));
  }
  if (!nodes_[root.id].requires_grad) return;
  grad_buffer(root.id).values[0] += 1.0;
  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.own_grad.size() == 0) continue;
    n.backward(*this, id);
    check_finite(n.own_grad, "backward");
  }
}

Var linear(Var x, Var w, Var b) {
  Graph& g = common_graph(x, w);
  const bool has_bias = b.graph != nullptr;
  const Tensor& X = x.value();
  const Tensor& W = w.value();
  require_shape(X.cols == W.rows, "linear", X, W);
  const double* bias = nullptr;
  if (has_bias) {
    const Tensor& B = b.value();
    require_shape(B.rows == 1 && B.cols == W.cols, "linear bias", W, B);
    bias = B.values.data();
  }
  Tensor out(X.rows, W.cols);
  for (std::size_t i = 0; i < X.rows; ++i) kernels::linear_row(X.row(i), W, bias, out.row(i));
  std::vector<std::size_t> inputs{x.id, w.id};
  if (has_bias) inputs.push_back(b.id);
  const std::size_t xi = x.id, wi = w.id, bi = b.id;
  return g.record(
      std::move(out), inputs,
      [xi, wi, bi, has_bias](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        const Tensor& Xv = gr.value_of(xi);
        const Tensor& Wv = gr.value_of(wi);
        if (gr.requires_grad(xi)) {
          Tensor& dx = gr.grad_buffer(xi);
          for (std::size_t i = 0; i < Xv.rows; ++i) {
            const double* dyr = dy.row(i);
            double* dxr = dx.row(i);
            for (std::size_t k = 0; k < Wv.rows; ++k) {
              const double* wr = Wv.row(k);
              double s = 0;
              for (std::size_t j = 0; j < Wv.cols; ++j) s += dyr[j] * wr[j];
              dxr[k] += s;
            }
          }
        }
        if (gr.requires_grad(wi)) {
          Tensor& dw = gr.grad_buffer(wi);
          for (std::size_t i = 0; i < Xv.rows; ++i) {
            const double* xr = Xv.row(i);
            const double* dyr = dy.row(i);
            for (std::size_t k = 0; k < Wv.rows; ++k) {
              const double a = xr[k];
              double* dwr = dw.row(k);
              for (std::size_t j = 0; j < Wv.cols; ++j) dwr[j] += a * dyr[j];
            }
          }
        }
        if (has_bias && gr.requires_grad(bi)) {
          Tensor& db = gr.grad_buffer(bi);
          for (std::size_t i = 0; i < dy.rows; ++i) {
            const double* dyr = dy.row(i);
            for (std::size_t j = 0; j < dy.cols; ++j) db.values[j] += dyr[j];
          }
        }
      },
      "linear");
}

Var add(Var a, Var b) {
  Graph& g = common_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_shape(A.same_shape(B), "add", A, B);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += B.values[i];
  const std::size_t ai = a.id, bi = b.id;
  return g.record(
      std::move(out), {ai, bi},
      [ai, bi](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        for (std::size_t id : {ai, bi}) {
          if (!gr.requires_grad(id)) continue;
          Tensor& d = gr.grad_buffer(id);
          for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += dy.values[i];
        }
      },
      "add");
}

Var add_constant(Var a, const Tensor& c) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  require_shape(A.same_shape(c), "add_constant", A, c);
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out.values[i] += c.values[i];
  const std::size_t ai = a.id;
  return g.record(
      std::move(out), {ai},
      [ai](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        Tensor& d = gr.grad_buffer(ai);
        for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += dy.values[i];
      },
      "add_constant");
}

Var scale(Var a, double s) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  for (auto& v : out.values) v *= s;
  const std::size_t ai = a.id;
  return g.record(
      std::move(out), {ai},
      [ai, s](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        Tensor& d = gr.grad_buffer(ai);
        for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += s * dy.values[i];
      },
      "scale");
}

namespace {

// Elementwise op whose derivative is a function of (input, output).
template <typename F, typename D>
Var unary(Var a, F f, D df, const char* name) {
  Graph& g = graph_of(a);
  Tensor out = a.value();
  for (auto& v : out.values) v = f(v);
  const std::size_t ai = a.id;
  return g.record(
      std::move(out), {ai},
      [ai, df](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        const Tensor& x = gr.value_of(ai);
        const Tensor& y = gr.value_of(self);
        Tensor& d = gr.grad_buffer(ai);
        for (std::size_t i = 0; i < d.size(); ++i) {
          d.values[i] += dy.values[i] * df(x.values[i], y.values[i]);
        }
      },
      name);
}

}  // namespace

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; },
      "tanh");
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return x > lo && x < hi ? 1.0 : 0.0; }, "clamp");
}

Var layer_norm(Var x, Var gamma, Var beta) {
  Graph& g = common_graph(x, gamma);
  const Tensor& X = x.value();
  const Tensor& G = gamma.value();
  const Tensor& B = beta.value();
  require_shape(G.rows == 1 && G.cols == X.cols && B.same_shape(G), "layer_norm", X, G);
  Tensor out(X.rows, X.cols);
  auto xhat = std::make_shared<Tensor>(X.rows, X.cols);
  auto rstd = std::make_shared<std::vector<double>>(X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) {
    (*rstd)[i] = kernels::layer_norm_row(X.row(i), X.cols, G.values.data(), B.values.data(),
                                         kLayerNormEps, out.row(i), xhat->row(i));
  }
  const std::size_t xi = x.id, gi = gamma.id, bi = beta.id;
  return g.record(
      std::move(out), {xi, gi, bi},
      [xi, gi, bi, xhat, rstd](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        const Tensor& Gv = gr.value_of(gi);
        const std::size_t d = dy.cols;
        if (gr.requires_grad(gi)) {
          Tensor& dg = gr.grad_buffer(gi);
          for (std::size_t i = 0; i < dy.rows; ++i) {
            for (std::size_t j = 0; j < d; ++j) dg.values[j] += dy(i, j) * (*xhat)(i, j);
          }
        }
        if (gr.requires_grad(bi)) {
          Tensor& db = gr.grad_buffer(bi);
          for (std::size_t i = 0; i < dy.rows; ++i) {
            for (std::size_t j = 0; j < d; ++j) db.values[j] += dy(i, j);
          }
        }
        if (gr.requires_grad(xi)) {
          Tensor& dx = gr.grad_buffer(xi);
          std::vector<double> dxhat(d);
          for (std::size_t i = 0; i < dy.rows; ++i) {
            double mean_d = 0, mean_dx = 0;
            for (std::size_t j = 0; j < d; ++j) {
              dxhat[j] = dy(i, j) * Gv.values[j];
              mean_d += dxhat[j];
              mean_dx += dxhat[j] * (*xhat)(i, j);
            }
            mean_d /= static_cast<double>(d);
            mean_dx /= static_cast<double>(d);
            for (std::size_t j = 0; j < d; ++j) {
              dx(i, j) += (*rstd)[i] * (dxhat[j] - mean_d - (*xhat)(i, j) * mean_dx);
            }
          }
        }
      },
      "layer_norm");
}

Var attention(Var q, Var k, Var v, std::size_t heads, bool causal) {
  Graph& g = common_graph(q, k);
  common_graph(q, v);
  const Tensor& Q = q.value();
  const Tensor& K = k.value();
  const Tensor& V = v.value();
  require_shape(Q.same_shape(K) && Q.same_shape(V), "attention", Q, K);
  if (heads == 0 || Q.cols % heads != 0) {
    throw Error(ErrorKind::kShape, "attention: width " + std::to_string(Q.cols) +
                                       " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t T = Q.rows, d = Q.cols, dh = d / heads;
  const double sc = 1.0 / std::sqrt(static_cast<double>(dh));
  Tensor out(T, d);
  auto weights = std::make_shared<std::vector<Tensor>>(heads, Tensor(T, T));
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t off = h * dh;
    for (std::size_t i = 0; i < T; ++i) {
      const std::size_t count = causal ? i + 1 : T;
      kernels::attention_row(Q.row(i) + off, K.values.data() + off, V.values.data() + off, d,
                             count, dh, sc, out.row(i) + off, (*weights)[h].row(i));
    }
  }
  const std::size_t qi = q.id, ki = k.id, vi = v.id;
  return g.record(
      std::move(out), {qi, ki, vi},
      [qi, ki, vi, heads, causal, dh, sc, weights](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        const Tensor& Qv = gr.value_of(qi);
        const Tensor& Kv = gr.value_of(ki);
        const Tensor& Vv = gr.value_of(vi);
        const std::size_t T = Qv.rows;
        Tensor dq(T, Qv.cols), dk(T, Qv.cols), dv(T, Qv.cols);
        std::vector<double> dw(T);
        for (std::size_t h = 0; h < heads; ++h) {
          const std::size_t off = h * dh;
          for (std::size_t i = 0; i < T; ++i) {
            const std::size_t count = causal ? i + 1 : T;
            const double* w = (*weights)[h].row(i);
            const double* dout = dy.row(i) + off;
            double s = 0;
            for (std::size_t j = 0; j < count; ++j) {
              const double* vr = Vv.row(j) + off;
              double acc = 0;
              for (std::size_t c = 0; c < dh; ++c) acc += dout[c] * vr[c];
              dw[j] = acc;
              s += w[j] * acc;
            }
            const double* qr = Qv.row(i) + off;
            double* dqr = dq.row(i) + off;
            for (std::size_t j = 0; j < count; ++j) {
              const double ds = w[j] * (dw[j] - s) * sc;
              const double* kr = Kv.row(j) + off;
              double* dkr = dk.row(j) + off;
              double* dvr = dv.row(j) + off;
              for (std::size_t c = 0; c < dh; ++c) {
                dqr[c] += ds * kr[c];
                dkr[c] += ds * qr[c];
                dvr[c] += w[j] * dout[c];
              }
            }
          }
        }
        const std::pair<std::size_t, const Tensor*> parts[] = {{qi, &dq}, {ki, &dk}, {vi, &dv}};
        for (const auto& [id, t] : parts) {
          if (!gr.requires_grad(id)) continue;
          Tensor& d = gr.grad_buffer(id);
          for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += t->values[i];
        }
      },
      "attention");
}

Var concat_rows(Var a, Var b) {
  Graph& g = common_graph(a, b);
  const Tensor& A = a.value();
  const Tensor& B = b.value();
  require_shape(A.cols == B.cols, "concat_rows", A, B);
  Tensor out(A.rows + B.rows, A.cols);
  std::copy(A.values.begin(), A.values.end(), out.values.begin());
  std::copy(B.values.begin(), B.values.end(), out.values.begin() + static_cast<long>(A.size()));
  const std::size_t ai = a.id, bi = b.id, na = A.size();
  return g.record(
      std::move(out), {ai, bi},
      [ai, bi, na](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        if (gr.requires_grad(ai)) {
          Tensor& d = gr.grad_buffer(ai);
          for (std::size_t i = 0; i < na; ++i) d.values[i] += dy.values[i];
        }
        if (gr.requires_grad(bi)) {
          Tensor& d = gr.grad_buffer(bi);
          for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += dy.values[na + i];
        }
      },
      "concat_rows");
}

Var slice_row(Var a, std::size_t r) {
  Graph& g = graph_of(a);
  const Tensor& A = a.value();
  if (r >= A.rows) {
    throw Error(ErrorKind::kRange, "slice_row " + std::to_string(r) + " of " + shape_string(A));
  }
  Tensor out(1, A.cols, std::vector<double>(A.row(r), A.row(r) + A.cols));
  const std::size_t ai = a.id;
  return g.record(
      std::move(out), {ai},
      [ai, r](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        Tensor& d = gr.grad_buffer(ai);
        for (std::size_t j = 0; j < dy.cols; ++j) d(r, j) += dy.values[j];
      },
      "slice_row");
}

Var sum(Var a) {
  Graph& g = graph_of(a);
  double s = 0;
  for (double v : a.value().values) s += v;
  const std::size_t ai = a.id;
  return g.record(
      Tensor(1, 1, s), {ai},
      [ai](Graph& gr, std::size_t self) {
        const double dy = gr.grad_of(self).values[0];
        Tensor& d = gr.grad_buffer(ai);
        for (auto& v : d.values) v += dy;
      },
      "sum");
}

Var sum_squares(Var a) {
  Graph& g = graph_of(a);
  double s = 0;
  for (double v : a.value().values) s += v * v;
  const std::size_t ai = a.id;
  return g.record(
      Tensor(1, 1, s), {ai},
      [ai](Graph& gr, std::size_t self) {
        const double dy = gr.grad_of(self).values[0];
        const Tensor& x = gr.value_of(ai);
        Tensor& d = gr.grad_buffer(ai);
        for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += 2.0 * x.values[i] * dy;
      },
      "sum_squares");
}

Var reparameterize(Var mu, Var logvar, const Tensor& eps) {
  Graph& g = common_graph(mu, logvar);
  const Tensor& M = mu.value();
  const Tensor& L = logvar.value();
  require_shape(M.same_shape(L) && M.same_shape(eps), "reparameterize", M, L);
  auto sigma = std::make_shared<Tensor>(M.rows, M.cols);
  Tensor out(M.rows, M.cols);
  for (std::size_t i = 0; i < M.size(); ++i) {
    sigma->values[i] = std::exp(0.5 * L.values[i]);
    out.values[i] = M.values[i] + sigma->values[i] * eps.values[i];
  }
  const std::size_t mi = mu.id, li = logvar.id;
  return g.record(
      std::move(out), {mi, li},
      [mi, li, sigma, eps](Graph& gr, std::size_t self) {
        const Tensor& dy = gr.grad_of(self);
        if (gr.requires_grad(mi)) {
          Tensor& d = gr.grad_buffer(mi);
          for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += dy.values[i];
        }
        if (gr.requires_grad(li)) {
          Tensor& d = gr.grad_buffer(li);
          for (std::size_t i = 0; i < d.size(); ++i) {
            d.values[i] += dy.values[i] * eps.values[i] * 0.5 * sigma->values[i];
          }
        }
      },
      "reparameterize");
}

Var recon_loss(Var head, const Tensor& target) {
  Graph& g = graph_of(head);
  const Tensor& H = head.value();
  require_shape(H.same_shape(target) && H.cols >= 2, "recon_loss", H, target);
  const std::size_t C = H.cols;
  double total = 0;
  for (std::size_t t = 0; t < H.rows; ++t) {
    double l2 = 0;
    for (std::size_t c = 0; c + 1 < C; ++c) {
      const double diff = H(t, c) - target(t, c);
      l2 += diff * diff;
    }
    const double p =
        std::clamp(stable_sigmoid(H(t, C - 1)), kFlagProbClamp, 1.0 - kFlagProbClamp);
    const double y = target(t, C - 1);
    const double bce = -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    total += l2 + bce;
  }
  const std::size_t hi = head.id;
  return g.record(
      Tensor(1, 1, total), {hi},
      [hi, target](Graph& gr, std::size_t self) {
        const double dy = gr.grad_of(self).values[0];
        const Tensor& Hv = gr.value_of(hi);
        Tensor& d = gr.grad_buffer(hi);
        const std::size_t C = Hv.cols;
        for (std::size_t t = 0; t < Hv.rows; ++t) {
          for (std::size_t c = 0; c + 1 < C; ++c) {
            d(t, c) += dy * 2.0 * (Hv(t, c) - target(t, c));
          }
          const double p = stable_sigmoid(Hv(t, C - 1));
          if (p > kFlagProbClamp && p < 1.0 - kFlagProbClamp) {
            d(t, C - 1) += dy * (p - target(t, C - 1));
          }
        }
      },
      "recon_loss");
}

Var kl_loss(Var mu, Var logvar, double beta, double floor) {
  Graph& g = common_graph(mu, logvar);
  const Tensor& M = mu.value();
  const Tensor& L = logvar.value();
  require_shape(M.same_shape(L), "kl_loss", M, L);
  const double nz = static_cast<double>(M.size());
  double raw = 0;
  for (std::size_t i = 0; i < M.size(); ++i) {
    raw += -0.5 * (1.0 + L.values[i] - M.values[i] * M.values[i] - std::exp(L.values[i]));
  }
  const bool active = raw > floor;
  const double value = beta / nz * (active ? raw : floor);
  const std::size_t mi = mu.id, li = logvar.id;
  return g.record(
      Tensor(1, 1, value), {mi, li},
      [mi, li, beta, nz, active](Graph& gr, std::size_t self) {
        if (!active) return;
        const double dy = gr.grad_of(self).values[0] * beta / nz;
        const Tensor& Mv = gr.value_of(mi);
        const Tensor& Lv = gr.value_of(li);
        if (gr.requires_grad(mi)) {
          Tensor& d = gr.grad_buffer(mi);
          for (std::size_t i = 0; i < d.size(); ++i) d.values[i] += dy * Mv.values[i];
        }
        if (gr.requires_grad(li)) {
          Tensor& d = gr.grad_buffer(li);
          for (std::size_t i = 0; i < d.size(); ++i) {
            d.values[i] += dy * -0.5 * (1.0 - std::exp(Lv.values[i]));
          }
        }
      },
      "kl_loss");
}

}  // namespace loopforge
