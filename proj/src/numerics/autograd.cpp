/**
 * Copyright 2026 The rolefed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "numerics/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "numerics/kernels.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

namespace rolefed {

Var GradTape::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var GradTape::parameter(std::string name, Tensor value) {
  if (params_.contains(name)) throw ConfigError("parameter registered twice on tape: " + name);
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  params_.emplace(std::move(name), nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var GradTape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn) {
  bool needs = false;
  for (std::size_t in : inputs) needs = needs || nodes_[in].requires_grad;
  Node node{std::move(value), {}, std::move(inputs), {}, needs};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Tensor& GradTape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros_like(n.value);
  return n.grad;
}

void GradTape::backward(Var loss) {
  const Tensor& lv = nodes_[loss.id].value;
  if (lv.size() != 1) throw ConfigError("backward() needs a scalar loss, got " + shape_string(lv.shape()));
  if (!std::isfinite(lv[0])) throw NumericError("non-finite loss: " + std::to_string(lv[0]));
  for (Node& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, id);
  }
}

std::map<std::string, Tensor> GradTape::parameter_grads() const {
  std::map<std::string, Tensor> out;
  for (const auto& [name, id] : params_) {
    if (!nodes_[id].grad.empty()) out.emplace(name, nodes_[id].grad);
  }
  return out;
}

namespace ag {
namespace {

void expect(bool cond, const std::string& what) {
  if (!cond) throw ConfigError(what);
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  expect(a.shape() == b.shape(), std::string(op) + ": shape mismatch " + shape_string(a.shape()) +
                                     " vs " + shape_string(b.shape()));
}

// Elementwise unary op; `deriv(x, y)` is dy/dx at input x with output y.
template <typename Fwd, typename Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  GradTape& t = *a.tape;
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return t.record(std::move(y), {a.id}, [in = a.id, deriv](GradTape& g, std::size_t self) {
    const Tensor& x = g.value(in);
    const Tensor& y = g.value(self);
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(in);
    for (std::size_t i = 0; i < x.size(); ++i) gx[i] += gy[i] * deriv(x[i], y[i]);
  });
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }
double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

}  // namespace

Var add(Var a, Var b) {
  expect_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += bv[i];
  return a.tape->record(std::move(y), {a.id, b.id}, [ia = a.id, ib = b.id](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    for (std::size_t in : {ia, ib}) {
      if (!g.requires_grad(in)) continue;
      Tensor& gx = g.grad_buffer(in);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
  });
}

Var sub(Var a, Var b) {
  expect_same_shape(a.value(), b.value(), "sub");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= bv[i];
  return a.tape->record(std::move(y), {a.id, b.id}, [ia = a.id, ib = b.id](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] -= gy[i];
    }
  });
}

Var mul(Var a, Var b) {
  expect_same_shape(a.value(), b.value(), "mul");
  Tensor y = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  return a.tape->record(std::move(y), {a.id, b.id}, [ia = a.id, ib = b.id](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& av = g.value(ia);
    const Tensor& bv = g.value(ib);
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < gy.size(); ++i) ga[i] += gy[i] * bv[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < gy.size(); ++i) gb[i] += gy[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var add_bias(Var x, Var b) {
  const Tensor& xv = x.value();
  const Tensor& bv = b.value();
  expect(bv.size() == xv.cols(), "add_bias: bias " + shape_string(bv.shape()) + " vs input " +
                                     shape_string(xv.shape()));
  Tensor y = xv;
  const std::size_t r = xv.rows(), c = xv.cols();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] += bv[j];
  return x.tape->record(std::move(y), {x.id, b.id}, [ix = x.id, ib = b.id, r, c](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    if (g.requires_grad(ix)) {
      Tensor& gx = g.grad_buffer(ix);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i];
    }
    if (g.requires_grad(ib)) {
      Tensor& gb = g.grad_buffer(ib);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gb[j] += gy[i * c + j];
    }
  });
}

Var mul_scalar(Var x, Var s) {
  expect(s.value().size() == 1, "mul_scalar: scale must have one element");
  const double sv = s.value()[0];
  Tensor y = x.value();
  for (double& v : y.values()) v *= sv;
  return x.tape->record(std::move(y), {x.id, s.id}, [ix = x.id, is = s.id](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& xv = g.value(ix);
    const double sv = g.value(is)[0];
    if (g.requires_grad(ix)) {
      Tensor& gx = g.grad_buffer(ix);
      for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * sv;
    }
    if (g.requires_grad(is)) {
      double acc = 0.0;
      for (std::size_t i = 0; i < gy.size(); ++i) acc += gy[i] * xv[i];
      g.grad_buffer(is)[0] += acc;
    }
  });
}

Var mul_rows(Var x, Var a) {
  const Tensor& xv = x.value();
  const Tensor& av = a.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  expect(av.size() == r, "mul_rows: factor " + shape_string(av.shape()) + " vs input " + shape_string(xv.shape()));
  Tensor y = xv;
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] *= av[i];
  return x.tape->record(std::move(y), {x.id, a.id}, [ix = x.id, ia = a.id, r, c](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& xv = g.value(ix);
    const Tensor& av = g.value(ia);
    if (g.requires_grad(ix)) {
      Tensor& gx = g.grad_buffer(ix);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i * c + j] * av[i];
    }
    if (g.requires_grad(ia)) {
      Tensor& ga = g.grad_buffer(ia);
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += gy[i * c + j] * xv[i * c + j];
        ga[i] += acc;
      }
    }
  });
}

Var matmul(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t n = av.rows(), k = av.cols(), m = bv.cols();
  expect(bv.rank() == 2 && bv.rows() == k, "matmul: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()));
  Tensor y({n, m});
  kernels::gemm_nn(av.data(), bv.data(), y.data(), n, k, m);
  return a.tape->record(std::move(y), {a.id, b.id}, [ia = a.id, ib = b.id, n, k, m](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    if (g.requires_grad(ia)) {
      kernels::gemm_nt(gy.data(), g.value(ib).data(), g.grad_buffer(ia).data(), n, m, k);
    }
    if (g.requires_grad(ib)) {
      kernels::gemm_tn(g.value(ia).data(), gy.data(), g.grad_buffer(ib).data(), n, k, m);
    }
  });
}

Var matmul_nt(Var a, Var b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t n = av.rows(), k = av.cols(), m = bv.rows();
  expect(bv.cols() == k, "matmul_nt: " + shape_string(av.shape()) + " x " + shape_string(bv.shape()) + "^T");
  Tensor y({n, m});
  kernels::gemm_nt(av.data(), bv.data(), y.data(), n, k, m);
  return a.tape->record(std::move(y), {a.id, b.id}, [ia = a.id, ib = b.id, n, k, m](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    if (g.requires_grad(ia)) {
      kernels::gemm_nn(gy.data(), g.value(ib).data(), g.grad_buffer(ia).data(), n, m, k);
    }
    if (g.requires_grad(ib)) {
      kernels::gemm_tn(gy.data(), g.value(ia).data(), g.grad_buffer(ib).data(), n, m, k);
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape->record(Tensor::scalar(s), {a.id}, [ia = a.id](GradTape& g, std::size_t self) {
    const double gy = g.grad(self)[0];
    Tensor& gx = g.grad_buffer(ia);
    for (double& v : gx.values()) v += gy;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(Var a) {
  const Tensor& av = a.value();
  const std::size_t r = av.rows(), c = av.cols();
  Tensor y({r, 1});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[i] += av[i * c + j];
  return a.tape->record(std::move(y), {a.id}, [ia = a.id, r, c](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i];
  });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
               [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
  return unary(a, [](double x) { return x * normal_cdf(x); },
               [](double x, double) { return normal_cdf(x) + x * normal_pdf(x); });
}

Var sigmoid(Var a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var abs(Var a) {
  return unary(a, [](double x) { return std::fabs(x); },
               [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  expect(gamma.value().size() == c && beta.value().size() == c,
         "layer_norm: affine params do not match width " + std::to_string(c));
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor y(xv.shape());
  Tensor xhat(xv.shape());
  std::vector<double> rstd(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    double mu = 0.0;
    for (std::size_t j = 0; j < c; ++j) mu += row[j];
    mu /= static_cast<double>(c);
    double var = 0.0;
    for (std::size_t j = 0; j < c; ++j) var += (row[j] - mu) * (row[j] - mu);
    var /= static_cast<double>(c);
    rstd[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < c; ++j) {
      xhat[i * c + j] = (row[j] - mu) * rstd[i];
      y[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
    }
  }
  return x.tape->record(
      std::move(y), {x.id, gamma.id, beta.id},
      [ix = x.id, ig = gamma.id, ib = beta.id, r, c, xhat = std::move(xhat), rstd = std::move(rstd)](
          GradTape& g, std::size_t self) {
        const Tensor& gy = g.grad(self);
        if (g.requires_grad(ib)) {
          Tensor& gb = g.grad_buffer(ib);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gb[j] += gy[i * c + j];
        }
        if (g.requires_grad(ig)) {
          Tensor& gg = g.grad_buffer(ig);
          for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < c; ++j) gg[j] += gy[i * c + j] * xhat[i * c + j];
        }
        if (g.requires_grad(ix)) {
          const Tensor& gv = g.value(ig);
          Tensor& gx = g.grad_buffer(ix);
          const double inv_c = 1.0 / static_cast<double>(c);
          for (std::size_t i = 0; i < r; ++i) {
            double m1 = 0.0, m2 = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const double gh = gy[i * c + j] * gv[j];
              m1 += gh;
              m2 += gh * xhat[i * c + j];
            }
            m1 *= inv_c;
            m2 *= inv_c;
            for (std::size_t j = 0; j < c; ++j) {
              const double gh = gy[i * c + j] * gv[j];
              gx[i * c + j] += rstd[i] * (gh - m1 - xhat[i * c + j] * m2);
            }
          }
        }
      });
}

Var log_softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = row[j] - lse;
  }
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, r, c](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += gy[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[i * c + j] - std::exp(y[i * c + j]) * s;
    }
  });
}

Var softmax(Var x) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < r; ++i) {
    const double* row = xv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (y[i * c + j] = std::exp(row[j] - mx));
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] /= s;
  }
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, r, c](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gy[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += y[i * c + j] * (gy[i * c + j] - dot);
    }
  });
}

Var slice_cols(Var x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  expect(len > 0 && start + len <= c, "slice_cols: out of range");
  Tensor y({r, len});
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xv.data() + i * c + start, len, y.data() + i * len);
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, r, c, start, len](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < len; ++j) gx[i * c + start + j] += gy[i * len + j];
  });
}

Var slice_rows(Var x, std::size_t start, std::size_t len) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  expect(len > 0 && start + len <= r, "slice_rows: out of range");
  Tensor y({len, c});
  std::copy_n(xv.data() + start * c, len * c, y.data());
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, c, start, len](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < len * c; ++i) gx[start * c + i] += gy[i];
  });
}

Var concat_cols(std::span<const Var> parts) {
  expect(!parts.empty(), "concat_cols: no inputs");
  const std::size_t r = parts[0].value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    expect(p.value().rows() == r, "concat_cols: row count mismatch");
    widths.push_back(p.value().cols());
    ids.push_back(p.id);
    total += widths.back();
  }
  Tensor y({r, total});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t i = 0; i < r; ++i)
      std::copy_n(pv.data() + i * widths[k], widths[k], y.data() + i * total + off);
    off += widths[k];
  }
  auto inputs = ids;
  return parts[0].tape->record(std::move(y), std::move(inputs),
                               [ids, widths, r, total](GradTape& g, std::size_t self) {
                                 const Tensor& gy = g.grad(self);
                                 std::size_t off = 0;
                                 for (std::size_t k = 0; k < ids.size(); ++k) {
                                   if (g.requires_grad(ids[k])) {
                                     Tensor& gx = g.grad_buffer(ids[k]);
                                     for (std::size_t i = 0; i < r; ++i)
                                       for (std::size_t j = 0; j < widths[k]; ++j)
                                         gx[i * widths[k] + j] += gy[i * total + off + j];
                                   }
                                   off += widths[k];
                                 }
                               });
}

Var concat_rows(std::span<const Var> parts) {
  expect(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = parts[0].value().cols();
  std::vector<std::size_t> heights, ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    expect(p.value().cols() == c, "concat_rows: column count mismatch");
    heights.push_back(p.value().rows());
    ids.push_back(p.id);
    total += heights.back();
  }
  Tensor y({total, c});
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    std::copy_n(parts[k].value().data(), heights[k] * c, y.data() + off * c);
    off += heights[k];
  }
  auto inputs = ids;
  return parts[0].tape->record(std::move(y), std::move(inputs), [ids, heights, c](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    std::size_t off = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (g.requires_grad(ids[k])) {
        Tensor& gx = g.grad_buffer(ids[k]);
        for (std::size_t i = 0; i < heights[k] * c; ++i) gx[i] += gy[off * c + i];
      }
      off += heights[k];
    }
  });
}

Var gather_rows(Var table, std::span<const std::uint32_t> ids) {
  const Tensor& tv = table.value();
  const std::size_t v = tv.rows(), e = tv.cols();
  Tensor y({ids.size(), e});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    expect(ids[i] < v, "gather_rows: id " + std::to_string(ids[i]) + " outside table of " + std::to_string(v));
    std::copy_n(tv.data() + ids[i] * e, e, y.data() + i * e);
  }
  return table.tape->record(std::move(y), {table.id},
                            [it = table.id, e, idv = std::vector<std::uint32_t>(ids.begin(), ids.end())](
                                GradTape& g, std::size_t self) {
                              const Tensor& gy = g.grad(self);
                              Tensor& gt = g.grad_buffer(it);
                              for (std::size_t i = 0; i < idv.size(); ++i)
                                for (std::size_t j = 0; j < e; ++j) gt[idv[i] * e + j] += gy[i * e + j];
                            });
}

Var segment_max(Var x, std::size_t segments) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  expect(segments > 0 && r % segments == 0, "segment_max: rows not divisible into segments");
  const std::size_t m = r / segments;
  Tensor y({segments, c});
  std::vector<std::size_t> arg(segments * c);
  for (std::size_t s = 0; s < segments; ++s) {
    for (std::size_t j = 0; j < c; ++j) {
      std::size_t best = s * m;
      for (std::size_t i = s * m + 1; i < (s + 1) * m; ++i) {
        if (xv[i * c + j] > xv[best * c + j]) best = i;
      }
      arg[s * c + j] = best;
      y[s * c + j] = xv[best * c + j];
    }
  }
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, c, arg = std::move(arg)](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t k = 0; k < arg.size(); ++k) gx[arg[k] * c + k % c] += gy[k];
  });
}

Var segment_mean(Var x, std::size_t segments) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  expect(segments > 0 && r % segments == 0, "segment_mean: rows not divisible into segments");
  const std::size_t m = r / segments;
  const double inv = 1.0 / static_cast<double>(m);
  Tensor y({segments, c});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[(i / m) * c + j] += xv[i * c + j] * inv;
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, r, c, m, inv](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += gy[(i / m) * c + j] * inv;
  });
}

Var dropout(Var x, double p, bool train, Rng& rng) {
  if (!train || p <= 0.0) return x;
  expect(p < 1.0, "dropout: probability must be < 1");
  const Tensor& xv = x.value();
  Tensor mask(xv.shape());
  const double keep = 1.0 / (1.0 - p);
  for (double& m : mask.values()) m = rng.uniform() < p ? 0.0 : keep;
  return mul(x, x.tape->constant(std::move(mask)));
}

Var unfold_windows(Var x, std::size_t sequences, std::size_t k) {
  const Tensor& xv = x.value();
  const std::size_t rows = xv.rows(), e = xv.cols();
  expect(sequences > 0 && rows % sequences == 0, "unfold_windows: rows not divisible into sequences");
  const std::size_t len = rows / sequences;
  expect(k >= 1 && k <= len, "unfold_windows: window " + std::to_string(k) + " longer than sequence " +
                                 std::to_string(len));
  const std::size_t w = len - k + 1;
  Tensor y({sequences * w, k * e});
  for (std::size_t s = 0; s < sequences; ++s)
    for (std::size_t t = 0; t < w; ++t)
      std::copy_n(xv.data() + (s * len + t) * e, k * e, y.data() + (s * w + t) * k * e);
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, sequences, len, w, k, e](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t s = 0; s < sequences; ++s)
      for (std::size_t t = 0; t < w; ++t) {
        const double* src = gy.data() + (s * w + t) * k * e;
        double* dst = gx.data() + (s * len + t) * e;
        for (std::size_t q = 0; q < k * e; ++q) dst[q] += src[q];
      }
  });
}

Var multi_head_attention(Var q, Var k, Var v, std::size_t sequences, std::size_t heads) {
  const Tensor& qv = q.value();
  const std::size_t rows = qv.rows(), d = qv.cols();
  expect(k.value().shape() == qv.shape() && v.value().shape() == qv.shape(), "attention: q/k/v shape mismatch");
  expect(heads > 0 && d % heads == 0, "attention: width " + std::to_string(d) + " not divisible by " +
                                          std::to_string(heads) + " heads");
  expect(sequences > 0 && rows % sequences == 0, "attention: rows not divisible into sequences");
  const std::size_t len = rows / sequences, dk = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dk));
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  Tensor y({rows, d});
  // Attention weights per (sequence, head), len x len, kept for backward.
  std::vector<double> weights(sequences * heads * len * len);
  for (std::size_t s = 0; s < sequences; ++s) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* a = weights.data() + (s * heads + h) * len * len;
      for (std::size_t i = 0; i < len; ++i) {
        const double* qi = qv.data() + (s * len + i) * d + h * dk;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < len; ++j) {
          const double* kj = kv.data() + (s * len + j) * d + h * dk;
          double dot = 0.0;
          for (std::size_t t = 0; t < dk; ++t) dot += qi[t] * kj[t];
          a[i * len + j] = dot * inv_sqrt;
          mx = std::max(mx, a[i * len + j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < len; ++j) z += (a[i * len + j] = std::exp(a[i * len + j] - mx));
        for (std::size_t j = 0; j < len; ++j) a[i * len + j] /= z;
        double* yi = y.data() + (s * len + i) * d + h * dk;
        for (std::size_t j = 0; j < len; ++j) {
          const double* vj = vv.data() + (s * len + j) * d + h * dk;
          for (std::size_t t = 0; t < dk; ++t) yi[t] += a[i * len + j] * vj[t];
        }
      }
    }
  }
  return q.tape->record(
      std::move(y), {q.id, k.id, v.id},
      [iq = q.id, ik = k.id, iv = v.id, sequences, heads, len, d, dk, inv_sqrt, weights = std::move(weights)](
          GradTape& g, std::size_t self) {
        const Tensor& gy = g.grad(self);
        const Tensor& qv = g.value(iq);
        const Tensor& kv = g.value(ik);
        const Tensor& vv = g.value(iv);
        Tensor* gq = g.requires_grad(iq) ? &g.grad_buffer(iq) : nullptr;
        Tensor* gk = g.requires_grad(ik) ? &g.grad_buffer(ik) : nullptr;
        Tensor* gv = g.requires_grad(iv) ? &g.grad_buffer(iv) : nullptr;
        std::vector<double> ga(len), gs(len);
        for (std::size_t s = 0; s < sequences; ++s) {
          for (std::size_t h = 0; h < heads; ++h) {
            const double* a = weights.data() + (s * heads + h) * len * len;
            for (std::size_t i = 0; i < len; ++i) {
              const double* gyi = gy.data() + (s * len + i) * d + h * dk;
              double dot = 0.0;
              for (std::size_t j = 0; j < len; ++j) {
                const double* vj = vv.data() + (s * len + j) * d + h * dk;
                double acc = 0.0;
                for (std::size_t t = 0; t < dk; ++t) acc += gyi[t] * vj[t];
                ga[j] = acc;
                dot += acc * a[i * len + j];
                if (gv) {
                  double* gvj = gv->data() + (s * len + j) * d + h * dk;
                  for (std::size_t t = 0; t < dk; ++t) gvj[t] += a[i * len + j] * gyi[t];
                }
              }
              for (std::size_t j = 0; j < len; ++j) gs[j] = a[i * len + j] * (ga[j] - dot) * inv_sqrt;
              const double* qi = qv.data() + (s * len + i) * d + h * dk;
              for (std::size_t j = 0; j < len; ++j) {
                const double* kj = kv.data() + (s * len + j) * d + h * dk;
                if (gq) {
                  double* gqi = gq->data() + (s * len + i) * d + h * dk;
                  for (std::size_t t = 0; t < dk; ++t) gqi[t] += gs[j] * kj[t];
                }
                if (gk) {
                  double* gkj = gk->data() + (s * len + j) * d + h * dk;
                  for (std::size_t t = 0; t < dk; ++t) gkj[t] += gs[j] * qi[t];
                }
              }
            }
          }
        }
      });
}

Var lstm_pointwise(Var gates, Var c_prev) {
  const Tensor& zv = gates.value();
  const Tensor& cv = c_prev.value();
  const std::size_t n = cv.rows(), h = cv.cols();
  expect(zv.rows() == n && zv.cols() == 4 * h, "lstm_pointwise: gates " + shape_string(zv.shape()) +
                                                   " vs state " + shape_string(cv.shape()));
  Tensor y({n, 2 * h});
  // Activated gates (i, f, g, o), kept for backward.
  std::vector<double> act(n * 4 * h);
  auto sig = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  for (std::size_t r = 0; r < n; ++r) {
    const double* z = zv.data() + r * 4 * h;
    double* a = act.data() + r * 4 * h;
    for (std::size_t j = 0; j < h; ++j) {
      a[j] = sig(z[j]);
      a[h + j] = sig(z[h + j]);
      a[2 * h + j] = std::tanh(z[2 * h + j]);
      a[3 * h + j] = sig(z[3 * h + j]);
      const double c = a[h + j] * cv[r * h + j] + a[j] * a[2 * h + j];
      y[r * 2 * h + h + j] = c;
      y[r * 2 * h + j] = a[3 * h + j] * std::tanh(c);
    }
  }
  return gates.tape->record(
      std::move(y), {gates.id, c_prev.id},
      [iz = gates.id, ic = c_prev.id, n, h, act = std::move(act)](GradTape& g, std::size_t self) {
        const Tensor& gy = g.grad(self);
        const Tensor& y = g.value(self);
        const Tensor& cv = g.value(ic);
        Tensor* gz = g.requires_grad(iz) ? &g.grad_buffer(iz) : nullptr;
        Tensor* gc = g.requires_grad(ic) ? &g.grad_buffer(ic) : nullptr;
        for (std::size_t r = 0; r < n; ++r) {
          const double* a = act.data() + r * 4 * h;
          for (std::size_t j = 0; j < h; ++j) {
            const double i = a[j], f = a[h + j], gg = a[2 * h + j], o = a[3 * h + j];
            const double c = y[r * 2 * h + h + j];
            const double tc = std::tanh(c);
            const double gh = gy[r * 2 * h + j];
            const double gct = gy[r * 2 * h + h + j] + gh * o * (1.0 - tc * tc);
            if (gz) {
              double* dz = gz->data() + r * 4 * h;
              dz[j] += gct * gg * i * (1.0 - i);
              dz[h + j] += gct * cv[r * h + j] * f * (1.0 - f);
              dz[2 * h + j] += gct * i * (1.0 - gg * gg);
              dz[3 * h + j] += gh * tc * o * (1.0 - o);
            }
            if (gc) (*gc)[r * h + j] += gct * f;
          }
        }
      });
}

Var attention_pool(std::span<const Var> steps, Var score, const std::vector<std::uint8_t>& mask) {
  expect(!steps.empty(), "attention_pool: no time steps");
  const std::size_t len = steps.size();
  const std::size_t n = steps[0].value().rows(), d = steps[0].value().cols();
  expect(score.value().size() == d, "attention_pool: score vector width mismatch");
  expect(mask.size() == n * len, "attention_pool: mask size mismatch");
  const Tensor& sv = score.value();
  std::vector<std::size_t> ids;
  for (const Var& s : steps) {
    expect(s.value().rows() == n && s.value().cols() == d, "attention_pool: step shape mismatch");
    ids.push_back(s.id);
  }
  Tensor y({n, d});
  std::vector<double> weights(n * len, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::size_t t = 0; t < len; ++t) {
      if (!mask[i * len + t]) continue;
      const double* st = steps[t].value().data() + i * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += st[j] * sv[j];
      weights[i * len + t] = dot;
      mx = std::max(mx, dot);
      any = true;
    }
    if (!any) continue;
    double z = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
      if (!mask[i * len + t]) continue;
      z += (weights[i * len + t] = std::exp(weights[i * len + t] - mx));
    }
    for (std::size_t t = 0; t < len; ++t) {
      if (!mask[i * len + t]) continue;
      weights[i * len + t] /= z;
      const double* st = steps[t].value().data() + i * d;
      for (std::size_t j = 0; j < d; ++j) y[i * d + j] += weights[i * len + t] * st[j];
    }
  }
  std::vector<std::size_t> inputs = ids;
  inputs.push_back(score.id);
  return score.tape->record(
      std::move(y), std::move(inputs),
      [ids, is = score.id, n, d, len, mask, weights = std::move(weights)](GradTape& g, std::size_t self) {
        const Tensor& gy = g.grad(self);
        const Tensor& sv = g.value(is);
        Tensor* gs = g.requires_grad(is) ? &g.grad_buffer(is) : nullptr;
        std::vector<double> ga(len);
        for (std::size_t i = 0; i < n; ++i) {
          double dot = 0.0;
          for (std::size_t t = 0; t < len; ++t) {
            ga[t] = 0.0;
            if (!mask[i * len + t]) continue;
            const double* st = g.value(ids[t]).data() + i * d;
            for (std::size_t j = 0; j < d; ++j) ga[t] += gy[i * d + j] * st[j];
            dot += ga[t] * weights[i * len + t];
          }
          for (std::size_t t = 0; t < len; ++t) {
            if (!mask[i * len + t]) continue;
            const double a = weights[i * len + t];
            const double gscore = a * (ga[t] - dot);
            const double* st = g.value(ids[t]).data() + i * d;
            if (g.requires_grad(ids[t])) {
              double* gst = g.grad_buffer(ids[t]).data() + i * d;
              for (std::size_t j = 0; j < d; ++j) gst[j] += a * gy[i * d + j] + gscore * sv[j];
            }
            if (gs) {
              for (std::size_t j = 0; j < d; ++j) (*gs)[j] += gscore * st[j];
            }
          }
        }
      });
}

Var weight_norm(Var v, Var gain) {
  const Tensor& vv = v.value();
  const std::size_t rows = vv.rows(), cols = vv.cols();
  expect(gain.value().size() == cols, "weight_norm: gain width mismatch");
  const Tensor& gv = gain.value();
  std::vector<double> norms(cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) norms[j] += vv[i * cols + j] * vv[i * cols + j];
  for (double& nrm : norms) {
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) throw NumericError("weight_norm: zero-norm direction column");
  }
  Tensor w({rows, cols});
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) w[i * cols + j] = gv[j] * vv[i * cols + j] / norms[j];
  return v.tape->record(std::move(w), {v.id, gain.id},
                        [iv = v.id, ig = gain.id, rows, cols, norms = std::move(norms)](GradTape& g, std::size_t self) {
                          const Tensor& gw = g.grad(self);
                          const Tensor& vv = g.value(iv);
                          const Tensor& gv = g.value(ig);
                          std::vector<double> proj(cols, 0.0);
                          for (std::size_t i = 0; i < rows; ++i)
                            for (std::size_t j = 0; j < cols; ++j)
                              proj[j] += gw[i * cols + j] * vv[i * cols + j] / norms[j];
                          if (g.requires_grad(ig)) {
                            Tensor& gg = g.grad_buffer(ig);
                            for (std::size_t j = 0; j < cols; ++j) gg[j] += proj[j];
                          }
                          if (g.requires_grad(iv)) {
                            Tensor& gvv = g.grad_buffer(iv);
                            for (std::size_t i = 0; i < rows; ++i)
                              for (std::size_t j = 0; j < cols; ++j) {
                                const double u = vv[i * cols + j] / norms[j];
                                gvv[i * cols + j] += gv[j] / norms[j] * (gw[i * cols + j] - proj[j] * u);
                              }
                          }
                        });
}

Var normalize_rows(Var x) {
  const Tensor& xv = x.value();
  const std::size_t r = xv.rows(), c = xv.cols();
  Tensor y(xv.shape());
  std::vector<double> norms(r);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += xv[i * c + j] * xv[i * c + j];
    norms[i] = std::sqrt(s);
    if (norms[i] < 1e-12) continue;
    for (std::size_t j = 0; j < c; ++j) y[i * c + j] = xv[i * c + j] / norms[i];
  }
  return x.tape->record(std::move(y), {x.id}, [ix = x.id, r, c, norms = std::move(norms)](GradTape& g, std::size_t self) {
    const Tensor& gy = g.grad(self);
    const Tensor& y = g.value(self);
    Tensor& gx = g.grad_buffer(ix);
    for (std::size_t i = 0; i < r; ++i) {
      if (norms[i] < 1e-12) continue;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += gy[i * c + j] * y[i * c + j];
      for (std::size_t j = 0; j < c; ++j) gx[i * c + j] += (gy[i * c + j] - dot * y[i * c + j]) / norms[i];
    }
  });
}

Var focal_loss(Var logits, std::span<const int> labels, double gamma) {
  const Tensor& zv = logits.value();
  const std::size_t n = zv.rows(), c = zv.cols();
  expect(labels.size() == n, "focal_loss: label count mismatch");
  expect(gamma >= 0.0, "focal_loss: gamma must be >= 0");
  // Per-row softmax and dL/dlog p_t, kept for backward.
  std::vector<double> probs(n * c), dlp(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    expect(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < c, "focal_loss: label out of range");
    const double* row = zv.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(row[j] - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] = std::exp(row[j] - lse);
    const double lpt = row[labels[i]] - lse;
    const double pt = std::exp(lpt);
    const double q = 1.0 - pt;
    const double mod = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
    total += -mod * lpt;
    double d = -mod;
    if (gamma > 0.0 && q > 0.0) d += gamma * std::pow(q, gamma - 1.0) * pt * lpt;
    dlp[i] = d;
  }
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape->record(
      Tensor::scalar(total / static_cast<double>(n)), {logits.id},
      [iz = logits.id, n, c, probs = std::move(probs), dlp = std::move(dlp), lab = std::move(lab)](
          GradTape& g, std::size_t self) {
        const double gy = g.grad(self)[0] / static_cast<double>(n);
        Tensor& gz = g.grad_buffer(iz);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j) {
            const double delta = static_cast<int>(j) == lab[i] ? 1.0 : 0.0;
            gz[i * c + j] += gy * dlp[i] * (delta - probs[i * c + j]);
          }
      });
}

Var js_divergence(Var logits_a, Var logits_b) {
  const Tensor& av = logits_a.value();
  const Tensor& bv = logits_b.value();
  expect_same_shape(av, bv, "js_divergence");
  const std::size_t n = av.rows(), c = av.cols();
  auto softmax_rows = [&](const Tensor& z) {
    std::vector<double> p(n * c);
    for (std::size_t i = 0; i < n; ++i) {
      const double* row = z.data() + i * c;
      const double mx = *std::max_element(row, row + c);
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += (p[i * c + j] = std::exp(row[j] - mx));
      for (std::size_t j = 0; j < c; ++j) p[i * c + j] /= s;
    }
    return p;
  };
  std::vector<double> p = softmax_rows(av), q = softmax_rows(bv);
  auto xlogy_ratio = [](double x, double m) { return x > 0.0 ? x * std::log(x / m) : 0.0; };
  double total = 0.0;
  for (std::size_t k = 0; k < n * c; ++k) {
    const double m = 0.5 * (p[k] + q[k]);
    total += 0.5 * (xlogy_ratio(p[k], m) + xlogy_ratio(q[k], m));
  }
  return logits_a.tape->record(
      Tensor::scalar(total / static_cast<double>(n)), {logits_a.id, logits_b.id},
      [ia = logits_a.id, ib = logits_b.id, n, c, p = std::move(p), q = std::move(q)](GradTape& g, std::size_t self) {
        const double gy = g.grad(self)[0] / static_cast<double>(n);
        // dJS/dp_k = 0.5 * log(p_k / m_k), then through the softmax Jacobian.
        auto push = [&](std::size_t in, const std::vector<double>& x) {
          if (!g.requires_grad(in)) return;
          Tensor& gz = g.grad_buffer(in);
          std::vector<double> gp(c);
          for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
              const std::size_t k = i * c + j;
              const double m = 0.5 * (p[k] + q[k]);
              gp[j] = x[k] > 0.0 ? 0.5 * std::log(x[k] / m) : 0.0;
              dot += gp[j] * x[k];
            }
            for (std::size_t j = 0; j < c; ++j) gz[i * c + j] += gy * x[i * c + j] * (gp[j] - dot);
          }
        };
        push(ia, p);
        push(ib, q);
      });
}

Var proximal(std::span<const Var> params, std::span<const Tensor* const> anchors, double mu) {
  expect(params.size() == anchors.size(), "proximal: parameter/anchor count mismatch");
  expect(!params.empty(), "proximal: no parameters");
  double total = 0.0;
  std::vector<std::size_t> ids;
  std::vector<const Tensor*> anchor_list(anchors.begin(), anchors.end());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& pv = params[k].value();
    expect(pv.shape() == anchors[k]->shape(), "proximal: anchor shape mismatch");
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double d = pv[i] - (*anchors[k])[i];
      total += d * d;
    }
    ids.push_back(params[k].id);
  }
  std::vector<std::size_t> inputs = ids;
  return params[0].tape->record(Tensor::scalar(0.5 * mu * total), std::move(inputs),
                                [ids, anchor_list, mu](GradTape& g, std::size_t self) {
                                  const double gy = g.grad(self)[0];
                                  for (std::size_t k = 0; k < ids.size(); ++k) {
                                    if (!g.requires_grad(ids[k])) continue;
                                    const Tensor& pv = g.value(ids[k]);
                                    Tensor& gp = g.grad_buffer(ids[k]);
                                    for (std::size_t i = 0; i < pv.size(); ++i)
                                      gp[i] += gy * mu * (pv[i] - (*anchor_list[k])[i]);
                                  }
                                });
}

}  // namespace ag
}  // namespace rolefed
