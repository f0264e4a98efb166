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

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "doctest.h"
#include "numerics/autograd.hpp"
#include "numerics/functions.hpp"
#include "numerics/gradcheck.hpp"
#include "numerics/layers.hpp"
#include "numerics/optim.hpp"
#include "support.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

using namespace rolefed;
using rolefed::testing::check_gradients;
using rolefed::testing::LossBuilder;
using rolefed::testing::probe;
using rolefed::testing::random_tensor;

namespace {

Tensor run_forward(const ParamSet& ps, const std::function<Var(ParamBinder&)>& f) {
  GradTape tape;
  ParamBinder b(tape, ps, false);
  return f(b).value();
}

// Straight triple loop, independent of the blocked kernels.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor c({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a.at(i, k) * b.at(k, j);
      c.at(i, j) = s;
    }
  return c;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("affine: identity, zero weights and triple-loop oracle") {
  ParamSet ps;
  ps["fc.weight"] = Tensor::matrix(2, 2, {1, 0, 0, 1});
  ps["fc.bias"] = Tensor({2});
  Tensor y = run_forward(ps, [](ParamBinder& p) {
    return affine(p, "fc", p.tape().constant(Tensor::matrix(1, 2, {1, 2})));
  });
  CHECK(y == Tensor::matrix(1, 2, {1, 2}));

  ps["fc.weight"] = Tensor::matrix(1, 1, {0});
  ps["fc.bias"] = Tensor::vector({5});
  y = run_forward(ps, [](ParamBinder& p) { return affine(p, "fc", p.tape().constant(Tensor::matrix(1, 1, {3}))); });
  CHECK(y[0] == 5.0);

  Rng rng(11);
  Tensor x = normal_tensor({3, 4}, 1.0, rng);
  ps["fc.weight"] = normal_tensor({4, 2}, 1.0, rng);
  ps["fc.bias"] = normal_tensor({2}, 1.0, rng);
  y = run_forward(ps, [&](ParamBinder& p) { return affine(p, "fc", p.tape().constant(x)); });
  Tensor expect = matmul_oracle(x, ps["fc.weight"]);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) CHECK(y.at(i, j) == doctest::Approx(expect.at(i, j) + ps["fc.bias"][j]).epsilon(1e-14));
}

TEST_CASE("affine: shape mismatch is a configuration error") {
  ParamSet ps;
  ps["fc.weight"] = Tensor({3, 2});
  ps["fc.bias"] = Tensor({2});
  CHECK_THROWS_AS(run_forward(ps, [](ParamBinder& p) { return affine(p, "fc", p.tape().constant(Tensor({1, 2}))); }),
                  ConfigError);
}

TEST_CASE("matmul variants agree with the oracle on random shapes") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(9), k = 1 + rng.below(9), m = 1 + rng.below(9);
    Tensor a = normal_tensor({n, k}, 1.0, rng), b = normal_tensor({k, m}, 1.0, rng);
    GradTape tape;
    Tensor c = ag::matmul(tape.constant(a), tape.constant(b)).value();
    Tensor bt({m, k});
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < m; ++j) bt.at(j, i) = b.at(i, j);
    Tensor c2 = ag::matmul_nt(tape.constant(a), tape.constant(bt)).value();
    Tensor expect = matmul_oracle(a, b);
    for (std::size_t i = 0; i < expect.size(); ++i) {
      CHECK(c[i] == doctest::Approx(expect[i]).epsilon(1e-13));
      CHECK(c2[i] == doctest::Approx(expect[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("layer_norm examples") {
  GradTape tape;
  Var ones = tape.constant(Tensor({2}, 1.0));
  Var zeros = tape.constant(Tensor({2}));
  Tensor y = ag::layer_norm(tape.constant(Tensor::matrix(1, 2, {3, 3})), ones, zeros, 1e-5).value();
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);

  y = ag::layer_norm(tape.constant(Tensor::matrix(1, 2, {1, -1})), ones, zeros, 1e-14).value();
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(-1.0).epsilon(1e-12));

  Var beta = tape.constant(Tensor::vector({0.5, -2.0}));
  y = ag::layer_norm(tape.constant(Tensor::matrix(2, 2, {1, 7, -4, 2})), zeros, beta, 1e-5).value();
  CHECK(y == Tensor::matrix(2, 2, {0.5, -2.0, 0.5, -2.0}));
}

TEST_CASE("log_softmax examples and normalization") {
  GradTape tape;
  Tensor y = ag::log_softmax(tape.constant(Tensor::vector({0, 0}))).value();
  CHECK(y[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(y[1] == doctest::Approx(-std::log(2.0)).epsilon(1e-15));

  y = ag::log_softmax(tape.constant(Tensor::vector({1000, 0}))).value();
  CHECK(std::isfinite(y[0]));
  CHECK(std::fabs(y[0]) < 1e-300);
  CHECK(y[1] == doctest::Approx(-1000.0));

  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor z = normal_tensor({3, 4}, 10.0, rng);
    Tensor shifted = z;
    for (double& v : shifted.values()) v += 123.25;
    Tensor a = ag::log_softmax(tape.constant(z)).value();
    Tensor b = ag::log_softmax(tape.constant(shifted)).value();
    for (std::size_t r = 0; r < 3; ++r) {
      const auto row = a.values().subspan(r * 4, 4);
      CHECK(std::fabs(math::logsumexp(row)) < 1e-9);
      for (std::size_t c = 0; c < 4; ++c) CHECK(a.at(r, c) == doctest::Approx(b.at(r, c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("gelu uses the exact Gaussian CDF") {
  CHECK(math::gelu(0.0) == 0.0);
  CHECK(math::gelu(1.0) == doctest::Approx(0.841345).epsilon(1e-6));
  CHECK(math::gelu(40.0) / 40.0 == doctest::Approx(1.0));
  GradTape tape;
  CHECK(ag::gelu(tape.constant(Tensor::vector({1.0}))).value()[0] == doctest::Approx(0.8413447460685429).epsilon(1e-14));
}

TEST_CASE("mhsa_block: single token, permutation equivariance, shapes") {
  Rng rng(21);
  ParamSet ps;
  init_mhsa_block(ps, "blk", 8, 16, rng);
  const BlockShape shape{1, 2, 0.0};

  SUBCASE("single token attends to itself") {
    Rng unused(0);
    Tensor x = normal_tensor({1, 8}, 1.0, rng);
    GradTape tape;
    ParamBinder p(tape, ps, false);
    Var q = affine(p, "blk.attn.q", tape.constant(x));
    Var v = affine(p, "blk.attn.v", tape.constant(x));
    Var k = ag::matmul(tape.constant(x), p("blk.attn.k.weight"));
    Tensor out = ag::multi_head_attention(q, k, v, 1, 2).value();
    CHECK(out == v.value());
  }

  SUBCASE("permuting rows permutes outputs") {
    const std::size_t len = 6;
    Tensor x = normal_tensor({len, 8}, 1.0, rng);
    std::vector<std::size_t> perm(len);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    Tensor xp({len, 8});
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < 8; ++j) xp.at(i, j) = x.at(perm[i], j);
    Rng r1(0), r2(0);
    Tensor y = run_forward(ps, [&](ParamBinder& p) { return mhsa_block(p, "blk", p.tape().constant(x), shape, false, r1); });
    Tensor yp =
        run_forward(ps, [&](ParamBinder& p) { return mhsa_block(p, "blk", p.tape().constant(xp), shape, false, r2); });
    for (std::size_t i = 0; i < len; ++i)
      for (std::size_t j = 0; j < 8; ++j) CHECK(std::fabs(yp.at(i, j) - y.at(perm[i], j)) < 1e-10);
  }

  SUBCASE("output shape equals input shape at d=768") {
    ParamSet big;
    init_mhsa_block(big, "blk", 768, 1024, rng);
    for (std::size_t len : {1, 4, 16}) {
      Tensor x = normal_tensor({len, 768}, 1.0, rng);
      Rng r(0);
      Tensor y = run_forward(big, [&](ParamBinder& p) {
        return mhsa_block(p, "blk", p.tape().constant(x), BlockShape{1, 8, 0.2}, false, r);
      });
      CHECK(y.shape() == x.shape());
      CHECK(y.all_finite());
    }
  }

  SUBCASE("width not divisible by heads is rejected") {
    Rng r(0);
    Tensor x = normal_tensor({2, 8}, 1.0, rng);
    CHECK_THROWS_AS(
        run_forward(ps, [&](ParamBinder& p) { return mhsa_block(p, "blk", p.tape().constant(x), BlockShape{1, 3, 0.0}, false, r); }),
        ConfigError);
  }
}

TEST_CASE("lstm_cell_step matches a scalar-loop cell") {
  const std::size_t in = 3, hid = 4;
  ParamSet ps;
  ps["cell.w_hidden"] = Tensor({hid, 4 * hid});
  auto step = [&](const Tensor& x_proj, const Tensor& h, const Tensor& c) {
    GradTape tape;
    ParamBinder p(tape, ps, false);
    auto [h2, c2] = lstm_cell_step(p, "cell", tape.constant(x_proj), tape.constant(h), tape.constant(c));
    return std::pair{h2.value(), c2.value()};
  };

  auto [h0, c0] = step(Tensor({1, 4 * hid}), Tensor({1, hid}), Tensor({1, hid}));
  CHECK(h0 == Tensor({1, hid}));
  CHECK(c0 == Tensor({1, hid}));

  Tensor c_prev = Tensor::matrix(1, 4, {1.0, -2.0, 0.5, 3.0});
  auto [h1, c1] = step(Tensor({1, 4 * hid}), Tensor({1, hid}), c_prev);
  for (std::size_t j = 0; j < hid; ++j) CHECK(c1[j] == doctest::Approx(0.5 * c_prev[j]).epsilon(1e-15));

  Rng rng(8);
  Tensor w_in = normal_tensor({in, 4 * hid}, 0.5, rng);
  Tensor bias = normal_tensor({4 * hid}, 0.5, rng);
  ps["cell.w_hidden"] = normal_tensor({hid, 4 * hid}, 0.5, rng);
  Tensor x = normal_tensor({1, in}, 1.0, rng), h = normal_tensor({1, hid}, 1.0, rng), c = normal_tensor({1, hid}, 1.0, rng);
  Tensor x_proj({1, 4 * hid});
  for (std::size_t g = 0; g < 4 * hid; ++g) {
    double s = bias[g];
    for (std::size_t i = 0; i < in; ++i) s += x[i] * w_in.at(i, g);
    x_proj[g] = s;
  }
  auto [h2, c2] = step(x_proj, h, c);
  const Tensor& wh = ps["cell.w_hidden"];
  for (std::size_t j = 0; j < hid; ++j) {
    double pre[4];
    for (std::size_t gate = 0; gate < 4; ++gate) {
      const std::size_t col = gate * hid + j;
      double s = bias[col];
      for (std::size_t i = 0; i < in; ++i) s += x[i] * w_in.at(i, col);
      for (std::size_t i = 0; i < hid; ++i) s += h[i] * wh.at(i, col);
      pre[gate] = s;
    }
    const double ig = sigmoid(pre[0]), fg = sigmoid(pre[1]), gg = std::tanh(pre[2]), og = sigmoid(pre[3]);
    const double cn = fg * c[j] + ig * gg;
    CHECK(std::fabs(c2[j] - cn) < 1e-12);
    CHECK(std::fabs(h2[j] - og * std::tanh(cn)) < 1e-12);
  }
}

TEST_CASE("attention_pool examples") {
  GradTape tape;
  Rng rng(4);
  Tensor s0 = normal_tensor({1, 3}, 1.0, rng);
  std::vector<Var> one{tape.constant(s0)};
  CHECK(ag::attention_pool(one, tape.constant(normal_tensor({3}, 1.0, rng)), {1}).value() == s0);

  std::vector<Var> three;
  Tensor avg({1, 3});
  for (int t = 0; t < 3; ++t) {
    Tensor s = normal_tensor({1, 3}, 1.0, rng);
    for (std::size_t j = 0; j < 3; ++j) avg[j] += s[j] / 3.0;
    three.push_back(tape.constant(s));
  }
  Tensor pooled = ag::attention_pool(three, tape.constant(Tensor({3})), {1, 1, 1}).value();
  for (std::size_t j = 0; j < 3; ++j) CHECK(pooled[j] == doctest::Approx(avg[j]).epsilon(1e-14));

  std::vector<Var> same(4, tape.constant(s0));
  pooled = ag::attention_pool(same, tape.constant(normal_tensor({3}, 5.0, rng)), {1, 1, 1, 0}).value();
  for (std::size_t j = 0; j < 3; ++j) CHECK(pooled[j] == doctest::Approx(s0[j]).epsilon(1e-14));

  pooled = ag::attention_pool(three, tape.constant(normal_tensor({3}, 1.0, rng)), {0, 0, 0}).value();
  CHECK(pooled == Tensor({1, 3}));
}

TEST_CASE("multiscale_conv_encode matches a sliding-window oracle") {
  const std::size_t e = 3, filters = 2, min_k = 2, max_k = 4;
  Rng rng(17);
  ParamSet ps;
  for (std::size_t k = min_k; k <= max_k; ++k) {
    ps[conv_prefix("conv", k) + ".weight"] = normal_tensor({k * e, filters}, 1.0, rng);
    ps[conv_prefix("conv", k) + ".bias"] = normal_tensor({filters}, 0.1, rng);
  }

  SUBCASE("random sequences") {
    const std::size_t n = 2, len = 7;
    Tensor x = normal_tensor({n * len, e}, 1.0, rng);
    Tensor y = run_forward(ps, [&](ParamBinder& p) {
      return multiscale_conv_encode(p, "conv", p.tape().constant(x), n, min_k, max_k);
    });
    REQUIRE(y.shape() == Tensor::Shape{n, (max_k - min_k + 1) * filters});
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t col = 0;
      for (std::size_t k = min_k; k <= max_k; ++k) {
        const Tensor& w = ps[conv_prefix("conv", k) + ".weight"];
        const Tensor& b = ps[conv_prefix("conv", k) + ".bias"];
        for (std::size_t f = 0; f < filters; ++f, ++col) {
          double best = -1e300;
          for (std::size_t start = 0; start + k <= len; ++start) {
            double s = b[f];
            for (std::size_t dk = 0; dk < k; ++dk)
              for (std::size_t j = 0; j < e; ++j) s += x.at(i * len + start + dk, j) * w.at(dk * e + j, f);
            best = std::max(best, std::max(0.0, s));
          }
          CHECK(y.at(i, col) == doctest::Approx(best).epsilon(1e-13));
        }
      }
    }
  }

  SUBCASE("constant input gives the response of any window") {
    const std::size_t len = 9;
    Tensor row = normal_tensor({1, e}, 1.0, rng);
    Tensor x({len, e});
    for (std::size_t t = 0; t < len; ++t) std::copy_n(row.data(), e, x.data() + t * e);
    Tensor full = run_forward(ps, [&](ParamBinder& p) {
      return multiscale_conv_encode(p, "conv", p.tape().constant(x), 1, min_k, max_k);
    });
    Tensor window = run_forward(ps, [&](ParamBinder& p) {
      return multiscale_conv_encode(p, "conv", p.tape().constant(x.reshaped({len, e})), 1, min_k, max_k);
    });
    Tensor shorter = run_forward(ps, [&](ParamBinder& p) {
      Tensor head({max_k, e});
      std::copy_n(x.data(), max_k * e, head.data());
      return multiscale_conv_encode(p, "conv", p.tape().constant(head), 1, min_k, max_k);
    });
    CHECK(full == window);
    for (std::size_t j = 0; j < full.size(); ++j) CHECK(full[j] == doctest::Approx(shorter[j]).epsilon(1e-15));
  }
}

TEST_CASE("backprop basics") {
  GradTape tape;
  Var x = tape.parameter("x", Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6}));
  tape.backward(ag::sum(x));
  CHECK(tape.grad(x) == Tensor({2, 3}, 1.0));

  GradTape t2;
  Var theta = t2.parameter("theta", Tensor::vector({3.0, -1.0}));
  const Tensor anchor = Tensor::vector({1.0, 0.5});
  const Var params[] = {theta};
  const Tensor* anchors[] = {&anchor};
  Var prox = ag::proximal(params, anchors, 0.02);
  CHECK(prox.value()[0] == doctest::Approx(0.01 * (4.0 + 2.25)).epsilon(1e-15));
  t2.backward(prox);
  CHECK(t2.grad(theta)[0] == 0.02 * (3.0 - 1.0));
  CHECK(t2.grad(theta)[1] == 0.02 * (-1.0 - 0.5));

  GradTape t3;
  Var y = t3.parameter("y", Tensor::vector({0.0}));
  CHECK_THROWS_AS(t3.backward(ag::log(y)), NumericError);
  GradTape t4;
  CHECK_THROWS_AS(t4.backward(t4.parameter("v", Tensor::vector({1.0, 2.0}))), ConfigError);
}

TEST_CASE("finite_difference_check examples") {
  ParamSet ps;
  ps["x"] = Tensor::vector({3.0});
  GradMap g;
  g["x"] = Tensor::vector({6.0});
  auto result = finite_difference_check([](const ParamSet& q) { return q.at("x")[0] * q.at("x")[0]; }, ps, g);
  CHECK(result.max_rel_error < 1e-9);
  g["x"] = Tensor::vector({6.1});
  result = finite_difference_check([](const ParamSet& q) { return q.at("x")[0] * q.at("x")[0]; }, ps, g);
  CHECK(result.max_rel_error == doctest::Approx(0.1 / 6.0).epsilon(1e-6));
  CHECK(result.worst_param == "x");
}

namespace {

struct PrimitiveCase {
  const char* name;
  std::function<std::pair<ParamSet, LossBuilder>(Rng&)> make;
};

std::vector<int> random_labels(std::size_t n, Rng& rng, int classes = 2) {
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.below(classes));
  return labels;
}

std::vector<PrimitiveCase> primitive_cases() {
  std::vector<PrimitiveCase> cases;
  auto add = [&](const char* name, auto make) { cases.push_back({name, make}); };

  add("elementwise arithmetic", [](Rng& rng) {
    ParamSet ps{{"a", random_tensor({3, 4}, rng)}, {"b", random_tensor({3, 4}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       Var a = p("a"), b = p("b");
                       Var y = ag::add(ag::mul(a, b), ag::scale(ag::sub(a, b), 0.7));
                       return probe(ag::add_scalar(y, 0.3), 1);
                     })};
  });
  add("unary activations", [](Rng& rng) {
    ParamSet ps{{"a", random_tensor({3, 4}, rng, 1.0)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       Var a = p("a");
                       Var y = ag::add(ag::add(ag::sigmoid(a), ag::tanh(a)), ag::add(ag::exp(a), ag::gelu(a)));
                       y = ag::add(y, ag::add(ag::relu(a), ag::log(ag::add_scalar(ag::abs(a), 0.5))));
                       return probe(y, 2);
                     })};
  });
  add("softmax and log_softmax", [](Rng& rng) {
    ParamSet ps{{"a", random_tensor({3, 5}, rng, 1.0)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       return ag::add(probe(ag::softmax(p("a")), 3), probe(ag::log_softmax(p("a")), 4));
                     })};
  });
  add("matmul family and reductions", [](Rng& rng) {
    ParamSet ps{{"a", random_tensor({3, 4}, rng)}, {"b", random_tensor({4, 2}, rng)},
                {"c", random_tensor({5, 4}, rng)}, {"r", random_tensor({3}, rng)}, {"s", random_tensor({1}, rng)},
                {"bias", random_tensor({2}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       Var y = ag::add_bias(ag::matmul(p("a"), p("b")), p("bias"));
                       Var z = ag::matmul_nt(p("a"), p("c"));
                       Var w = ag::mul_scalar(ag::mul_rows(z, p("r")), p("s"));
                       Var total = ag::add(probe(y, 5), probe(w, 6));
                       total = ag::add(total, probe(ag::row_sum(z), 7));
                       return ag::add(total, ag::mean(ag::mul(z, z)));
                     })};
  });
  add("slices and concatenation", [](Rng& rng) {
    ParamSet ps{{"a", random_tensor({4, 5}, rng)}, {"b", random_tensor({4, 2}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       const Var cols[] = {ag::slice_cols(p("a"), 1, 3), p("b")};
                       Var y = ag::concat_cols(cols);
                       const Var rows[] = {ag::slice_rows(y, 2, 2), y};
                       return probe(ag::concat_rows(rows), 8);
                     })};
  });
  add("gather and segment pooling", [](Rng& rng) {
    ParamSet ps{{"table", random_tensor({6, 3}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       const std::uint32_t ids[] = {0, 2, 2, 5, 1, 0, 3, 5};
                       Var x = ag::gather_rows(p("table"), ids);
                       return ag::add(probe(ag::segment_max(x, 2), 9), probe(ag::segment_mean(x, 4), 10));
                     })};
  });
  add("unfold windows", [](Rng& rng) {
    ParamSet ps{{"x", random_tensor({2 * 5, 3}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) { return probe(ag::unfold_windows(p("x"), 2, 3), 11); })};
  });
  add("multi-head attention", [](Rng& rng) {
    ParamSet ps{{"q", random_tensor({6, 4}, rng, 1.0)}, {"k", random_tensor({6, 4}, rng, 1.0)},
                {"v", random_tensor({6, 4}, rng, 1.0)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       return probe(ag::multi_head_attention(p("q"), p("k"), p("v"), 2, 2), 12);
                     })};
  });
  add("lstm pointwise", [](Rng& rng) {
    ParamSet ps{{"gates", random_tensor({2, 12}, rng, 1.0)}, {"c", random_tensor({2, 3}, rng, 1.0)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) { return probe(ag::lstm_pointwise(p("gates"), p("c")), 13); })};
  });
  add("masked attention pooling", [](Rng& rng) {
    ParamSet ps{{"s0", random_tensor({3, 4}, rng, 1.0)}, {"s1", random_tensor({3, 4}, rng, 1.0)},
                {"s2", random_tensor({3, 4}, rng, 1.0)}, {"score", random_tensor({4}, rng, 1.0)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       const Var steps[] = {p("s0"), p("s1"), p("s2")};
                       return probe(ag::attention_pool(steps, p("score"), {1, 1, 1, 1, 1, 0, 0, 0, 0}), 14);
                     })};
  });
  add("weight norm and row normalization", [](Rng& rng) {
    ParamSet ps{{"v", random_tensor({4, 3}, rng)}, {"g", random_tensor({3}, rng)}, {"x", random_tensor({2, 4}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       Var w = ag::weight_norm(p("v"), p("g"));
                       return probe(ag::normalize_rows(ag::matmul(p("x"), w)), 15);
                     })};
  });
  add("layer norm", [](Rng& rng) {
    ParamSet ps{{"x", random_tensor({3, 5}, rng)}, {"gamma", random_tensor({5}, rng)}, {"beta", random_tensor({5}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       return probe(ag::layer_norm(p("x"), p("gamma"), p("beta"), 1e-5), 16);
                     })};
  });
  add("affine-gelu-log_softmax-focal chain", [](Rng& rng) {
    ParamSet ps{{"x", random_tensor({4, 3}, rng, 1.0)}, {"fc.weight", random_tensor({3, 2}, rng, 1.0)},
                {"fc.bias", random_tensor({2}, rng)}};
    auto labels = random_labels(4, rng);
    return std::pair{ps, LossBuilder([labels](ParamBinder& p) {
                       Var lp = ag::log_softmax(ag::gelu(affine(p, "fc", p("x"))));
                       return ag::add(ag::focal_loss(lp, labels, 2.0), ag::focal_loss(lp, labels, 0.5));
                     })};
  });
  add("focal loss on logits", [](Rng& rng) {
    ParamSet ps{{"z", random_tensor({5, 2}, rng, 1.0)}};
    auto labels = random_labels(5, rng);
    return std::pair{ps, LossBuilder([labels](ParamBinder& p) { return ag::focal_loss(p("z"), labels, 2.0); })};
  });
  add("js divergence", [](Rng& rng) {
    ParamSet ps{{"a", random_tensor({3, 2}, rng, 1.0)}, {"b", random_tensor({3, 2}, rng, 1.0)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) { return ag::js_divergence(p("a"), p("b")); })};
  });
  add("proximal", [](Rng& rng) {
    ParamSet ps{{"w", random_tensor({3, 2}, rng)}};
    auto anchor = std::make_shared<Tensor>(random_tensor({3, 2}, rng));
    return std::pair{ps, LossBuilder([anchor](ParamBinder& p) {
                       const Var params[] = {p("w")};
                       const Tensor* anchors[] = {anchor.get()};
                       return ag::proximal(params, anchors, 0.2);
                     })};
  });
  add("dropout with a fixed mask", [](Rng& rng) {
    ParamSet ps{{"x", random_tensor({3, 4}, rng)}};
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       Rng mask_rng(99);
                       return probe(ag::dropout(p("x"), 0.3, true, mask_rng), 17);
                     })};
  });
  add("mhsa block", [](Rng& rng) {
    ParamSet ps;
    init_mhsa_block(ps, "blk", 4, 6, rng);
    ps["x"] = random_tensor({2 * 3, 4}, rng, 1.0);
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       Rng drop(5);
                       return probe(mhsa_block(p, "blk", p("x"), BlockShape{2, 2, 0.2}, true, drop), 18);
                     })};
  });
  add("bidirectional lstm", [](Rng& rng) {
    ParamSet ps;
    init_lstm(ps, "lstm", 3, 2, rng);
    ps["x"] = random_tensor({4 * 2, 3}, rng, 1.0);
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       std::vector<Var> steps = bilstm(p, "lstm", p("x"), 4);
                       return probe(ag::concat_rows(steps), 19);
                     })};
  });
  add("multiscale conv", [](Rng& rng) {
    ParamSet ps;
    for (std::size_t k = 2; k <= 4; ++k) {
      ps[conv_prefix("conv", k) + ".weight"] = random_tensor({k * 2, 2}, rng);
      ps[conv_prefix("conv", k) + ".bias"] = random_tensor({2}, rng);
    }
    ps["x"] = random_tensor({2 * 6, 2}, rng, 1.0);
    return std::pair{ps, LossBuilder([](ParamBinder& p) {
                       return probe(multiscale_conv_encode(p, "conv", p("x"), 2, 2, 4), 20);
                     })};
  });
  return cases;
}

}  // namespace

TEST_CASE("every primitive passes finite differences on 20 seeds") {
  for (const auto& c : primitive_cases()) {
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Rng rng(derive_seed(1234, seed));
      auto [ps, build] = c.make(rng);
      const auto result = check_gradients(build, ps);
      worst = std::max(worst, result.max_rel_error);
      INFO(std::string(c.name) << " seed " << seed << " param " << result.worst_param << "[" << result.worst_index
                  << "] analytic " << result.worst_analytic << " numeric " << result.worst_numeric);
      CHECK(result.max_rel_error < 1e-4);
    }
    MESSAGE(std::string(c.name) << ": worst relative error " << worst);
  }
}

TEST_CASE("clip_global_norm") {
  GradMap g{{"a", Tensor::vector({3.0, 0.0})}, {"b", Tensor::vector({4.0})}};
  CHECK(clip_global_norm(g, 2.5) == doctest::Approx(5.0));
  CHECK(g["a"][0] == doctest::Approx(1.5));
  CHECK(g["b"][0] == doctest::Approx(2.0));

  GradMap small{{"a", Tensor::vector({0.3, 0.4})}};
  const GradMap before = small;
  clip_global_norm(small, 1.0);
  CHECK(small == before);

  GradMap zero{{"a", Tensor({3})}};
  clip_global_norm(zero, 1.0);
  CHECK(zero["a"] == Tensor({3}));

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    GradMap r{{"a", normal_tensor({5}, 3.0, rng)}, {"b", normal_tensor({2, 2}, 3.0, rng)}};
    clip_global_norm(r, 1.0);
    CHECK(global_norm(r) <= 1.0 + 1e-15);
    GradMap again = r;
    clip_global_norm(again, 1.0);
    CHECK(again == r);
  }
  CHECK_THROWS_AS(clip_global_norm(g, 0.0), ConfigError);
}

TEST_CASE("adam step") {
  ParamSet params{{"w", Tensor::vector({1.0, -2.0, 0.5})}};
  Optimizer zero_opt({});
  zero_opt.step(params, GradMap{{"w", Tensor({3})}});
  CHECK(params["w"] == Tensor::vector({1.0, -2.0, 0.5}));
  CHECK(zero_opt.steps() == 1);

  // First step: m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
  ParamSet p1{{"w", Tensor::vector({1.0, -2.0, 0.5})}};
  Optimizer opt({});
  const Tensor g = Tensor::vector({0.3, -4.0, 1e-3});
  opt.step(p1, GradMap{{"w", g}});
  for (std::size_t i = 0; i < 3; ++i) {
    const double expect = params["w"][i] - 1e-3 * g[i] / (std::fabs(g[i]) + 1e-8);
    CHECK(p1["w"][i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(opt.state().at("w").steps == 1);

  ParamSet p2{{"w", Tensor::vector({1.0, -2.0, 0.5})}};
  Optimizer opt2({});
  opt2.step(p2, GradMap{{"w", g}});
  CHECK(p1 == p2);
  opt.step(p1, GradMap{{"w", g}});
  CHECK(opt.steps() == 2);

  ParamSet sgd_params{{"w", Tensor::vector({1.0})}};
  Optimizer sgd({OptimizerKind::sgd, 0.1});
  sgd.step(sgd_params, GradMap{{"w", Tensor::vector({2.0})}});
  CHECK(sgd_params["w"][0] == doctest::Approx(0.8));
}
