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

#include "numerics/layers.hpp"

#include <cmath>

#include "util/errors.hpp"
#include "util/rng.hpp"

namespace rolefed {

void init_affine(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng) {
  ps[prefix + ".weight"] = xavier_uniform(in, out, rng);
  ps[prefix + ".bias"] = Tensor({out});
}

void init_layer_norm(ParamSet& ps, const std::string& prefix, std::size_t width) {
  ps[prefix + ".gamma"] = Tensor({width}, 1.0);
  ps[prefix + ".beta"] = Tensor({width});
}

void init_embedding(ParamSet& ps, const std::string& name, std::size_t rows, std::size_t width, Rng& rng) {
  ps[name] = normal_tensor({rows, width}, 0.02, rng);
}

void init_mhsa_block(ParamSet& ps, const std::string& prefix, std::size_t width, std::size_t ff, Rng& rng) {
  init_layer_norm(ps, prefix + ".norm1", width);
  init_affine(ps, prefix + ".attn.q", width, width, rng);
  // No key bias: it shifts every score in a row equally and has no gradient.
  ps[prefix + ".attn.k.weight"] = xavier_uniform(width, width, rng);
  init_affine(ps, prefix + ".attn.v", width, width, rng);
  init_affine(ps, prefix + ".attn.out", width, width, rng);
  init_layer_norm(ps, prefix + ".norm2", width);
  init_affine(ps, prefix + ".ff1", width, ff, rng);
  init_affine(ps, prefix + ".ff2", ff, width, rng);
}

void init_lstm(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (const char* dir : {".fwd", ".bwd"}) {
    const std::string p = prefix + dir;
    ps[p + ".w_input"] = uniform_tensor({in, 4 * hidden}, bound, rng);
    ps[p + ".w_hidden"] = uniform_tensor({hidden, 4 * hidden}, bound, rng);
    ps[p + ".bias"] = uniform_tensor({4 * hidden}, bound, rng);
  }
}

Var affine(ParamBinder& p, const std::string& prefix, Var x) {
  return ag::add_bias(ag::matmul(x, p(prefix + ".weight")), p(prefix + ".bias"));
}

Var layer_norm(ParamBinder& p, const std::string& prefix, Var x, double eps) {
  return ag::layer_norm(x, p(prefix + ".gamma"), p(prefix + ".beta"), eps);
}

Var mhsa_block(ParamBinder& p, const std::string& prefix, Var x, const BlockShape& shape, bool train, Rng& rng) {
  Var h = layer_norm(p, prefix + ".norm1", x);
  Var q = affine(p, prefix + ".attn.q", h);
  Var k = ag::matmul(h, p(prefix + ".attn.k.weight"));
  Var v = affine(p, prefix + ".attn.v", h);
  Var att = ag::multi_head_attention(q, k, v, shape.sequences, shape.heads);
  Var o = affine(p, prefix + ".attn.out", att);
  x = ag::add(x, ag::dropout(o, shape.dropout, train, rng));
  Var h2 = layer_norm(p, prefix + ".norm2", x);
  Var f = affine(p, prefix + ".ff2", ag::gelu(affine(p, prefix + ".ff1", h2)));
  return ag::add(x, ag::dropout(f, shape.dropout, train, rng));
}

std::pair<Var, Var> lstm_cell_step(ParamBinder& p, const std::string& prefix, Var x_proj, Var h_prev, Var c_prev) {
  Var gates = ag::add(x_proj, ag::matmul(h_prev, p(prefix + ".w_hidden")));
  Var packed = ag::lstm_pointwise(gates, c_prev);
  const std::size_t h = c_prev.value().cols();
  return {ag::slice_cols(packed, 0, h), ag::slice_cols(packed, h, h)};
}

std::vector<Var> bilstm(ParamBinder& p, const std::string& prefix, Var x, std::size_t steps) {
  const std::size_t rows = x.value().rows();
  if (steps == 0 || rows % steps != 0) throw ConfigError("bilstm: rows not divisible by step count");
  const std::size_t n = rows / steps;
  GradTape& tape = p.tape();
  std::vector<Var> fwd(steps), bwd(steps);
  for (const bool forward : {true, false}) {
    const std::string dir = prefix + (forward ? ".fwd" : ".bwd");
    const std::size_t hidden = p.params().at(dir + ".w_hidden").rows();
    Var proj = ag::add_bias(ag::matmul(x, p(dir + ".w_input")), p(dir + ".bias"));
    Var h = tape.constant(Tensor({n, hidden}));
    Var c = tape.constant(Tensor({n, hidden}));
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t t = forward ? s : steps - 1 - s;
      std::tie(h, c) = lstm_cell_step(p, dir, ag::slice_rows(proj, t * n, n), h, c);
      (forward ? fwd : bwd)[t] = h;
    }
  }
  std::vector<Var> out(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Var parts[] = {fwd[t], bwd[t]};
    out[t] = ag::concat_cols(parts);
  }
  return out;
}

std::string conv_prefix(const std::string& prefix, std::size_t kernel) {
  return prefix + ".k" + std::to_string(kernel);
}

Var multiscale_conv_encode(ParamBinder& p, const std::string& prefix, Var x, std::size_t sequences,
                           std::size_t min_kernel, std::size_t max_kernel) {
  std::vector<Var> pooled;
  for (std::size_t k = min_kernel; k <= max_kernel; ++k) {
    Var windows = ag::unfold_windows(x, sequences, k);
    Var response = ag::relu(affine(p, conv_prefix(prefix, k), windows));
    pooled.push_back(ag::segment_max(response, sequences));
  }
  return ag::concat_cols(pooled);
}

}  // namespace rolefed
