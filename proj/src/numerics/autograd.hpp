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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "numerics/tensor.hpp"

namespace rolefed {

class Rng;
class GradTape;

/// Handle to a value recorded on a GradTape.
struct Var {
  GradTape* tape = nullptr;
  std::size_t id = 0;

  bool valid() const { return tape != nullptr; }
  const Tensor& value() const;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so reverse
/// insertion order is a valid topological order for backpropagation.
///
/// A tape is single-owner and is not safe to share across threads.
class GradTape {
 public:
  using BackwardFn = std::function<void(GradTape&, std::size_t self)>;

  GradTape() = default;
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  Var constant(Tensor value);
  /// Leaf that receives a gradient; `name` keys the result of parameter_grads().
  Var parameter(std::string name, Tensor value);

  /// Records an op result. `fn` runs during backward() only when at least one
  /// input requires a gradient.
  Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn fn);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Upstream gradient of a node during backward (empty if none reached it).
  const Tensor& grad(std::size_t id) const { return nodes_[id].grad; }
  const Tensor& grad(Var v) const { return nodes_[v.id].grad; }
  /// Accumulation buffer for an input's gradient, allocated to zeros on first use.
  Tensor& grad_buffer(std::size_t id);

  /// Backpropagates from a scalar loss. Throws NumericError on a non-finite loss.
  void backward(Var loss);

  /// Gradients of all named parameters that were reached by backward().
  std::map<std::string, Tensor> parameter_grads() const;
  /// Variables of all parameters registered on this tape.
  const std::map<std::string, std::size_t>& parameters() const { return params_; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::map<std::string, std::size_t> params_;
};

inline const Tensor& Var::value() const { return tape->value(*this); }

/// Differentiable primitives. Shapes follow the matrix convention of Tensor:
/// rank-1 tensors behave as a single row.
namespace ag {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
/// x[r,c] + b[c] broadcast over rows.
Var add_bias(Var x, Var b);
/// x[r,c] * s where s is a one-element variable.
Var mul_scalar(Var x, Var s);
/// x[r,c] * a[r] row-wise.
Var mul_rows(Var x, Var a);

Var matmul(Var a, Var b);
/// a[n,k] * b[m,k]^T.
Var matmul_nt(Var a, Var b);

Var sum(Var a);
Var mean(Var a);
/// Row sums: [r,c] -> [r,1].
Var row_sum(Var a);

Var relu(Var a);
Var gelu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var abs(Var a);

Var layer_norm(Var x, Var gamma, Var beta, double eps);
Var log_softmax(Var x);
Var softmax(Var x);

Var slice_cols(Var x, std::size_t start, std::size_t len);
Var slice_rows(Var x, std::size_t start, std::size_t len);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);

/// Embedding lookup: rows of table[V,e] selected by ids.
Var gather_rows(Var table, std::span<const std::uint32_t> ids);

/// Column-wise max within each of `segments` equal blocks of rows: [s*m,c] -> [s,c].
Var segment_max(Var x, std::size_t segments);
Var segment_mean(Var x, std::size_t segments);

/// Inverted dropout. Identity when !train or p == 0.
Var dropout(Var x, double p, bool train, Rng& rng);

/// Sliding windows of width k over each of `sequences` equal-length
/// sequences stacked in x[n*L, e]: returns [n*(L-k+1), k*e].
Var unfold_windows(Var x, std::size_t sequences, std::size_t k);

/// Multi-head scaled dot-product self-attention over `sequences` blocks of
/// equal length stacked in q/k/v[n*L, d].
Var multi_head_attention(Var q, Var k, Var v, std::size_t sequences, std::size_t heads);

/// LSTM pointwise update. gates[n,4h] are pre-activations in (i, f, g, o)
/// order; returns [n,2h] with h in the first half and c in the second.
Var lstm_pointwise(Var gates, Var c_prev);

/// Masked attention pooling over time steps steps[t][n,d]; mask[i*L + t]
/// marks valid positions. Fully masked rows pool to zero.
Var attention_pool(std::span<const Var> steps, Var score, const std::vector<std::uint8_t>& mask);

/// Weight normalization per output column: W[:,j] = g[j] * v[:,j] / |v[:,j]|.
Var weight_norm(Var v, Var g);

/// Rows scaled to unit L2 norm; rows with norm < 1e-12 map to zero.
Var normalize_rows(Var x);

/// Mean focal loss over rows of logits[n,C] with integer labels.
Var focal_loss(Var logits, std::span<const int> labels, double gamma);

/// Mean Jensen-Shannon divergence between softmax(a) and softmax(b), row-wise.
Var js_divergence(Var logits_a, Var logits_b);

/// mu/2 * sum ||theta - anchor||^2 over the given parameters.
Var proximal(std::span<const Var> params, std::span<const Tensor* const> anchors, double mu);

}  // namespace ag
}  // namespace rolefed
