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
#include <string>
#include <vector>

#include "numerics/autograd.hpp"
#include "numerics/param_set.hpp"

namespace rolefed {

class Rng;

// Parameter registration. Each adds named tensors under `prefix`.
void init_affine(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t out, Rng& rng);
void init_layer_norm(ParamSet& ps, const std::string& prefix, std::size_t width);
void init_embedding(ParamSet& ps, const std::string& name, std::size_t rows, std::size_t width, Rng& rng);
void init_mhsa_block(ParamSet& ps, const std::string& prefix, std::size_t width, std::size_t ff, Rng& rng);
void init_lstm(ParamSet& ps, const std::string& prefix, std::size_t in, std::size_t hidden, Rng& rng);

/// y = xW + b with W = prefix.weight[in,out], b = prefix.bias[out].
Var affine(ParamBinder& p, const std::string& prefix, Var x);
Var layer_norm(ParamBinder& p, const std::string& prefix, Var x, double eps = 1e-5);

struct BlockShape {
  std::size_t sequences = 1;  // number of stacked sequences in the input rows
  std::size_t heads = 1;
  double dropout = 0.0;
};

/// Pre-norm transformer encoder block over x[n*L, d]:
/// x + Drop(MHA(LN(x))), then + Drop(FF(LN(.))) with a GELU feed-forward.
Var mhsa_block(ParamBinder& p, const std::string& prefix, Var x, const BlockShape& shape, bool train, Rng& rng);

/// One LSTM step. `x_proj` is x W_x + b, already projected to [n,4h].
/// Returns {h, c}.
std::pair<Var, Var> lstm_cell_step(ParamBinder& p, const std::string& prefix, Var x_proj, Var h_prev, Var c_prev);

/// Bidirectional single-layer LSTM over time-major input x[L*n, in] (row t*n+i
/// is step t of sequence i). Zero initial states. Returns per-step [n, 2h]
/// outputs (forward state then backward state).
std::vector<Var> bilstm(ParamBinder& p, const std::string& prefix, Var x, std::size_t steps);

/// Multi-scale 1-D convolution encoder over `sequences` stacked embedded
/// sequences x[n*L, e]: per kernel size, convolution + ReLU + global max pool;
/// concatenated to [n, sizes * filters].
Var multiscale_conv_encode(ParamBinder& p, const std::string& prefix, Var x, std::size_t sequences,
                           std::size_t min_kernel, std::size_t max_kernel);

std::string conv_prefix(const std::string& prefix, std::size_t kernel);

}  // namespace rolefed
