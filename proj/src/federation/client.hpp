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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "data/dataset.hpp"
#include "federation/roles.hpp"
#include "heads/losses.hpp"
#include "metrics/metrics.hpp"
#include "numerics/optim.hpp"

namespace rolefed {

struct TrainConfig {
  std::size_t rounds = 100;
  std::size_t epochs = 5;
  std::size_t batch = 64;
  double lr = 1e-3;
  double mu = 0.0;
  double clip = 1.0;
  OptimizerKind optimizer = OptimizerKind::adam;
  LossConfig loss;
  bool html_weight_by_count = false;
  bool detach_branches = false;
  std::uint64_t seed = 0;
  /// Test hook: overrides the per-batch modality dropout draw.
  std::optional<Absent> force_absent;

  void validate() const;
};

/// RNG stream of one client in one round.
std::uint64_t client_stream_seed(std::uint64_t seed, const std::string& client_id, std::size_t round);

/// Local training of one client starting from `global` (which doubles as the
/// proximal anchor). Single-modality phases run first in image, html, url
/// order, then the paired phase, for each epoch. Optimizer state is fresh.
/// Throws InputError when the client has no training data and NumericError
/// on a non-finite loss or parameter.
ClientReport client_train(const ModelConfig& model, const TrainConfig& cfg, const data::ClientData& client,
                          const ParamSet& global, std::size_t round);

struct HeadEval {
  std::string head;
  double loss = 0.0;  // mean focal loss
  Confusion confusion;
  Metrics metrics;
};

/// Evaluation-mode metrics of one branch head on single-modality samples.
HeadEval evaluate_head(const ParamSet& params, const ModelConfig& model, const LossConfig& loss,
                       data::Modality modality, std::span<const data::Sample> samples, std::size_t batch = 256);

/// Fused prediction on paired samples; `absent` withholds one branch.
HeadEval evaluate_fusion(const ParamSet& params, const ModelConfig& model, const LossConfig& loss,
                         std::span<const data::PairedSample> pairs, Absent absent = Absent::none,
                         std::size_t batch = 256);

/// Fusion metrics when the client has paired test data, otherwise one entry
/// per non-empty single-modality test loader. Empty test data yields none.
std::vector<HeadEval> client_evaluate(const ParamSet& params, const ModelConfig& model, const LossConfig& loss,
                                      const data::ModalData& test);

}  // namespace rolefed
