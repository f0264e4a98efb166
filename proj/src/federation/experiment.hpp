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

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "federation/client.hpp"

namespace rolefed {

struct RoundLog {
  std::size_t round = 0;  // 1-based
  std::vector<EvalRecord> evals;
  std::array<std::size_t, 5> contributors{};  // clients aggregated per Role
  std::vector<std::string> warnings;
};

struct ExperimentOptions {
  std::size_t workers = 1;
  /// Called after every round with the log and the new global parameters.
  std::function<void(const RoundLog&, const ParamSet&)> on_round;
};

struct ExperimentResult {
  ParamSet params;
  std::vector<RoundLog> logs;
};

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. Each index runs
/// exactly once; callers write results into per-index slots.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Full-participation rounds of broadcast, local training, role-bucketed
/// aggregation and evaluation. A client that throws is left out of that round
/// with a warning; a round with no reports is a NumericError. Results do not
/// depend on the worker count.
ExperimentResult run_experiment(const ModelConfig& model, const TrainConfig& cfg,
                                std::span<const data::ClientData> clients, ParamSet initial,
                                const ExperimentOptions& opts = {});

std::vector<EvalRecord> flatten(std::span<const RoundLog> logs);

}  // namespace rolefed
