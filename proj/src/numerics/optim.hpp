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

#include <cstdint>
#include <map>
#include <string>

#include "numerics/param_set.hpp"

namespace rolefed {

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Scales all gradients by tau/g when their global L2 norm g exceeds tau.
/// Returns the norm before clipping.
double clip_global_norm(GradMap& grads, double tau);

/// Adaptive moment estimation (or plain SGD) over named parameters.
/// Only parameters present in the gradient map are updated on a step.
class Optimizer {
 public:
  struct Moments {
    Tensor first;
    Tensor second;
    std::uint64_t steps = 0;
  };

  explicit Optimizer(OptimizerConfig cfg) : cfg_(cfg) {}

  void step(ParamSet& params, const GradMap& grads);

  std::uint64_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return cfg_; }
  const std::map<std::string, Moments>& state() const { return state_; }

 private:
  OptimizerConfig cfg_;
  std::uint64_t steps_ = 0;
  std::map<std::string, Moments> state_;
};

}  // namespace rolefed
