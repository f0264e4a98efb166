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

#include <map>
#include <string>

#include "numerics/autograd.hpp"
#include "numerics/tensor.hpp"

namespace rolefed {

/// Named parameter tensors, iterated in sorted name order.
using ParamSet = std::map<std::string, Tensor>;
using GradMap = std::map<std::string, Tensor>;

bool params_finite(const ParamSet& params);
double global_norm(const GradMap& grads);
/// Euclidean distance between two name-aligned parameter sets.
double param_distance(const ParamSet& a, const ParamSet& b);

/// Binds ParamSet entries onto a tape on first use. Trainable binders
/// register gradient-carrying leaves; otherwise values enter as constants.
class ParamBinder {
 public:
  ParamBinder(GradTape& tape, const ParamSet& params, bool trainable = true)
      : tape_(tape), params_(params), trainable_(trainable) {}

  Var operator()(const std::string& name);
  GradTape& tape() { return tape_; }
  const ParamSet& params() const { return params_; }
  bool trainable() const { return trainable_; }

 private:
  GradTape& tape_;
  const ParamSet& params_;
  bool trainable_;
  std::map<std::string, Var> bound_;
};

}  // namespace rolefed
