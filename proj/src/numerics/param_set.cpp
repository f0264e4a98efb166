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

#include "numerics/param_set.hpp"

#include <cmath>

#include "util/errors.hpp"

namespace rolefed {

bool params_finite(const ParamSet& params) {
  for (const auto& [name, t] : params) {
    if (!t.all_finite()) return false;
  }
  return true;
}

double global_norm(const GradMap& grads) {
  double s = 0.0;
  for (const auto& [name, g] : grads) s += g.squared_norm();
  return std::sqrt(s);
}

double param_distance(const ParamSet& a, const ParamSet& b) {
  double s = 0.0;
  for (const auto& [name, t] : a) {
    auto it = b.find(name);
    if (it == b.end() || it->second.shape() != t.shape()) {
      throw ConfigError("param_distance: parameter sets are not aligned at " + name);
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double d = t[i] - it->second[i];
      s += d * d;
    }
  }
  return std::sqrt(s);
}

Var ParamBinder::operator()(const std::string& name) {
  if (auto it = bound_.find(name); it != bound_.end()) return it->second;
  auto it = params_.find(name);
  if (it == params_.end()) throw ConfigError("missing parameter: " + name);
  Var v = trainable_ ? tape_.parameter(name, it->second) : tape_.constant(it->second);
  bound_.emplace(name, v);
  return v;
}

}  // namespace rolefed
