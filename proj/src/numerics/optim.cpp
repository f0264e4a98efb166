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

#include "numerics/optim.hpp"

#include <cmath>
#include <limits>

#include "util/errors.hpp"

namespace rolefed {

double clip_global_norm(GradMap& grads, double tau) {
  if (!(tau > 0.0)) throw ConfigError("clip threshold must be positive");
  const double norm = global_norm(grads);
  // A norm within a few ulps of tau counts as already clipped, so that
  // clipping twice equals clipping once.
  if (norm > tau * (1.0 + 8.0 * std::numeric_limits<double>::epsilon())) {
    const double factor = tau / norm;
    for (auto& [name, g] : grads) {
      for (double& v : g.values()) v *= factor;
    }
  }
  return norm;
}

void Optimizer::step(ParamSet& params, const GradMap& grads) {
  ++steps_;
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ConfigError("optimizer: gradient for unknown parameter " + name);
    Tensor& p = it->second;
    if (p.shape() != g.shape()) throw ConfigError("optimizer: gradient shape mismatch for " + name);
    if (cfg_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= cfg_.lr * g[i];
      continue;
    }
    Moments& m = state_[name];
    if (m.first.empty()) {
      m.first = Tensor::zeros_like(p);
      m.second = Tensor::zeros_like(p);
    }
    ++m.steps;
    const double t = static_cast<double>(m.steps);
    const double c1 = 1.0 - std::pow(cfg_.beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.beta2, t);
    for (std::size_t i = 0; i < p.size(); ++i) {
      m.first[i] = cfg_.beta1 * m.first[i] + (1.0 - cfg_.beta1) * g[i];
      m.second[i] = cfg_.beta2 * m.second[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double mhat = m.first[i] / c1;
      const double vhat = m.second[i] / c2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace rolefed
