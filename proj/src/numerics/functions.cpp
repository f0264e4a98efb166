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

#include "numerics/functions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "util/errors.hpp"

namespace rolefed::math {

double gelu(double x) { return x * 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double logsumexp(std::span<const double> z) {
  if (z.empty()) throw ConfigError("logsumexp of an empty vector");
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - mx);
  return mx + std::log(s);
}

std::vector<double> log_softmax(std::span<const double> z) {
  const double lse = logsumexp(z);
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v -= lse;
  return out;
}

std::vector<double> softmax(std::span<const double> z) {
  std::vector<double> out = log_softmax(z);
  for (double& v : out) v = std::exp(v);
  return out;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("kl_divergence: size mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ConfigError("js_divergence: size mismatch");
  std::vector<double> m(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
  return 0.5 * (kl_divergence(p, m) + kl_divergence(q, m));
}

}  // namespace rolefed::math
