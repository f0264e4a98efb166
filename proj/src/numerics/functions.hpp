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

#include <span>
#include <vector>

// Tape-free reference math on plain values.
namespace rolefed::math {

/// x * Phi(x) with the exact Gaussian CDF.
double gelu(double x);
double logsumexp(std::span<const double> z);
std::vector<double> log_softmax(std::span<const double> z);
std::vector<double> softmax(std::span<const double> z);
/// Shannon entropy in nats; 0 log 0 = 0.
double entropy(std::span<const double> p);
double kl_divergence(std::span<const double> p, std::span<const double> q);
double js_divergence(std::span<const double> p, std::span<const double> q);

}  // namespace rolefed::math
