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
#include <string>

#include "numerics/param_set.hpp"

namespace rolefed {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

/// Compares analytic gradients against central differences of `loss`:
/// max over coordinates of |analytic - fd| / max(1e-8, |fd|).
///
/// Tensors larger than `max_coords_per_tensor` (0 = no limit) are checked on
/// a seeded random subset of coordinates. Parameters absent from `analytic`
/// are treated as having zero gradient.
GradCheckResult finite_difference_check(const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
                                        const GradMap& analytic, double h = 1e-5,
                                        std::size_t max_coords_per_tensor = 0, std::uint64_t seed = 0);

}  // namespace rolefed
