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

#include "numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "util/rng.hpp"

namespace rolefed {

GradCheckResult finite_difference_check(const std::function<double(const ParamSet&)>& loss, const ParamSet& params,
                                        const GradMap& analytic, double h, std::size_t max_coords_per_tensor,
                                        std::uint64_t seed) {
  GradCheckResult result;
  ParamSet probe = params;
  Rng rng(seed);
  for (const auto& [name, value] : params) {
    std::vector<std::size_t> coords(value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (max_coords_per_tensor > 0 && coords.size() > max_coords_per_tensor) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto git = analytic.find(name);
    Tensor& slot = probe.at(name);
    for (std::size_t i : coords) {
      const double orig = slot[i];
      slot[i] = orig + h;
      const double up = loss(probe);
      slot[i] = orig - h;
      const double down = loss(probe);
      slot[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double exact = git == analytic.end() ? 0.0 : git->second[i];
      const double err = std::fabs(exact - numeric) / std::max(1e-8, std::fabs(numeric));
      ++result.coordinates;
      if (result.coordinates == 1 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_param = name;
        result.worst_index = i;
        result.worst_analytic = exact;
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace rolefed
