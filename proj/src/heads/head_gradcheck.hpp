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
#include <string_view>

#include "heads/losses.hpp"
#include "heads/model_config.hpp"
#include "numerics/gradcheck.hpp"

namespace rolefed {

enum class HeadKind { image, html, url, fusion };

std::string_view head_name(HeadKind kind);

struct HeadCheckOptions {
  std::size_t batch = 3;
  std::size_t image_tokens = 4;
  std::size_t char_len = 32;
  std::size_t word_len = 8;
  std::size_t dom_len = 8;
  double mu = 0.02;
  double h = 1e-5;
  /// Coordinates checked per tensor (0 = all), drawn with the check seed.
  std::size_t max_coords_per_tensor = 0;
  /// Test hook: perturbs one analytic gradient coordinate before comparing.
  bool corrupt = false;
};

/// Finite-difference check of one head's full training loss on random inputs
/// at a random point near the initialization. Single-modality heads use focal + proximal; the
/// fusion head uses the paired loss (fusion focal, auxiliary branch losses,
/// JS consistency) plus the proximal term over fusion parameters.
GradCheckResult check_head_gradient(HeadKind kind, const ModelConfig& model, const LossConfig& loss,
                                    std::uint64_t seed, const HeadCheckOptions& opts = {});

}  // namespace rolefed
