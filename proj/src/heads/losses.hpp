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

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "heads/heads.hpp"

namespace rolefed {

struct LossConfig {
  double gamma = 2.0;          // focal exponent
  double lambda_aux = 0.30;    // weight of the per-branch losses in the paired phase
  double lambda_js = 0.10;     // weight of the branch consistency term
  double modal_dropout = 0.20; // probability of suppressing one branch per paired batch

  void validate() const;
};

/// Branch suppressed for one paired batch.
enum class Absent { none, image, html };

/// Batch-level modality dropout from a uniform draw r: r < p/2 drops the image
/// branch, p/2 <= r < p drops the HTML branch.
Absent draw_absent(double r, double p);

/// mu/2 * sum ||theta - anchor||^2 over every parameter whose name starts with
/// `prefix`. Parameters are bound through `p`, so their gradients carry the
/// mu * (theta - anchor) contribution. Returns a constant zero when mu == 0.
Var proximal_term(ParamBinder& p, const ParamSet& anchor, std::string_view prefix, double mu);

struct PairedLoss {
  Var total;
  Var fusion;  // focal loss of the fused prediction alone
  FusionOutput fused;
};

/// L_f + lambda_aux (L_i + L_h) + lambda_js JS(p_i, p_h). The suppressed branch
/// is withheld from the fusion only; the auxiliary and JS terms always see
/// both branches. With `detach`, the fusion sees constant copies of the
/// branch logits.
PairedLoss paired_loss(ParamBinder& p, const ModelConfig& model, const LossConfig& loss, Var image_logits,
                       Var html_logits, std::span<const int> labels, Absent absent, bool detach);

}  // namespace rolefed
