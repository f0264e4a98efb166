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

#include "heads/losses.hpp"

#include <cmath>
#include <string>

#include "util/errors.hpp"

namespace rolefed {

void LossConfig::validate() const {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("loss.gamma must be a finite value >= 0");
  if (!(lambda_aux >= 0.0) || !std::isfinite(lambda_aux)) throw ConfigError("loss.lambda_aux must be >= 0");
  if (!(lambda_js >= 0.0) || !std::isfinite(lambda_js)) throw ConfigError("loss.lambda_js must be >= 0");
  if (!(modal_dropout >= 0.0 && modal_dropout < 1.0)) throw ConfigError("loss.modal_dropout must be in [0, 1)");
}

Absent draw_absent(double r, double p) {
  if (r < p / 2.0) return Absent::image;
  if (r < p) return Absent::html;
  return Absent::none;
}

Var proximal_term(ParamBinder& p, const ParamSet& anchor, std::string_view prefix, double mu) {
  if (mu < 0.0) throw ConfigError("proximal: mu must be >= 0");
  if (mu == 0.0) return p.tape().constant(Tensor::scalar(0.0));
  std::vector<Var> params;
  std::vector<const Tensor*> anchors;
  for (const auto& [name, value] : p.params()) {
    if (!name.starts_with(prefix)) continue;
    auto it = anchor.find(name);
    if (it == anchor.end()) throw ConfigError("proximal: snapshot is missing parameter " + name);
    if (it->second.shape() != value.shape()) throw ConfigError("proximal: shape mismatch for " + name);
    params.push_back(p(name));
    anchors.push_back(&it->second);
  }
  if (params.empty()) return p.tape().constant(Tensor::scalar(0.0));
  return ag::proximal(params, anchors, mu);
}

PairedLoss paired_loss(ParamBinder& p, const ModelConfig& model, const LossConfig& loss, Var image_logits,
                       Var html_logits, std::span<const int> labels, Absent absent, bool detach) {
  Var fusion_image = detach ? p.tape().constant(image_logits.value()) : image_logits;
  Var fusion_html = detach ? p.tape().constant(html_logits.value()) : html_logits;
  std::optional<Var> in_image, in_html;
  if (absent != Absent::image) in_image = fusion_image;
  if (absent != Absent::html) in_html = fusion_html;
  FusionOutput fused = fusion_forward(p, model, in_image, in_html);

  Var fusion_loss = ag::focal_loss(fused.log_probs, labels, loss.gamma);
  Var total = fusion_loss;
  if (loss.lambda_aux > 0.0) {
    Var aux = ag::add(ag::focal_loss(image_logits, labels, loss.gamma),
                      ag::focal_loss(html_logits, labels, loss.gamma));
    total = ag::add(total, ag::scale(aux, loss.lambda_aux));
  }
  if (loss.lambda_js > 0.0) {
    total = ag::add(total, ag::scale(ag::js_divergence(image_logits, html_logits), loss.lambda_js));
  }
  return {total, fusion_loss, std::move(fused)};
}

}  // namespace rolefed
