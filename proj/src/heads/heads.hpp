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
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "heads/model_config.hpp"
#include "html/preproc.hpp"
#include "numerics/autograd.hpp"
#include "numerics/param_set.hpp"

namespace rolefed {

class Rng;

inline constexpr std::string_view kImagePrefix = "image_head.";
inline constexpr std::string_view kHtmlPrefix = "html_head.";
inline constexpr std::string_view kUrlPrefix = "url_head.";
inline constexpr std::string_view kFusionPrefix = "fusion_head.";

/// Freshly initialized parameters of all four heads.
ParamSet init_model(const ModelConfig& cfg, std::uint64_t seed);

void init_image_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng);
void init_html_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng);
void init_url_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng);
void init_fusion_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng);

/// Image head over a batch of token sequences tokens[i][L_i, d]. Two
/// summary tokens (elementwise max; the second is the mean when
/// cfg.summary_mean) are prepended before the encoder. Returns logits [n, 2].
Var image_head_forward(ParamBinder& p, const ModelConfig& cfg, std::span<const Tensor* const> tokens, bool train,
                       Rng& rng);

/// HTML head over a batch of three-stream inputs. Returns logits [n, 2].
Var html_head_forward(ParamBinder& p, const ModelConfig& cfg, std::span<const html::HtmlStreams* const> streams,
                      bool train, Rng& rng);

/// URL head over embeddings[i][url_dim]. Returns cosine logits [n, 2].
Var url_head_forward(ParamBinder& p, const ModelConfig& cfg, std::span<const Tensor* const> embeddings, bool train,
                     Rng& rng);

struct BranchStats {
  double margin = 0.0;
  double entropy = 0.0;
};

/// Margin and entropy (nats) of softmax(logits / temperature).
BranchStats branch_stats(std::span<const double> logits, double temperature);

struct FusionOutput {
  Var log_probs;             // [n, 2], rows normalized
  std::vector<double> alpha;  // per-row image weight
};

/// Gated fusion in log-probability space. An absent branch bypasses the gate:
/// the output is the other branch's temperature-scaled log-probabilities with
/// alpha reported as 1 (image only) or 0 (HTML only).
FusionOutput fusion_forward(ParamBinder& p, const ModelConfig& cfg, std::optional<Var> image_logits,
                            std::optional<Var> html_logits);

}  // namespace rolefed
