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

#include "heads/heads.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "numerics/functions.hpp"
#include "numerics/layers.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

namespace rolefed {
namespace {

const std::string kImage(kImagePrefix);
const std::string kHtml(kHtmlPrefix);
const std::string kUrl(kUrlPrefix);
const std::string kFusion(kFusionPrefix);
constexpr double kAlphaFloor = 1e-12;

void init_classifier(ParamSet& ps, const std::string& prefix, std::size_t in, const ModelConfig& cfg, Rng& rng) {
  init_layer_norm(ps, prefix + ".norm", in);
  init_affine(ps, prefix + ".fc", in, cfg.classifier_hidden, rng);
  init_affine(ps, prefix + ".out", cfg.classifier_hidden, cfg.classes, rng);
}

// LayerNorm -> FC -> GELU -> Dropout -> FC.
Var classifier(ParamBinder& p, const std::string& prefix, Var x, const ModelConfig& cfg, bool train, Rng& rng) {
  Var h = ag::gelu(affine(p, prefix + ".fc", layer_norm(p, prefix + ".norm", x)));
  return affine(p, prefix + ".out", ag::dropout(h, cfg.dropout, train, rng));
}

void init_sequence_branch(ParamSet& ps, const std::string& prefix, std::size_t rows, std::size_t embed,
                          const ModelConfig& cfg, Rng& rng) {
  init_embedding(ps, prefix + ".embed", rows, embed, rng);
  init_lstm(ps, prefix + ".lstm", embed, cfg.lstm_hidden, rng);
  const double bound = 1.0 / std::sqrt(static_cast<double>(2 * cfg.lstm_hidden));
  ps[prefix + ".pool.score"] = uniform_tensor({2 * cfg.lstm_hidden}, bound, rng);
}

// Embedding -> BiLSTM -> masked attention pooling. Returns [n, 2h].
Var sequence_branch(ParamBinder& p, const std::string& prefix, std::span<const html::HtmlStreams* const> batch,
                    std::vector<std::uint32_t> html::HtmlStreams::*field, std::uint32_t pad) {
  const std::size_t n = batch.size();
  const std::size_t len = (batch[0]->*field).size();
  std::vector<std::uint32_t> ids(len * n);
  std::vector<std::uint8_t> mask(n * len);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& seq = batch[i]->*field;
    if (seq.size() != len) throw InputError("html batch: stream lengths differ within a batch");
    for (std::size_t t = 0; t < len; ++t) {
      if (seq[t] > pad) throw InputError("html batch: stream id above PAD");
      ids[t * n + i] = seq[t];
      mask[i * len + t] = seq[t] != pad;
    }
  }
  Var x = ag::gather_rows(p(prefix + ".embed"), ids);
  std::vector<Var> steps = bilstm(p, prefix + ".lstm", x, len);
  return ag::attention_pool(steps, p(prefix + ".pool.score"), mask);
}

}  // namespace

ParamSet init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ParamSet ps;
  Rng image_rng(derive_seed(seed, 1)), html_rng(derive_seed(seed, 2)), url_rng(derive_seed(seed, 3)),
      fusion_rng(derive_seed(seed, 4));
  init_image_head(ps, cfg, image_rng);
  init_html_head(ps, cfg, html_rng);
  init_url_head(ps, cfg, url_rng);
  init_fusion_head(ps, cfg, fusion_rng);
  return ps;
}

void init_image_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
  for (std::size_t b = 0; b < cfg.image_blocks; ++b) {
    init_mhsa_block(ps, kImage + "block" + std::to_string(b), cfg.embed_dim, cfg.image_ff, rng);
  }
  init_classifier(ps, kImage + "classifier", cfg.embed_dim, cfg, rng);
}

void init_html_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
  init_embedding(ps, kHtml + "char.embed", cfg.char_vocab, cfg.char_embed, rng);
  for (std::size_t k = cfg.conv_min; k <= cfg.conv_max; ++k) {
    init_affine(ps, conv_prefix(kHtml + "char.conv", k), k * cfg.char_embed, cfg.conv_filters, rng);
  }
  const std::size_t conv_width = (cfg.conv_max - cfg.conv_min + 1) * cfg.conv_filters;
  init_affine(ps, kHtml + "char.fc", conv_width, cfg.char_fc, rng);
  init_sequence_branch(ps, kHtml + "word", cfg.word_buckets + 1, cfg.word_embed, cfg, rng);
  init_sequence_branch(ps, kHtml + "dom", cfg.dom_buckets + 1, cfg.dom_embed, cfg, rng);
  init_classifier(ps, kHtml + "classifier", cfg.html_feature_width(), cfg, rng);
}

void init_url_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
  init_layer_norm(ps, kUrl + "norm", cfg.url_dim);
  Tensor direction = xavier_uniform(cfg.url_dim, cfg.url_hidden, rng);
  Tensor gain({cfg.url_hidden});
  for (std::size_t i = 0; i < cfg.url_dim; ++i)
    for (std::size_t j = 0; j < cfg.url_hidden; ++j) gain[j] += direction.at(i, j) * direction.at(i, j);
  for (double& g : gain.values()) g = std::sqrt(g);
  ps[kUrl + "fc.direction"] = std::move(direction);
  ps[kUrl + "fc.gain"] = std::move(gain);
  ps[kUrl + "fc.bias"] = Tensor({cfg.url_hidden});
  ps[kUrl + "classifier.weight"] = xavier_uniform(cfg.classes, cfg.url_hidden, rng);
  ps[kUrl + "classifier.log_scale"] = Tensor({1}, std::log(cfg.url_scale));
}

void init_fusion_head(ParamSet& ps, const ModelConfig& cfg, Rng& rng) {
  init_affine(ps, kFusion + "gate.fc1", 4, cfg.gate_hidden, rng);
  init_affine(ps, kFusion + "gate.fc2", cfg.gate_hidden, 1, rng);
  ps[kFusion + "log_temperature.image"] = Tensor({1}, 0.0);
  ps[kFusion + "log_temperature.html"] = Tensor({1}, 0.0);
}

Var image_head_forward(ParamBinder& p, const ModelConfig& cfg, std::span<const Tensor* const> tokens, bool train,
                       Rng& rng) {
  if (tokens.empty()) throw InputError("image head: empty batch");
  const std::size_t d = cfg.embed_dim;
  std::vector<Var> group_logits;
  // Consecutive runs of equal sequence length are encoded together.
  std::size_t start = 0;
  while (start < tokens.size()) {
    const std::size_t l = tokens[start]->rows();
    std::size_t end = start;
    while (end < tokens.size() && tokens[end]->rows() == l) ++end;
    if (l == 0 || tokens[start]->cols() != d) {
      throw InputError("image head: expected non-empty token sequences of width " + std::to_string(d));
    }
    const std::size_t n = end - start;
    const std::size_t seq = l + 2;
    Tensor x({n * seq, d});
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor& t = *tokens[start + i];
      if (t.cols() != d) throw InputError("image head: token width mismatch");
      double* summary_max = x.data() + (i * seq) * d;
      double* summary_second = summary_max + d;
      for (std::size_t j = 0; j < d; ++j) {
        double mx = t.at(0, j), sum = 0.0;
        for (std::size_t r = 0; r < l; ++r) {
          mx = std::max(mx, t.at(r, j));
          sum += t.at(r, j);
        }
        summary_max[j] = mx;
        summary_second[j] = cfg.summary_mean ? sum / static_cast<double>(l) : mx;
      }
      std::copy_n(t.data(), l * d, x.data() + (i * seq + 2) * d);
    }
    Var h = p.tape().constant(std::move(x));
    const BlockShape shape{n, cfg.image_heads, cfg.dropout};
    for (std::size_t b = 0; b < cfg.image_blocks; ++b) {
      h = mhsa_block(p, kImage + "block" + std::to_string(b), h, shape, train, rng);
    }
    Var pooled = ag::segment_max(h, n);
    group_logits.push_back(classifier(p, kImage + "classifier", pooled, cfg, train, rng));
    start = end;
  }
  return group_logits.size() == 1 ? group_logits[0] : ag::concat_rows(group_logits);
}

Var html_head_forward(ParamBinder& p, const ModelConfig& cfg, std::span<const html::HtmlStreams* const> streams,
                      bool train, Rng& rng) {
  if (streams.empty()) throw InputError("html head: empty batch");
  const std::size_t n = streams.size();
  const std::size_t char_len = std::max(streams[0]->char_ids.size(), cfg.conv_max);
  std::vector<std::uint32_t> chars(n * char_len, html::kCharPad);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& c = streams[i]->char_ids;
    if (c.size() != streams[0]->char_ids.size()) throw InputError("html batch: char stream lengths differ");
    for (std::size_t t = 0; t < c.size(); ++t) {
      if (c[t] > html::kCharPad) throw InputError("html batch: char id above PAD");
      chars[i * char_len + t] = c[t];
    }
  }
  Var char_x = ag::gather_rows(p(kHtml + "char.embed"), chars);
  Var conv = multiscale_conv_encode(p, kHtml + "char.conv", char_x, n, cfg.conv_min, cfg.conv_max);
  Var char_feat = ag::relu(affine(p, kHtml + "char.fc", conv));
  Var word_feat = sequence_branch(p, kHtml + "word", streams, &html::HtmlStreams::word_ids, cfg.word_buckets);
  Var dom_feat = sequence_branch(p, kHtml + "dom", streams, &html::HtmlStreams::dom_ids, cfg.dom_buckets);
  const Var parts[] = {char_feat, word_feat, dom_feat};
  return classifier(p, kHtml + "classifier", ag::concat_cols(parts), cfg, train, rng);
}

Var url_head_forward(ParamBinder& p, const ModelConfig& cfg, std::span<const Tensor* const> embeddings, bool train,
                     Rng& rng) {
  if (embeddings.empty()) throw InputError("url head: empty batch");
  const std::size_t n = embeddings.size();
  Tensor x({n, cfg.url_dim});
  for (std::size_t i = 0; i < n; ++i) {
    if (embeddings[i]->size() != cfg.url_dim) {
      throw InputError("url head: expected embedding of length " + std::to_string(cfg.url_dim));
    }
    std::copy_n(embeddings[i]->data(), cfg.url_dim, x.data() + i * cfg.url_dim);
  }
  Var h = layer_norm(p, kUrl + "norm", p.tape().constant(std::move(x)));
  Var w = ag::weight_norm(p(kUrl + "fc.direction"), p(kUrl + "fc.gain"));
  h = ag::gelu(ag::add_bias(ag::matmul(h, w), p(kUrl + "fc.bias")));
  h = ag::dropout(h, cfg.dropout, train, rng);
  Var cosine = ag::matmul_nt(ag::normalize_rows(h), ag::normalize_rows(p(kUrl + "classifier.weight")));
  return ag::mul_scalar(cosine, ag::exp(p(kUrl + "classifier.log_scale")));
}

BranchStats branch_stats(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("branch_stats: temperature must be positive");
  if (logits.size() != 2) throw ConfigError("branch_stats: expected two logits");
  const double scaled[] = {logits[0] / temperature, logits[1] / temperature};
  return {std::fabs(scaled[0] - scaled[1]), math::entropy(math::softmax(scaled))};
}

namespace {

struct CalibratedBranch {
  Var log_probs;  // [n, 2]
  Var margin;     // [n, 1]
  Var entropy;    // [n, 1]
};

CalibratedBranch calibrate(ParamBinder& p, Var logits, const std::string& temperature) {
  Var scaled = ag::mul_scalar(logits, ag::exp(ag::scale(p(temperature), -1.0)));
  Var lp = ag::log_softmax(scaled);
  Var margin = ag::abs(ag::sub(ag::slice_cols(scaled, 0, 1), ag::slice_cols(scaled, 1, 1)));
  Var entropy = ag::scale(ag::row_sum(ag::mul(ag::exp(lp), lp)), -1.0);
  return {lp, margin, entropy};
}

}  // namespace

FusionOutput fusion_forward(ParamBinder& p, const ModelConfig& cfg, std::optional<Var> image_logits,
                            std::optional<Var> html_logits) {
  (void)cfg;
  if (!image_logits && !html_logits) throw InputError("fusion: both branches absent");
  if (!html_logits) {
    CalibratedBranch b = calibrate(p, *image_logits, kFusion + "log_temperature.image");
    return {b.log_probs, std::vector<double>(image_logits->value().rows(), 1.0)};
  }
  if (!image_logits) {
    CalibratedBranch b = calibrate(p, *html_logits, kFusion + "log_temperature.html");
    return {b.log_probs, std::vector<double>(html_logits->value().rows(), 0.0)};
  }
  if (image_logits->value().shape() != html_logits->value().shape()) {
    throw InputError("fusion: branch logits differ in shape");
  }
  CalibratedBranch bi = calibrate(p, *image_logits, kFusion + "log_temperature.image");
  CalibratedBranch bh = calibrate(p, *html_logits, kFusion + "log_temperature.html");
  const Var stats[] = {bi.margin, bi.entropy, bh.margin, bh.entropy};
  Var hidden = ag::relu(affine(p, kFusion + "gate.fc1", ag::concat_cols(stats)));
  // Squeezed into [kAlphaFloor, 1 - kAlphaFloor] so alpha stays strictly inside
  // (0, 1) where the sigmoid saturates in double precision.
  Var gate = ag::sigmoid(affine(p, kFusion + "gate.fc2", hidden));
  Var alpha = ag::add_scalar(ag::scale(gate, 1.0 - 2.0 * kAlphaFloor), kAlphaFloor);
  const auto av = alpha.value().values();
  std::vector<double> alpha_values(av.begin(), av.end());
  Var combined = ag::add(ag::mul_rows(bi.log_probs, alpha),
                         ag::mul_rows(bh.log_probs, ag::add_scalar(ag::scale(alpha, -1.0), 1.0)));
  return {ag::log_softmax(combined), std::move(alpha_values)};
}

}  // namespace rolefed
