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

#include "heads/head_gradcheck.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "util/errors.hpp"
#include "util/rng.hpp"

namespace rolefed {
namespace {

struct Inputs {
  std::vector<Tensor> image;
  std::vector<html::HtmlStreams> html;
  std::vector<Tensor> url;
  std::vector<int> labels;
};

std::vector<std::uint32_t> random_stream(std::size_t len, std::uint32_t pad, Rng& rng) {
  std::vector<std::uint32_t> ids(len, pad);
  const std::size_t used = 1 + rng.below(len);
  for (std::size_t t = 0; t < used; ++t) ids[t] = static_cast<std::uint32_t>(rng.below(pad));
  return ids;
}

Inputs random_inputs(const ModelConfig& model, const HeadCheckOptions& opts, Rng& rng) {
  Inputs in;
  for (std::size_t i = 0; i < opts.batch; ++i) {
    in.image.push_back(normal_tensor({opts.image_tokens, model.embed_dim}, 1.0, rng));
    html::HtmlStreams s;
    s.char_ids = random_stream(opts.char_len, html::kCharPad, rng);
    s.word_ids = random_stream(opts.word_len, model.word_buckets, rng);
    s.dom_ids = random_stream(opts.dom_len, model.dom_buckets, rng);
    in.html.push_back(std::move(s));
    in.url.push_back(normal_tensor({model.url_dim}, 1.0, rng));
    in.labels.push_back(static_cast<int>(i % 2));
  }
  return in;
}

template <typename T>
std::vector<const T*> pointers(const std::vector<T>& v) {
  std::vector<const T*> out;
  for (const T& x : v) out.push_back(&x);
  return out;
}

bool involved(HeadKind kind, const std::string& name) {
  switch (kind) {
    case HeadKind::image: return name.starts_with(kImagePrefix);
    case HeadKind::html: return name.starts_with(kHtmlPrefix);
    case HeadKind::url: return name.starts_with(kUrlPrefix);
    case HeadKind::fusion: return !name.starts_with(kUrlPrefix);
  }
  return false;
}

}  // namespace

std::string_view head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::image: return "image";
    case HeadKind::html: return "html";
    case HeadKind::url: return "url";
    case HeadKind::fusion: return "fusion";
  }
  return "unknown";
}

GradCheckResult check_head_gradient(HeadKind kind, const ModelConfig& model, const LossConfig& loss,
                                    std::uint64_t seed, const HeadCheckOptions& opts) {
  model.validate();
  loss.validate();
  Rng rng(derive_seed(seed, 0x6772616463686b));
  // Only the heads the loss touches are checked. The check point is the
  // initialization moved by N(0, 0.1), away from the near-uniform attention
  // and tiny embeddings of a fresh init; the anchor sits N(0, 0.01) away so
  // the proximal term stays small next to the loss.
  ParamSet params;
  ParamSet anchor;
  for (auto& [name, t] : init_model(model, seed)) {
    if (!involved(kind, name)) continue;
    Tensor point = normal_tensor(t.shape(), 0.1, rng);
    Tensor offset = normal_tensor(t.shape(), 0.01, rng);
    for (std::size_t i = 0; i < t.size(); ++i) {
      point[i] += t[i];
      offset[i] += point[i];
    }
    params.emplace(name, std::move(point));
    anchor.emplace(name, std::move(offset));
  }
  const Inputs in = random_inputs(model, opts, rng);
  const auto image_ptrs = pointers(in.image);
  const auto html_ptrs = pointers(in.html);
  const auto url_ptrs = pointers(in.url);
  const std::uint64_t dropout_seed = derive_seed(seed, 7);

  auto build = [&](ParamBinder& p) -> Var {
    Rng drop(dropout_seed);
    switch (kind) {
      case HeadKind::image:
        return ag::add(ag::focal_loss(image_head_forward(p, model, image_ptrs, true, drop), in.labels, loss.gamma),
                       proximal_term(p, anchor, kImagePrefix, opts.mu));
      case HeadKind::html:
        return ag::add(ag::focal_loss(html_head_forward(p, model, html_ptrs, true, drop), in.labels, loss.gamma),
                       proximal_term(p, anchor, kHtmlPrefix, opts.mu));
      case HeadKind::url:
        return ag::add(ag::focal_loss(url_head_forward(p, model, url_ptrs, true, drop), in.labels, loss.gamma),
                       proximal_term(p, anchor, kUrlPrefix, opts.mu));
      case HeadKind::fusion: {
        Var li = image_head_forward(p, model, image_ptrs, true, drop);
        Var lh = html_head_forward(p, model, html_ptrs, true, drop);
        PairedLoss pl = paired_loss(p, model, loss, li, lh, in.labels, Absent::none, false);
        return ag::add(pl.total, proximal_term(p, anchor, kFusionPrefix, opts.mu));
      }
    }
    throw ConfigError("unknown head");
  };

  GradMap grads;
  {
    GradTape tape;
    ParamBinder binder(tape, params);
    tape.backward(build(binder));
    grads = tape.parameter_grads();
  }
  if (opts.corrupt) {
    // First tensor the checker compares in full, so the perturbed coordinate is always probed.
    for (auto& [name, g] : grads) {
      if (g.empty() || (opts.max_coords_per_tensor > 0 && g.size() > opts.max_coords_per_tensor)) continue;
      g[0] += 0.1 * (std::fabs(g[0]) + 1e-3);
      break;
    }
  }
  auto value = [&](const ParamSet& q) {
    GradTape tape;
    ParamBinder binder(tape, q, false);
    return build(binder).value()[0];
  };
  return finite_difference_check(value, params, grads, opts.h, opts.max_coords_per_tensor, seed);
}

}  // namespace rolefed
