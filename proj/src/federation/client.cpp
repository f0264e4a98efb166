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

#include "federation/client.hpp"

#include <cmath>
#include <numeric>

#include "html/preproc.hpp"
#include "util/errors.hpp"
#include "util/rng.hpp"

namespace rolefed {

namespace {

using data::Modality;
using data::PairedSample;
using data::Sample;

std::string_view prefix_of(Modality m) {
  switch (m) {
    case Modality::image: return kImagePrefix;
    case Modality::html: return kHtmlPrefix;
    case Modality::url: return kUrlPrefix;
  }
  return kUrlPrefix;
}

Var forward_head(ParamBinder& p, const ModelConfig& model, Modality m, std::span<const Sample* const> batch,
                 bool train, Rng& rng) {
  if (m == Modality::html) {
    std::vector<const html::HtmlStreams*> streams;
    streams.reserve(batch.size());
    for (const Sample* s : batch) streams.push_back(&s->streams);
    return html_head_forward(p, model, streams, train, rng);
  }
  std::vector<const Tensor*> features;
  features.reserve(batch.size());
  for (const Sample* s : batch) features.push_back(&s->features);
  return m == Modality::image ? image_head_forward(p, model, features, train, rng)
                              : url_head_forward(p, model, features, train, rng);
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(idx));
  return idx;
}

std::vector<int> argmax_rows(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) out[r] = logits.at(r, 1) > logits.at(r, 0) ? 1 : 0;
  return out;
}

class Trainer {
 public:
  Trainer(const ModelConfig& model, const TrainConfig& cfg, const ParamSet& anchor, ParamSet& params, Rng& rng)
      : model_(model),
        cfg_(cfg),
        anchor_(anchor),
        params_(params),
        rng_(rng),
        opt_(OptimizerConfig{cfg.optimizer, cfg.lr}) {}

  void single_phase(Modality m, std::span<const Sample> samples) {
    const std::vector<std::size_t> order = shuffled_indices(samples.size(), rng_);
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch) {
      const std::size_t end = std::min(order.size(), start + cfg_.batch);
      std::vector<const Sample*> batch;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&samples[order[i]]);
        labels.push_back(samples[order[i]].label);
      }
      GradTape tape;
      ParamBinder p(tape, params_);
      Var logits = forward_head(p, model_, m, batch, true, rng_);
      Var loss = ag::add(ag::focal_loss(logits, labels, cfg_.loss.gamma),
                         proximal_term(p, anchor_, prefix_of(m), cfg_.mu));
      finish(tape, loss);
    }
  }

  void paired_phase(std::span<const PairedSample> pairs) {
    const std::vector<std::size_t> order = shuffled_indices(pairs.size(), rng_);
    for (std::size_t start = 0; start < order.size(); start += cfg_.batch) {
      const std::size_t end = std::min(order.size(), start + cfg_.batch);
      std::vector<const Sample*> images, pages;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        images.push_back(&pairs[order[i]].image);
        pages.push_back(&pairs[order[i]].html);
        labels.push_back(pairs[order[i]].label);
      }
      GradTape tape;
      ParamBinder p(tape, params_);
      Var li = forward_head(p, model_, Modality::image, images, true, rng_);
      Var lh = forward_head(p, model_, Modality::html, pages, true, rng_);
      const double r = rng_.uniform();
      const Absent absent = cfg_.force_absent ? *cfg_.force_absent : draw_absent(r, cfg_.loss.modal_dropout);
      PairedLoss pl = paired_loss(p, model_, cfg_.loss, li, lh, labels, absent, cfg_.detach_branches);
      Var loss = ag::add(pl.total, proximal_term(p, anchor_, kFusionPrefix, cfg_.mu));
      finish(tape, loss);
    }
  }

  double mean_loss() const { return batches_ == 0 ? 0.0 : loss_sum_ / static_cast<double>(batches_); }
  std::size_t batches() const { return batches_; }

 private:
  void finish(GradTape& tape, Var loss) {
    tape.backward(loss);
    GradMap grads = tape.parameter_grads();
    clip_global_norm(grads, cfg_.clip);
    opt_.step(params_, grads);
    loss_sum_ += loss.value()[0];
    ++batches_;
  }

  const ModelConfig& model_;
  const TrainConfig& cfg_;
  const ParamSet& anchor_;
  ParamSet& params_;
  Rng& rng_;
  Optimizer opt_;
  double loss_sum_ = 0.0;
  std::size_t batches_ = 0;
};

HeadEval finalize(std::string head, double loss_sum, std::size_t n, const Confusion& c) {
  HeadEval e;
  e.head = std::move(head);
  e.loss = n == 0 ? 0.0 : loss_sum / static_cast<double>(n);
  e.confusion = c;
  e.metrics = compute_metrics(c);
  return e;
}

}  // namespace

void TrainConfig::validate() const {
  if (rounds < 1) throw ConfigError("train.rounds must be >= 1");
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (batch < 1) throw ConfigError("train.batch must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be a positive finite value");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("train.mu must be >= 0");
  if (!(clip > 0.0)) throw ConfigError("train.clip must be positive");
  loss.validate();
}

std::uint64_t client_stream_seed(std::uint64_t seed, const std::string& client_id, std::size_t round) {
  return derive_seed(seed, html::fnv1a64(client_id), round);
}

ClientReport client_train(const ModelConfig& model, const TrainConfig& cfg, const data::ClientData& client,
                          const ParamSet& global, std::size_t round) {
  const data::ModalData& d = client.train;
  if (d.empty()) throw InputError("client " + client.id + " has no training data");
  ParamSet params = global;
  Rng rng(client_stream_seed(cfg.seed, client.id, round));
  Trainer trainer(model, cfg, global, params, rng);
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    for (Modality m : {Modality::image, Modality::html, Modality::url}) {
      if (!d.of(m).empty()) trainer.single_phase(m, d.of(m));
    }
    if (!d.pairs.empty()) trainer.paired_phase(d.pairs);
  }
  if (!params_finite(params)) throw NumericError("client " + client.id + ": non-finite parameters after training");

  ClientReport r;
  r.client_id = client.id;
  r.params = std::move(params);
  r.n_pair = d.pairs.size();
  r.n_image = d.image.size() + d.pairs.size();
  r.n_html = d.html.size() + d.pairs.size();
  r.n_url = d.url.size();
  r.n_total = d.image.size() + d.html.size() + d.url.size() + d.pairs.size();
  r.train_loss = trainer.mean_loss();
  r.train_batches = trainer.batches();
  return r;
}

HeadEval evaluate_head(const ParamSet& params, const ModelConfig& model, const LossConfig& loss,
                       data::Modality modality, std::span<const data::Sample> samples, std::size_t batch) {
  Rng unused(0);
  Confusion c;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t end = std::min(samples.size(), start + batch);
    std::vector<const Sample*> ptrs;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      ptrs.push_back(&samples[i]);
      labels.push_back(samples[i].label);
    }
    GradTape tape;
    ParamBinder p(tape, params, false);
    Var logits = forward_head(p, model, modality, ptrs, false, unused);
    loss_sum += ag::focal_loss(logits, labels, loss.gamma).value()[0] * static_cast<double>(labels.size());
    c += confusion(argmax_rows(logits.value()), labels);
  }
  return finalize(std::string(data::modality_name(modality)), loss_sum, samples.size(), c);
}

HeadEval evaluate_fusion(const ParamSet& params, const ModelConfig& model, const LossConfig& loss,
                         std::span<const data::PairedSample> pairs, Absent absent, std::size_t batch) {
  Rng unused(0);
  Confusion c;
  double loss_sum = 0.0;
  for (std::size_t start = 0; start < pairs.size(); start += batch) {
    const std::size_t end = std::min(pairs.size(), start + batch);
    std::vector<const Sample*> images, pages;
    std::vector<int> labels;
    for (std::size_t i = start; i < end; ++i) {
      images.push_back(&pairs[i].image);
      pages.push_back(&pairs[i].html);
      labels.push_back(pairs[i].label);
    }
    GradTape tape;
    ParamBinder p(tape, params, false);
    std::optional<Var> li, lh;
    if (absent != Absent::image) li = forward_head(p, model, Modality::image, images, false, unused);
    if (absent != Absent::html) lh = forward_head(p, model, Modality::html, pages, false, unused);
    FusionOutput fused = fusion_forward(p, model, li, lh);
    loss_sum += ag::focal_loss(fused.log_probs, labels, loss.gamma).value()[0] * static_cast<double>(labels.size());
    c += confusion(argmax_rows(fused.log_probs.value()), labels);
  }
  return finalize("fusion", loss_sum, pairs.size(), c);
}

std::vector<HeadEval> client_evaluate(const ParamSet& params, const ModelConfig& model, const LossConfig& loss,
                                      const data::ModalData& test) {
  std::vector<HeadEval> out;
  if (!test.pairs.empty()) {
    out.push_back(evaluate_fusion(params, model, loss, test.pairs));
    return out;
  }
  for (Modality m : {Modality::image, Modality::html, Modality::url}) {
    if (!test.of(m).empty()) out.push_back(evaluate_head(params, model, loss, m, test.of(m)));
  }
  return out;
}

}  // namespace rolefed
