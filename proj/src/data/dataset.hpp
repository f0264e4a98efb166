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
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "html/preproc.hpp"
#include "numerics/tensor.hpp"

namespace rolefed::data {

enum class Modality { image, html, url };

std::string_view modality_name(Modality m);
/// Throws ConfigError for anything but "image", "html" or "url".
Modality parse_modality(std::string_view name);

/// One labeled single-modality sample. Image samples hold token embeddings
/// [L, d], URL samples an embedding [d], HTML samples the three index streams.
struct Sample {
  int label = 0;  // 0 benign, 1 phishing
  Modality modality = Modality::url;
  Tensor features;
  html::HtmlStreams streams;
};

/// An image payload and an HTML payload of the same page.
struct PairedSample {
  Sample image;
  Sample html;
  int label = 0;
};

/// Loaders of one side (train or test) of a client.
struct ModalData {
  std::vector<Sample> image;
  std::vector<Sample> html;
  std::vector<Sample> url;
  std::vector<PairedSample> pairs;

  bool empty() const { return image.empty() && html.empty() && url.empty() && pairs.empty(); }
  std::vector<Sample>& of(Modality m);
  const std::vector<Sample>& of(Modality m) const;
};

struct ClientData {
  std::string id;
  ModalData train;
  ModalData test;
};

/// Reads JSON Lines records carrying `label` and one of `html`, `embedding`
/// or `tokens`. HTML is preprocessed with `preproc`; embeddings must have
/// width `dim`. Errors name the 1-based line number.
std::vector<Sample> load_jsonl(const std::string& path, Modality modality, std::size_t dim,
                               const html::PreprocConfig& preproc);

/// Reads binary HTML stream records (see html::write_record).
std::vector<Sample> load_stream_records(const std::string& path, const html::PreprocConfig& preproc);
void write_stream_records(const std::string& path, std::span<const Sample> samples,
                          const html::PreprocConfig& preproc);

/// Positional pairing; throws InputError naming the first index whose labels
/// differ, or when the counts differ.
std::vector<PairedSample> pair_samples(std::span<const Sample> images, std::span<const Sample> pages);

/// Split of one sample pool. `test_begin`/`test_end` index the pool after the
/// shuffle; train demands are dealt in order from the remaining positions and
/// test demands from the test range.
struct PartitionSpec {
  std::vector<std::size_t> train_counts;
  std::vector<std::size_t> test_counts;
  std::size_t test_begin = 0;
  std::size_t test_end = 0;
  std::uint64_t seed = 42;
  bool preshuffled = false;
};

struct PartitionResult {
  std::vector<std::vector<std::size_t>> train;  // pool indices per demand
  std::vector<std::vector<std::size_t>> test;
};

/// Throws InputError naming the shortfall when a demand cannot be met.
PartitionResult partition(std::size_t pool_size, const PartitionSpec& spec);

template <typename T>
std::vector<T> take(std::span<const T> pool, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(pool[i]);
  return out;
}

/// Unit direction shared by all embedding generators of a given width.
Tensor synth_direction(std::size_t dim);

/// Two unit-covariance Gaussian clusters at +-(separation/2) u with balanced,
/// shuffled labels (label 1 on the + side). tokens == 0 yields URL samples
/// [dim]; otherwise image samples of `tokens` independent draws [tokens, dim].
std::vector<Sample> synth_embeddings(std::size_t n, std::size_t dim, double separation, std::uint64_t seed,
                                     std::size_t tokens = 0);

/// Words that only appear on generated phishing pages, and only on benign ones.
std::span<const std::string_view> phishing_vocabulary();
std::span<const std::string_view> benign_vocabulary();

/// Template HTML page. `signal` is the probability that a content word comes
/// from the label's vocabulary rather than the shared filler; phishing pages
/// with signal > 0 also carry a form/input/iframe burst.
std::string synth_page(int label, double signal, std::uint64_t seed);

/// Balanced, shuffled preprocessed pages.
std::vector<Sample> synth_html(std::size_t n, std::uint64_t seed, const html::PreprocConfig& preproc,
                               double signal = 0.3);

/// Pairs in which, per sample, a fair coin picks the informative modality:
/// that payload is drawn with the label signal, the other carries none. Each
/// branch alone is then right on about 3/4 of the samples, both together on
/// nearly all.
std::vector<PairedSample> synth_complementary_pairs(std::size_t n, std::size_t dim, std::size_t tokens,
                                                    double separation, std::uint64_t seed,
                                                    const html::PreprocConfig& preproc);

/// Pairs in which both payloads carry the label signal.
std::vector<PairedSample> synth_joint_pairs(std::size_t n, std::size_t dim, std::size_t tokens, double separation,
                                            double signal, std::uint64_t seed, const html::PreprocConfig& preproc);

}  // namespace rolefed::data
