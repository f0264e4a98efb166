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

#include "data/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "util/errors.hpp"
#include "util/rng.hpp"

namespace rolefed::data {

namespace {

using nlohmann::json;

constexpr std::uint64_t kDirectionSeed = 0x726f6c6566656421ULL;

std::string where(const std::string& path, std::size_t line) { return path + ":" + std::to_string(line) + ": "; }

Tensor read_vector(const json& j, std::size_t dim, const std::string& ctx) {
  if (!j.is_array()) throw InputError(ctx + "embedding must be an array");
  if (j.size() != dim) {
    throw InputError(ctx + "embedding has length " + std::to_string(j.size()) + ", expected " + std::to_string(dim));
  }
  std::vector<double> v(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (!j[i].is_number()) throw InputError(ctx + "embedding values must be numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw InputError(ctx + "embedding values must be finite");
  }
  return Tensor({dim}, std::move(v));
}

std::vector<int> balanced_labels(std::size_t n, Rng& rng) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  rng.shuffle(std::span<int>(labels));
  return labels;
}

Tensor cluster_draw(std::size_t rows, const Tensor& u, double offset, Rng& rng) {
  const std::size_t dim = u.size();
  Tensor t = rows == 0 ? Tensor({dim}) : Tensor({rows, dim});
  const std::size_t r = std::max<std::size_t>(rows, 1);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t k = 0; k < dim; ++k) t[i * dim + k] = offset * u[k] + rng.normal();
  return t;
}

constexpr std::array<std::string_view, 16> kPhishingWords = {
    "verify",  "account", "suspended", "password", "login", "confirm", "billing", "urgent",
    "unlock",  "wallet",  "invoice",   "signin",   "reactivate", "credentials", "expired", "limited"};
constexpr std::array<std::string_view, 16> kBenignWords = {
    "recipe",  "garden",  "weather", "museum", "football", "concert", "library", "travel",
    "history", "poetry",  "bicycle", "forest", "chess",    "cooking", "gallery", "science"};
constexpr std::array<std::string_view, 20> kFillerWords = {
    "the",  "page",    "home", "contact", "about", "news",  "more",  "info",  "service", "online",
    "help", "welcome", "team", "today",   "our",   "terms", "check", "latest", "world",  "new"};
constexpr std::array<std::string_view, 8> kFillerTags = {"div", "p", "span", "a", "ul", "li", "h2", "section"};

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& words, Rng& rng) {
  return words[rng.below(N)];
}

}  // namespace

std::string_view modality_name(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::html: return "html";
    case Modality::url: return "url";
  }
  return "url";
}

Modality parse_modality(std::string_view name) {
  if (name == "image") return Modality::image;
  if (name == "html") return Modality::html;
  if (name == "url") return Modality::url;
  throw ConfigError("unknown modality '" + std::string(name) + "' (expected image, html or url)");
}

std::vector<Sample>& ModalData::of(Modality m) {
  return m == Modality::image ? image : m == Modality::html ? html : url;
}

const std::vector<Sample>& ModalData::of(Modality m) const {
  return m == Modality::image ? image : m == Modality::html ? html : url;
}

std::vector<Sample> load_jsonl(const std::string& path, Modality modality, std::size_t dim,
                               const html::PreprocConfig& preproc) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Sample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string ctx = where(path, line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw InputError(ctx + "malformed JSON: " + e.what());
    }
    if (!j.is_object()) throw InputError(ctx + "record must be a JSON object");
    if (!j.contains("label") || !j["label"].is_number_integer()) throw InputError(ctx + "missing integer label");
    Sample s;
    s.modality = modality;
    s.label = j["label"].get<int>();
    if (s.label != 0 && s.label != 1) throw InputError(ctx + "label must be 0 or 1");
    switch (modality) {
      case Modality::html:
        if (!j.contains("html") || !j["html"].is_string()) throw InputError(ctx + "missing string field html");
        s.streams = html::preprocess(j["html"].get<std::string>(), preproc);
        break;
      case Modality::url:
        if (!j.contains("embedding")) throw InputError(ctx + "missing field embedding");
        s.features = read_vector(j["embedding"], dim, ctx);
        break;
      case Modality::image:
        if (j.contains("tokens")) {
          const json& t = j["tokens"];
          if (!t.is_array() || t.empty()) throw InputError(ctx + "tokens must be a non-empty array of embeddings");
          Tensor tokens({t.size(), dim});
          for (std::size_t r = 0; r < t.size(); ++r) {
            const Tensor row = read_vector(t[r], dim, ctx);
            std::copy(row.values().begin(), row.values().end(), tokens.values().begin() + r * dim);
          }
          s.features = std::move(tokens);
        } else if (j.contains("embedding")) {
          s.features = read_vector(j["embedding"], dim, ctx).reshaped({1, dim});
        } else {
          throw InputError(ctx + "missing field tokens");
        }
        break;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_stream_records(const std::string& path, const html::PreprocConfig& preproc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::vector<Sample> out;
  Sample s;
  s.modality = Modality::html;
  while (html::read_record(in, s.label, s.streams, preproc)) {
    if (!html::streams_valid(s.streams, preproc)) {
      throw InputError(path + ": record " + std::to_string(out.size()) + " violates the stream invariants");
    }
    out.push_back(s);
  }
  return out;
}

void write_stream_records(const std::string& path, std::span<const Sample> samples,
                          const html::PreprocConfig& preproc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  for (const Sample& s : samples) html::write_record(out, s.label, s.streams, preproc);
  if (!out) throw IoError("write failed: " + path);
}

std::vector<PairedSample> pair_samples(std::span<const Sample> images, std::span<const Sample> pages) {
  if (images.size() != pages.size()) {
    throw InputError("pair_samples: " + std::to_string(images.size()) + " image samples but " +
                     std::to_string(pages.size()) + " html samples");
  }
  std::vector<PairedSample> out;
  out.reserve(images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].modality != Modality::image || pages[i].modality != Modality::html) {
      throw InputError("pair_samples: wrong modality at index " + std::to_string(i));
    }
    if (images[i].label != pages[i].label) {
      throw InputError("pair_samples: label mismatch at index " + std::to_string(i));
    }
    out.push_back({images[i], pages[i], images[i].label});
  }
  return out;
}

PartitionResult partition(std::size_t pool_size, const PartitionSpec& spec) {
  if (spec.test_end < spec.test_begin || spec.test_end > pool_size) {
    throw InputError("partition: test range [" + std::to_string(spec.test_begin) + ", " +
                     std::to_string(spec.test_end) + ") does not fit a pool of " + std::to_string(pool_size));
  }
  std::vector<std::size_t> order(pool_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!spec.preshuffled) {
    Rng rng(spec.seed);
    rng.shuffle(std::span<std::size_t>(order));
  }
  std::vector<std::size_t> rest(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(spec.test_begin));
  rest.insert(rest.end(), order.begin() + static_cast<std::ptrdiff_t>(spec.test_end), order.end());
  const std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(spec.test_begin),
                                      order.begin() + static_cast<std::ptrdiff_t>(spec.test_end));

  auto deal = [](const std::vector<std::size_t>& from, const std::vector<std::size_t>& counts, const char* what) {
    const std::size_t need = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    if (need > from.size()) {
      throw InputError(std::string("partition: ") + what + " demands need " + std::to_string(need) +
                       " samples but only " + std::to_string(from.size()) + " are available (short by " +
                       std::to_string(need - from.size()) + ")");
    }
    std::vector<std::vector<std::size_t>> out;
    std::size_t at = 0;
    for (std::size_t c : counts) {
      out.emplace_back(from.begin() + static_cast<std::ptrdiff_t>(at), from.begin() + static_cast<std::ptrdiff_t>(at + c));
      at += c;
    }
    return out;
  };
  return {deal(rest, spec.train_counts, "train"), deal(test, spec.test_counts, "test")};
}

Tensor synth_direction(std::size_t dim) {
  Rng rng(derive_seed(kDirectionSeed, dim));
  Tensor u({dim});
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& x : u.values()) x = rng.normal();
    norm = std::sqrt(u.squared_norm());
  }
  for (double& x : u.values()) x /= norm;
  return u;
}

std::vector<Sample> synth_embeddings(std::size_t n, std::size_t dim, double separation, std::uint64_t seed,
                                     std::size_t tokens) {
  if (n < 2) throw ConfigError("synth_embeddings: n must be >= 2");
  if (dim == 0) throw ConfigError("synth_embeddings: dim must be positive");
  if (!(separation >= 0.0) || !std::isfinite(separation)) throw ConfigError("synth_embeddings: separation must be >= 0");
  const Tensor u = synth_direction(dim);
  Rng rng(seed);
  const std::vector<int> labels = balanced_labels(n, rng);
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = labels[i];
    out[i].modality = tokens == 0 ? Modality::url : Modality::image;
    const double offset = (labels[i] == 1 ? 0.5 : -0.5) * separation;
    out[i].features = cluster_draw(tokens, u, offset, rng);
  }
  return out;
}

std::span<const std::string_view> phishing_vocabulary() { return kPhishingWords; }
std::span<const std::string_view> benign_vocabulary() { return kBenignWords; }

std::string synth_page(int label, double signal, std::uint64_t seed) {
  Rng rng(seed);
  auto word = [&]() -> std::string_view {
    if (rng.uniform() < signal) return label == 1 ? pick(kPhishingWords, rng) : pick(kBenignWords, rng);
    return pick(kFillerWords, rng);
  };
  std::string page = "<!DOCTYPE html>\n<html><head><title>";
  page += word();
  page += ' ';
  page += word();
  page += "</title></head>\n<body>\n";
  const std::size_t blocks = 2 + rng.below(4);
  const std::size_t burst_at = rng.below(blocks);
  for (std::size_t b = 0; b < blocks; ++b) {
    if (label == 1 && signal > 0.0 && b == burst_at && rng.uniform() < std::min(1.0, 2.0 * signal)) {
      page += "<form action=\"/session\" method=\"post\"><input type=\"text\" name=\"user\">"
              "<input type=\"password\" name=\"pass\"><input type=\"hidden\" name=\"t\">"
              "<iframe src=\"about:blank\"></iframe></form>\n";
    }
    const std::string_view tag = pick(kFillerTags, rng);
    page += "<div><";
    page += tag;
    page += '>';
    const std::size_t words = 4 + rng.below(9);
    for (std::size_t w = 0; w < words; ++w) {
      if (w > 0) page += ' ';
      page += word();
    }
    page += "</";
    page += tag;
    page += "></div>\n";
  }
  page += "</body></html>\n";
  return page;
}

std::vector<Sample> synth_html(std::size_t n, std::uint64_t seed, const html::PreprocConfig& preproc, double signal) {
  if (n < 2) throw ConfigError("synth_html: n must be >= 2");
  if (!(signal >= 0.0 && signal <= 1.0)) throw ConfigError("synth_html: signal must be in [0, 1]");
  Rng rng(seed);
  const std::vector<int> labels = balanced_labels(n, rng);
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = labels[i];
    out[i].modality = Modality::html;
    out[i].streams = html::preprocess(synth_page(labels[i], signal, derive_seed(seed, i, 1)), preproc);
  }
  return out;
}

std::vector<PairedSample> synth_complementary_pairs(std::size_t n, std::size_t dim, std::size_t tokens,
                                                    double separation, std::uint64_t seed,
                                                    const html::PreprocConfig& preproc) {
  if (n < 2) throw ConfigError("synth_complementary_pairs: n must be >= 2");
  if (tokens == 0) throw ConfigError("synth_complementary_pairs: tokens must be positive");
  const Tensor u = synth_direction(dim);
  Rng rng(seed);
  const std::vector<int> labels = balanced_labels(n, rng);
  std::vector<PairedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    const bool image_informative = rng.uniform() < 0.5;
    PairedSample& p = out[i];
    p.label = y;
    p.image.label = y;
    p.image.modality = Modality::image;
    p.image.features = cluster_draw(tokens, u, image_informative ? (y == 1 ? 0.5 : -0.5) * separation : 0.0, rng);
    p.html.label = y;
    p.html.modality = Modality::html;
    // With signal 0 the page is label-independent filler.
    const double signal = image_informative ? 0.0 : 0.5;
    p.html.streams = html::preprocess(synth_page(y, signal, derive_seed(seed, i, 2)), preproc);
  }
  return out;
}

std::vector<PairedSample> synth_joint_pairs(std::size_t n, std::size_t dim, std::size_t tokens, double separation,
                                            double signal, std::uint64_t seed, const html::PreprocConfig& preproc) {
  if (n < 2) throw ConfigError("synth_joint_pairs: n must be >= 2");
  if (tokens == 0) throw ConfigError("synth_joint_pairs: tokens must be positive");
  const Tensor u = synth_direction(dim);
  Rng rng(seed);
  const std::vector<int> labels = balanced_labels(n, rng);
  std::vector<PairedSample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    PairedSample& p = out[i];
    p.label = y;
    p.image = {y, Modality::image, cluster_draw(tokens, u, (y == 1 ? 0.5 : -0.5) * separation, rng), {}};
    p.html = {y, Modality::html, {}, html::preprocess(synth_page(y, signal, derive_seed(seed, i, 2)), preproc)};
  }
  return out;
}

}  // namespace rolefed::data
