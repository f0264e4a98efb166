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
#include <string>

namespace rolefed {

/// Layer sizes of the four heads. `full()` is the full-size model; `desk()`
/// shrinks every width so that training and gradient checks run on a laptop.
struct ModelConfig {
  std::size_t classes = 2;
  double dropout = 0.2;

  // Image head: transformer encoder over token embeddings.
  std::size_t embed_dim = 768;
  std::size_t image_blocks = 2;
  std::size_t image_heads = 8;
  std::size_t image_ff = 1024;
  std::size_t classifier_hidden = 512;
  bool summary_mean = false;  // second summary token is the mean instead of the max

  // HTML head.
  std::size_t char_vocab = 257;
  std::size_t char_embed = 64;
  std::size_t conv_min = 2;
  std::size_t conv_max = 9;
  std::size_t conv_filters = 16;
  std::size_t char_fc = 128;
  std::uint32_t word_buckets = 131071;
  std::size_t word_embed = 128;
  std::uint32_t dom_buckets = 8190;
  std::size_t dom_embed = 64;
  std::size_t lstm_hidden = 64;

  // URL head.
  std::size_t url_dim = 768;
  std::size_t url_hidden = 512;
  double url_scale = 10.0;

  // Fusion gate.
  std::size_t gate_hidden = 8;

  static ModelConfig full() { return ModelConfig{}; }
  static ModelConfig desk();
  /// "full" or "desk"; throws ConfigError otherwise.
  static ModelConfig profile(const std::string& name);

  std::size_t html_feature_width() const { return char_fc + 4 * lstm_hidden; }
  void validate() const;
};

}  // namespace rolefed
