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

#include "heads/model_config.hpp"

#include "util/errors.hpp"

namespace rolefed {

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.embed_dim = 16;
  c.image_heads = 2;
  c.image_ff = 32;
  c.classifier_hidden = 16;
  c.char_embed = 4;
  c.conv_filters = 2;
  c.char_fc = 8;
  c.word_buckets = 1021;
  c.word_embed = 8;
  c.dom_buckets = 251;
  c.dom_embed = 4;
  c.lstm_hidden = 4;
  c.url_dim = 16;
  c.url_hidden = 16;
  return c;
}

ModelConfig ModelConfig::profile(const std::string& name) {
  if (name == "full") return full();
  if (name == "desk") return desk();
  throw ConfigError("unknown model profile '" + name + "' (expected full or desk)");
}

void ModelConfig::validate() const {
  if (classes != 2) throw ConfigError("model: only binary classification is supported");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("model: dropout must be in [0, 1)");
  if (embed_dim == 0 || image_heads == 0 || embed_dim % image_heads != 0) {
    throw ConfigError("model: embed_dim must be a positive multiple of image_heads");
  }
  if (image_blocks == 0 || image_ff == 0 || classifier_hidden == 0) throw ConfigError("model: image sizes must be positive");
  if (conv_min < 1 || conv_max < conv_min || conv_filters == 0 || char_fc == 0 || char_embed == 0) {
    throw ConfigError("model: invalid character branch sizes");
  }
  if (word_buckets < 2 || dom_buckets < 2 || word_embed == 0 || dom_embed == 0 || lstm_hidden == 0) {
    throw ConfigError("model: invalid word/DOM branch sizes");
  }
  if (url_dim == 0 || url_hidden == 0 || !(url_scale > 0.0)) throw ConfigError("model: invalid URL head sizes");
  if (gate_hidden == 0) throw ConfigError("model: gate_hidden must be positive");
}

}  // namespace rolefed
