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
#include <vector>

#include "data/dataset.hpp"
#include "federation/client.hpp"
#include "heads/model_config.hpp"
#include "html/preproc.hpp"

namespace rolefed {

/// Where a dataset comes from and how its pool is split.
struct DatasetSpec {
  std::string name;
  std::string source;  // synth_embeddings, synth_html, synth_pairs, jsonl, records, pair
  data::Modality modality = data::Modality::url;
  std::size_t n = 0;
  double separation = 8.0;
  std::size_t tokens = 4;
  double signal = 0.3;
  std::string pair_mode = "joint";  // synth_pairs: joint or complementary
  std::uint64_t seed = 0;
  std::string path;                 // jsonl, records (resolved against the config directory)
  std::string image, html;          // pair: names of two datasets joined positionally
  std::size_t test_begin = 0;
  std::size_t test_end = 0;
  std::uint64_t split_seed = 42;
  bool preshuffled = false;

  bool paired() const { return source == "synth_pairs" || source == "pair"; }
};

struct ClientSlice {
  std::string dataset;
  std::size_t count = 0;
};

struct ClientSpec {
  std::string id;
  std::vector<std::string> roles;  // optional declaration, checked against the train slices
  std::vector<ClientSlice> train;
  std::vector<ClientSlice> test;
};

struct ExperimentConfig {
  std::string name;
  std::string model_profile = "desk";
  ModelConfig model;
  html::PreprocConfig preproc;
  TrainConfig train;
  std::vector<DatasetSpec> datasets;
  std::vector<ClientSpec> clients;
  std::string output;
};

/// Parses and validates a JSON experiment file. Unknown keys and constraint
/// violations raise ConfigError naming the key or field.
ExperimentConfig parse_config(const std::string& path);
/// `base_dir` resolves relative dataset paths.
ExperimentConfig parse_config_text(const std::string& text, const std::string& base_dir);

/// Canonical JSON with every default filled in, and its FNV-1a hash.
std::string canonical_json(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

/// Materializes every dataset and deals the per-client slices.
std::vector<data::ClientData> build_clients(const ExperimentConfig& cfg);

}  // namespace rolefed
