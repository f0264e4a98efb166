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
#include <span>
#include <string>
#include <vector>

namespace rolefed {

/// Binary confusion counts with phishing (1) as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  Confusion& operator+=(const Confusion& o);
  bool operator==(const Confusion&) const = default;
};

/// Throws InputError on a length mismatch or a value outside {0, 1}.
Confusion confusion(std::span<const int> predictions, std::span<const int> labels);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double fpr = 0.0;
  bool degenerate = false;  // some ratio had a zero denominator and was reported as 0
};

Metrics compute_metrics(const Confusion& c);

/// One evaluated (round, client, head) row.
struct EvalRecord {
  std::size_t round = 0;
  std::string client_id;
  std::string head;
  double loss = 0.0;
  Metrics metrics;
};

/// Header plus one row per record, sorted by (round, client_id, head), with
/// six decimals. Throws IoError naming the path.
void write_round_csv(std::span<const EvalRecord> records, const std::string& path);
std::string format_round_csv(std::span<const EvalRecord> records);
/// Parses a file produced by write_round_csv.
std::vector<EvalRecord> read_round_csv(const std::string& path);

}  // namespace rolefed
