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

#include "metrics/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <tuple>

#include "util/errors.hpp"

namespace rolefed {

namespace {

constexpr const char* kHeader = "round,client_id,head,loss,accuracy,precision,recall,fpr";

double ratio(std::size_t num, std::size_t den, bool& degenerate) {
  if (den == 0) {
    degenerate = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

void append_fixed(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  out += buf;
}

}  // namespace

Confusion& Confusion::operator+=(const Confusion& o) {
  tp += o.tp;
  fp += o.fp;
  tn += o.tn;
  fn += o.fn;
  return *this;
}

Confusion confusion(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) {
    throw InputError("confusion: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(labels.size()) + " labels");
  }
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if ((p != 0 && p != 1) || (y != 0 && y != 1)) throw InputError("confusion: values must be 0 or 1");
    if (p == 1) {
      ++(y == 1 ? c.tp : c.fp);
    } else {
      ++(y == 0 ? c.tn : c.fn);
    }
  }
  return c;
}

Metrics compute_metrics(const Confusion& c) {
  Metrics m;
  m.accuracy = ratio(c.tp + c.tn, c.total(), m.degenerate);
  m.precision = ratio(c.tp, c.tp + c.fp, m.degenerate);
  m.recall = ratio(c.tp, c.tp + c.fn, m.degenerate);
  m.fpr = ratio(c.fp, c.fp + c.tn, m.degenerate);
  return m;
}

std::string format_round_csv(std::span<const EvalRecord> records) {
  std::vector<const EvalRecord*> rows;
  rows.reserve(records.size());
  for (const EvalRecord& r : records) rows.push_back(&r);
  std::stable_sort(rows.begin(), rows.end(), [](const EvalRecord* a, const EvalRecord* b) {
    return std::tie(a->round, a->client_id, a->head) < std::tie(b->round, b->client_id, b->head);
  });
  std::string out = kHeader;
  out += '\n';
  for (const EvalRecord* r : rows) {
    out += std::to_string(r->round);
    out += ',';
    out += r->client_id;
    out += ',';
    out += r->head;
    for (double v : {r->loss, r->metrics.accuracy, r->metrics.precision, r->metrics.recall, r->metrics.fpr}) {
      out += ',';
      append_fixed(out, v);
    }
    out += '\n';
  }
  return out;
}

void write_round_csv(std::span<const EvalRecord> records, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out << format_round_csv(records);
  if (!out.flush()) throw IoError("write failed: " + path);
}

std::vector<EvalRecord> read_round_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw InputError(path + ": missing CSV header");
  std::vector<EvalRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw InputError(path + ":" + std::to_string(line_no) + ": expected 8 columns");
    try {
      EvalRecord r;
      r.round = std::stoul(cells[0]);
      r.client_id = cells[1];
      r.head = cells[2];
      r.loss = std::stod(cells[3]);
      r.metrics.accuracy = std::stod(cells[4]);
      r.metrics.precision = std::stod(cells[5]);
      r.metrics.recall = std::stod(cells[6]);
      r.metrics.fpr = std::stod(cells[7]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw InputError(path + ":" + std::to_string(line_no) + ": malformed number");
    }
  }
  return out;
}

}  // namespace rolefed
