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

#include "federation/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <optional>
#include <set>
#include <stdexcept>
#include <thread>

#include "util/errors.hpp"

namespace rolefed {

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

ExperimentResult run_experiment(const ModelConfig& model, const TrainConfig& cfg,
                                std::span<const data::ClientData> clients, ParamSet initial,
                                const ExperimentOptions& opts) {
  cfg.validate();
  if (clients.empty()) throw ConfigError("experiment needs at least one client");
  std::set<std::string> ids;
  for (const data::ClientData& c : clients) {
    if (!ids.insert(c.id).second) throw ConfigError("duplicate client id " + c.id);
  }
  const AggregateOptions agg{cfg.html_weight_by_count};

  ExperimentResult result;
  result.params = std::move(initial);
  for (std::size_t round = 1; round <= cfg.rounds; ++round) {
    RoundLog log;
    log.round = round;

    std::vector<std::optional<ClientReport>> slots(clients.size());
    std::vector<std::string> failures(clients.size());
    parallel_for(clients.size(), opts.workers, [&](std::size_t i) {
      try {
        slots[i] = client_train(model, cfg, clients[i], result.params, round);
      } catch (const std::exception& e) {
        failures[i] = e.what();
      }
    });
    std::vector<ClientReport> reports;
    for (std::size_t i = 0; i < clients.size(); ++i) {
      if (slots[i]) {
        reports.push_back(std::move(*slots[i]));
      } else {
        log.warnings.push_back("round " + std::to_string(round) + ": client " + clients[i].id +
                               " excluded: " + failures[i]);
      }
    }
    if (reports.empty()) throw NumericError("round " + std::to_string(round) + ": no client produced a report");

    AggregateResult agg_result = aggregate(result.params, reports, agg);
    for (const std::string& id : agg_result.excluded) {
      log.warnings.push_back("round " + std::to_string(round) + ": client " + id +
                             " excluded: non-finite parameters");
    }
    log.contributors = agg_result.contributors;
    for (const auto& [name, value] : agg_result.params) {
      if (log.contributors[static_cast<std::size_t>(group_of(name))] == 0 && !(value == result.params.at(name))) {
        throw std::logic_error("role isolation violated for " + name);
      }
    }
    result.params = std::move(agg_result.params);

    std::vector<std::vector<HeadEval>> evals(clients.size());
    parallel_for(clients.size(), opts.workers, [&](std::size_t i) {
      evals[i] = client_evaluate(result.params, model, cfg.loss, clients[i].test);
    });
    for (std::size_t i = 0; i < clients.size(); ++i) {
      if (evals[i].empty() && round == 1) {
        log.warnings.push_back("client " + clients[i].id + " has no test data; metrics omitted");
      }
      for (const HeadEval& e : evals[i]) log.evals.push_back({round, clients[i].id, e.head, e.loss, e.metrics});
    }
    if (opts.on_round) opts.on_round(log, result.params);
    result.logs.push_back(std::move(log));
  }
  return result;
}

std::vector<EvalRecord> flatten(std::span<const RoundLog> logs) {
  std::vector<EvalRecord> out;
  for (const RoundLog& l : logs) out.insert(out.end(), l.evals.begin(), l.evals.end());
  return out;
}

}  // namespace rolefed
