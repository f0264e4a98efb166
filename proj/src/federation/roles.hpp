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

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "numerics/param_set.hpp"

namespace rolefed {

enum class Role { image, html, url, fusion, shared };

inline constexpr std::array<Role, 5> kAllRoles = {Role::image, Role::html, Role::url, Role::fusion, Role::shared};

std::string_view role_name(Role role);

/// Aggregation group of a parameter: the longest matching head prefix, or
/// `shared` when none matches.
Role group_of(std::string_view param_name);

/// What a client sends back after local training.
struct ClientReport {
  std::string client_id;
  ParamSet params;
  std::size_t n_total = 0;
  std::size_t n_image = 0;
  std::size_t n_html = 0;
  std::size_t n_url = 0;
  std::size_t n_pair = 0;
  double train_loss = 0.0;  // mean per-batch training loss over the round
  std::size_t train_batches = 0;

  bool has_image() const { return n_image > 0; }
  bool has_html() const { return n_html > 0; }
  bool has_url() const { return n_url > 0; }
  bool has_fusion() const { return n_pair > 0; }
  bool owns(Role role) const;
};

struct AggregateOptions {
  bool html_weight_by_count = false;  // weight HTML by n_html instead of equally
};

/// Aggregation weight of a client for a role. Fusion falls back to
/// min(n_image, n_html) when no pair count is reported.
double role_weight(Role role, const ClientReport& report, const AggregateOptions& opts = {});

/// Indices (into `reports`) of clients owning `role` with a positive weight,
/// in ascending client-id order.
std::vector<std::size_t> select_clients(Role role, std::span<const ClientReport> reports,
                                        const AggregateOptions& opts = {});

struct AggregateResult {
  ParamSet params;
  std::array<std::size_t, 5> contributors{};  // indexed by Role
  std::vector<std::string> excluded;          // client ids dropped for non-finite parameters
};

/// Role-bucketed weighted average. Parameters of a role nobody owns are copied
/// unchanged; sums run in ascending client-id order so report order does not
/// matter. Throws ConfigError when a report is not name- and shape-aligned
/// with `global`.
AggregateResult aggregate(const ParamSet& global, std::span<const ClientReport> reports,
                          const AggregateOptions& opts = {});

}  // namespace rolefed
