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

#include "federation/roles.hpp"

#include <algorithm>
#include <numeric>

#include "heads/heads.hpp"
#include "util/errors.hpp"

namespace rolefed {

std::string_view role_name(Role role) {
  switch (role) {
    case Role::image: return "image";
    case Role::html: return "html";
    case Role::url: return "url";
    case Role::fusion: return "fusion";
    case Role::shared: return "shared";
  }
  return "shared";
}

Role group_of(std::string_view param_name) {
  constexpr std::pair<std::string_view, Role> kPrefixes[] = {
      {kImagePrefix, Role::image}, {kHtmlPrefix, Role::html}, {kUrlPrefix, Role::url}, {kFusionPrefix, Role::fusion}};
  Role best = Role::shared;
  std::size_t best_len = 0;
  for (const auto& [prefix, role] : kPrefixes) {
    if (prefix.size() > best_len && param_name.starts_with(prefix)) {
      best = role;
      best_len = prefix.size();
    }
  }
  return best;
}

bool ClientReport::owns(Role role) const {
  switch (role) {
    case Role::image: return has_image();
    case Role::html: return has_html();
    case Role::url: return has_url();
    case Role::fusion: return has_fusion();
    case Role::shared: return true;
  }
  return false;
}

double role_weight(Role role, const ClientReport& r, const AggregateOptions& opts) {
  switch (role) {
    case Role::image: return static_cast<double>(r.n_image);
    case Role::html: return opts.html_weight_by_count ? static_cast<double>(r.n_html) : 1.0;
    case Role::url: return static_cast<double>(r.n_url);
    case Role::fusion:
      return static_cast<double>(r.n_pair > 0 ? r.n_pair : std::min(r.n_image, r.n_html));
    case Role::shared: return static_cast<double>(r.n_total);
  }
  return 0.0;
}

std::vector<std::size_t> select_clients(Role role, std::span<const ClientReport> reports,
                                        const AggregateOptions& opts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (reports[i].owns(role) && role_weight(role, reports[i], opts) > 0.0) out.push_back(i);
  }
  std::stable_sort(out.begin(), out.end(),
                   [&](std::size_t a, std::size_t b) { return reports[a].client_id < reports[b].client_id; });
  return out;
}

AggregateResult aggregate(const ParamSet& global, std::span<const ClientReport> reports,
                          const AggregateOptions& opts) {
  for (const ClientReport& r : reports) {
    if (r.params.size() != global.size()) {
      throw ConfigError("aggregate: client " + r.client_id + " reports " + std::to_string(r.params.size()) +
                        " parameters, expected " + std::to_string(global.size()));
    }
    for (const auto& [name, value] : global) {
      auto it = r.params.find(name);
      if (it == r.params.end()) throw ConfigError("aggregate: client " + r.client_id + " is missing " + name);
      if (it->second.shape() != value.shape()) {
        throw ConfigError("aggregate: client " + r.client_id + " has a mismatched shape for " + name);
      }
    }
  }

  AggregateResult result;
  std::vector<bool> finite(reports.size());
  for (std::size_t i = 0; i < reports.size(); ++i) {
    finite[i] = params_finite(reports[i].params);
    if (!finite[i]) result.excluded.push_back(reports[i].client_id);
  }

  std::array<std::vector<std::size_t>, 5> selected;
  std::array<std::vector<double>, 5> weights;
  for (Role role : kAllRoles) {
    const auto k = static_cast<std::size_t>(role);
    for (std::size_t j : select_clients(role, reports, opts))
      if (finite[j]) selected[k].push_back(j);
    double total = 0.0;
    for (std::size_t j : selected[k]) total += role_weight(role, reports[j], opts);
    for (std::size_t j : selected[k]) weights[k].push_back(role_weight(role, reports[j], opts) / total);
    result.contributors[k] = selected[k].size();
  }

  for (const auto& [name, value] : global) {
    const auto k = static_cast<std::size_t>(group_of(name));
    if (selected[k].empty()) {
      result.params.emplace(name, value);
      continue;
    }
    Tensor acc = Tensor::zeros_like(value);
    for (std::size_t s = 0; s < selected[k].size(); ++s) {
      const double w = weights[k][s];
      const auto src = reports[selected[k][s]].params.at(name).values();
      auto dst = acc.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += w * src[i];
    }
    result.params.emplace(name, std::move(acc));
  }
  return result;
}

}  // namespace rolefed
