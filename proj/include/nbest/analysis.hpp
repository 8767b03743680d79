// Copyright 2026 The nbest-search Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nbest/errors.hpp"
#include "nbest/metrics.hpp"
#include "nbest/search.hpp"

namespace nbest {

// What to do with items whose exact search ran out of budget.
enum class UnterminatedPolicy { kExclude, kReject };

struct ErrorItem {
  std::string id;
  bool is_error = false;
  double approx_logprob = 0.0;
  double exact_logprob = 0.0;
};

struct ErrorReport {
  std::size_t total_items = 0;
  std::size_t search_errors = 0;
  double error_rate = 0.0;
  std::size_t unterminated_excluded = 0;
  std::vector<ErrorItem> per_item;
};

struct MassItem {
  std::string id;
  std::size_t n_used = 0;
  double cumulative_mass = 0.0;
};

inline constexpr std::size_t kMassBands = 10;

struct MassReport {
  std::size_t n = 0;
  std::vector<MassItem> per_item;
  double mean_mass = 0.0;
  std::vector<std::size_t> mass_histogram = std::vector<std::size_t>(kMassBands, 0);
};

struct GapItem {
  std::string id;
  double exact_mass = 0.0;
  double beam_mass = 0.0;
  double gap = 0.0;
};

struct GapReport {
  std::size_t n = 0;
  std::vector<GapItem> per_item;
  double mean_gap = 0.0;
  std::size_t unterminated_excluded = 0;
};

enum class CorrelationTarget { kErrors, kStates, kMass };

inline std::string_view to_string(CorrelationTarget t) {
  switch (t) {
    case CorrelationTarget::kErrors: return "errors";
    case CorrelationTarget::kStates: return "states";
    case CorrelationTarget::kMass: return "mass";
  }
  return "unknown";
}

struct CorrelationPair {
  std::string id;
  double u = 0.0;
  double value = 0.0;
};

struct CorrelationReport {
  CorrelationTarget which = CorrelationTarget::kErrors;
  double rho = 0.0;
  std::vector<CorrelationPair> pairs;
};

namespace detail {

inline void check_aligned(std::span<const SearchResult> a, std::span<const SearchResult> b) {
  const std::size_t common = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < common; ++i)
    if (a[i].id != b[i].id) throw IdMismatch(a[i].id);
  if (a.size() > common) throw IdMismatch(a[common].id);
  if (b.size() > common) throw IdMismatch(b[common].id);
}

inline double list_mass(std::span<const Hypothesis> hyps, std::size_t n) {
  double mass = 0.0;
  for (std::size_t i = 0; i < std::min(n, hyps.size()); ++i) mass += std::exp(hyps[i].logprob);
  return mass;
}

}  // namespace detail

/// An item is a search error iff the approximate top-1 sequence differs from
/// the exact top-1 sequence.
inline ErrorReport count_search_errors(std::span<const SearchResult> approx,
                                       std::span<const SearchResult> exact,
                                       UnterminatedPolicy policy = UnterminatedPolicy::kExclude) {
  detail::check_aligned(approx, exact);
  ErrorReport report;
  for (std::size_t i = 0; i < approx.size(); ++i) {
    const auto& a = approx[i];
    const auto& e = exact[i];
    if (!e.terminated) {
      if (policy == UnterminatedPolicy::kReject) throw UnterminatedExact(e.id);
      ++report.unterminated_excluded;
      continue;
    }
    if (e.hypotheses.empty())
      throw InvalidArgument("exact result '" + e.id + "' has no hypotheses");
    ErrorItem item;
    item.id = a.id;
    item.exact_logprob = e.hypotheses.front().logprob;
    if (a.hypotheses.empty()) {
      item.is_error = true;
      item.approx_logprob = kNegInf;
    } else {
      item.approx_logprob = a.hypotheses.front().logprob;
      item.is_error = a.hypotheses.front().tokens != e.hypotheses.front().tokens;
    }
    report.search_errors += item.is_error ? 1 : 0;
    report.per_item.push_back(std::move(item));
  }
  report.total_items = report.per_item.size();
  if (report.total_items)
    report.error_rate = static_cast<double>(report.search_errors) /
                        static_cast<double>(report.total_items);
  return report;
}

/// Linear-domain probability mass of each result's top-min(n, available)
/// hypotheses, with a histogram over ten 0.1-wide coverage bands.
inline MassReport mass_coverage(std::span<const SearchResult> results, std::size_t n) {
  if (n == 0) throw InvalidArgument("n must be at least 1");
  MassReport report;
  report.n = n;
  double total = 0.0;
  for (const auto& r : results) {
    if (r.hypotheses.empty())
      throw InvalidArgument("result '" + r.id + "' has no hypotheses");
    MassItem item{r.id, std::min(n, r.hypotheses.size()), detail::list_mass(r.hypotheses, n)};
    const auto band = static_cast<std::size_t>(std::max(0.0, std::floor(item.cumulative_mass * 10.0)));
    ++report.mass_histogram[std::min(band, kMassBands - 1)];
    total += item.cumulative_mass;
    report.per_item.push_back(std::move(item));
  }
  if (!results.empty()) report.mean_mass = total / static_cast<double>(results.size());
  return report;
}

/// exact_mass - beam_mass per item for n-best lists of size n.
inline GapReport mass_gap(std::span<const SearchResult> beam_results,
                          std::span<const SearchResult> exact_results, std::size_t n) {
  if (n == 0) throw InvalidArgument("n must be at least 1");
  detail::check_aligned(beam_results, exact_results);
  GapReport report;
  report.n = n;
  double total = 0.0;
  for (std::size_t i = 0; i < beam_results.size(); ++i) {
    const auto& e = exact_results[i];
    if (!e.terminated) {
      ++report.unterminated_excluded;
      continue;
    }
    GapItem item;
    item.id = e.id;
    item.exact_mass = detail::list_mass(e.hypotheses, n);
    item.beam_mass = detail::list_mass(beam_results[i].hypotheses, n);
    item.gap = item.exact_mass - item.beam_mass;
    total += item.gap;
    report.per_item.push_back(std::move(item));
  }
  if (!report.per_item.empty()) report.mean_gap = total / static_cast<double>(report.per_item.size());
  return report;
}

using ItemValues = std::vector<std::pair<std::string, double>>;

inline ItemValues error_values(const ErrorReport& report) {
  ItemValues out;
  for (const auto& it : report.per_item) out.emplace_back(it.id, it.is_error ? 1.0 : 0.0);
  return out;
}

inline ItemValues state_values(std::span<const SearchResult> results) {
  ItemValues out;
  for (const auto& r : results) out.emplace_back(r.id, static_cast<double>(r.explored_states));
  return out;
}

inline ItemValues mass_values(const MassReport& report) {
  ItemValues out;
  for (const auto& it : report.per_item) out.emplace_back(it.id, it.cumulative_mass);
  return out;
}

/// Joins uncertainty records with per-item values on id (in record order)
/// and computes Spearman's rho over the joined pairs.
inline CorrelationReport correlate(std::span<const UncertaintyRecord> records,
                                   std::span<const std::pair<std::string, double>> values,
                                   CorrelationTarget which) {
  std::unordered_map<std::string_view, double> by_id;
  for (const auto& [id, v] : values) by_id.emplace(id, v);
  CorrelationReport report;
  report.which = which;
  for (const auto& rec : records) {
    auto it = by_id.find(rec.item_id);
    if (it != by_id.end()) report.pairs.push_back({rec.item_id, rec.u, it->second});
  }
  if (report.pairs.size() < 2)
    throw DegenerateInput("correlation needs at least 2 matched items, got " +
                          std::to_string(report.pairs.size()));
  std::vector<double> us, vs;
  for (const auto& p : report.pairs) {
    us.push_back(p.u);
    vs.push_back(p.value);
  }
  report.rho = spearman_rho(us, vs);
  return report;
}

}  // namespace nbest
