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
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nbest/errors.hpp"

namespace nbest {

/// Token-level edit distance (unit-cost insert, delete, substitute).
/// Two-row dynamic program, O(|a|·|b|) time and O(|b|) space.
template <class T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  std::iota(prev.begin(), prev.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

template <class T>
std::size_t levenshtein(const std::vector<T>& a, const std::vector<T>& b) {
  return levenshtein(std::span<const T>(a), std::span<const T>(b));
}

/// Intrinsic uncertainty of a reference set: the average pairwise edit
/// distance divided by the average reference length,
///   u = 2 / ((n-1) * sum_i |y_i|) * sum_{i<j} d(y_i, y_j).
/// References are not deduplicated.
template <class T>
double uncertainty_u(std::span<const std::vector<T>> refs) {
  const std::size_t n = refs.size();
  if (n < 2) throw TooFewReferences(n);
  std::size_t total_len = 0;
  for (const auto& r : refs) total_len += r.size();
  if (total_len == 0) throw AllEmptyReferences();
  std::size_t dist = 0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) dist += levenshtein(refs[i], refs[j]);
  return 2.0 * static_cast<double>(dist) /
         (static_cast<double>(n - 1) * static_cast<double>(total_len));
}

template <class T>
double uncertainty_u(const std::vector<std::vector<T>>& refs) {
  return uncertainty_u(std::span<const std::vector<T>>(refs));
}

struct UncertaintyRecord {
  std::string item_id;
  std::size_t n_refs = 0;
  double avg_ref_len = 0.0;
  double u = 0.0;
};

inline UncertaintyRecord make_uncertainty_record(
    std::string id, const std::vector<std::vector<std::string>>& refs) {
  UncertaintyRecord rec;
  rec.u = uncertainty_u(refs);
  rec.item_id = std::move(id);
  rec.n_refs = refs.size();
  std::size_t total = 0;
  for (const auto& r : refs) total += r.size();
  rec.avg_ref_len = static_cast<double>(total) / static_cast<double>(refs.size());
  return rec;
}

struct BucketStat {
  double bucket_lo = 0.0;
  double bucket_hi = std::numeric_limits<double>::infinity();  // exclusive
  std::size_t count = 0;
  double mean = 0.0;
  double sem = 0.0;  // sample stddev / sqrt(count); 0 when count <= 1
};

inline const std::vector<double> kDefaultBuckets = {10, 20, 30, 40};

/// Groups (length, value) pairs into [0,b0), [b0,b1), ..., [b_last, inf) and
/// reports count, mean and standard error per bucket. Empty buckets are kept.
inline std::vector<BucketStat> bucketize(std::span<const std::pair<double, double>> values,
                                         std::span<const double> boundaries) {
  for (std::size_t i = 1; i < boundaries.size(); ++i)
    if (!(boundaries[i] > boundaries[i - 1]))
      throw InvalidArgument("bucket boundaries must be strictly increasing");

  std::vector<std::vector<double>> members(boundaries.size() + 1);
  for (const auto& [len, v] : values) {
    const auto idx = std::upper_bound(boundaries.begin(), boundaries.end(), len) -
                     boundaries.begin();
    members[static_cast<std::size_t>(idx)].push_back(v);
  }

  std::vector<BucketStat> out(members.size());
  for (std::size_t b = 0; b < members.size(); ++b) {
    auto& s = out[b];
    s.bucket_lo = b == 0 ? 0.0 : boundaries[b - 1];
    s.bucket_hi = b < boundaries.size() ? boundaries[b] : std::numeric_limits<double>::infinity();
    const auto& m = members[b];
    s.count = m.size();
    if (m.empty()) continue;
    s.mean = std::accumulate(m.begin(), m.end(), 0.0) / static_cast<double>(m.size());
    if (m.size() > 1) {
      double ss = 0.0;
      for (double v : m) ss += (v - s.mean) * (v - s.mean);
      const double sd = std::sqrt(ss / static_cast<double>(m.size() - 1));
      s.sem = sd / std::sqrt(static_cast<double>(m.size()));
    }
  }
  return out;
}

/// 1-based ranks; tied values share the mean of their rank range.
inline std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

/// Spearman's rho: Pearson correlation of average ranks.
inline double spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InvalidArgument("spearman_rho: length mismatch");
  if (x.size() < 2) throw DegenerateInput("spearman_rho needs at least 2 pairs");
  auto constant = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double e) { return e == v.front(); });
  };
  if (constant(x) || constant(y)) throw DegenerateInput("spearman_rho: constant input");
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return std::clamp(pearson(rx, ry), -1.0, 1.0);
}

}  // namespace nbest
