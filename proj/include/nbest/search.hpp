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
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nbest/errors.hpp"
#include "nbest/model.hpp"
#include "nbest/sequence.hpp"

namespace nbest {

enum class Method { kGreedy, kBeam, kDfs, kNbestDfs };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::kGreedy: return "greedy";
    case Method::kBeam: return "beam";
    case Method::kDfs: return "dfs";
    case Method::kNbestDfs: return "nbest_dfs";
  }
  return "unknown";
}

inline Method method_from_string(std::string_view s) {
  if (s == "greedy") return Method::kGreedy;
  if (s == "beam") return Method::kBeam;
  if (s == "dfs") return Method::kDfs;
  if (s == "nbest_dfs") return Method::kNbestDfs;
  throw InvalidArgument("unknown search method '" + std::string(s) + "'");
}

inline constexpr std::uint64_t kDefaultMaxStates = 1'000'000;

struct SearchBudget {
  std::optional<std::uint64_t> max_states = kDefaultMaxStates;  // nullopt = unlimited

  static SearchBudget unlimited() { return {std::nullopt}; }
  static SearchBudget of(std::uint64_t states) {
    if (states == 0) throw InvalidArgument("max_states must be positive");
    return {states};
  }

  bool allows(std::uint64_t explored) const noexcept {
    return !max_states || explored < *max_states;
  }
};

struct SearchSettings {
  std::optional<std::size_t> beam_size;
  std::optional<std::size_t> n;
  std::optional<std::uint64_t> max_states;
  std::optional<std::size_t> seed_with_beam;

  friend bool operator==(const SearchSettings&, const SearchSettings&) = default;
};

struct SearchResult {
  std::string id;
  Method method = Method::kGreedy;
  SearchSettings settings;
  bool terminated = true;  // false iff the state budget ran out
  std::uint64_t explored_states = 0;
  std::vector<Hypothesis> hypotheses;  // complete, sorted by RanksBefore
};

/// Bounded priority queue holding the n best distinct complete hypotheses
/// seen so far. gamma() is the pruning threshold: -inf until the queue is
/// full, then the score of its n-th best entry. It never decreases.
class NBestQueue {
 public:
  explicit NBestQueue(std::size_t n) : n_(n) {
    if (n_ == 0) throw InvalidArgument("n must be at least 1");
  }

  // Returns true if h is retained. Re-pushing a held sequence is a no-op.
  bool push(Hypothesis h) {
    auto [it, inserted] = best_.insert(std::move(h));
    if (!inserted) return false;
    if (best_.size() > n_) {
      auto last = std::prev(best_.end());
      const bool evicted_self = last == it;
      best_.erase(last);
      return !evicted_self;
    }
    return true;
  }

  double gamma() const noexcept {
    return best_.size() < n_ ? kNegInf : std::prev(best_.end())->logprob;
  }

  std::size_t size() const noexcept { return best_.size(); }
  std::size_t capacity() const noexcept { return n_; }

  std::vector<Hypothesis> sorted() const { return {best_.begin(), best_.end()}; }

 private:
  std::size_t n_;
  std::set<Hypothesis, RanksBefore> best_;
};

namespace detail {

// Supported children ordered by descending step probability, ties by id.
inline void expansion_order(std::span<const double> row, std::vector<TokenId>& out) {
  out.clear();
  for (TokenId w = 0; w < row.size(); ++w)
    if (row[w] != kNegInf) out.push_back(w);
  std::sort(out.begin(), out.end(), [&](TokenId a, TokenId b) {
    return row[a] != row[b] ? row[a] > row[b] : a < b;
  });
}

}  // namespace detail

/// Picks the most probable token at every step (lowest id on ties).
template <SequenceModel Model>
SearchResult greedy(const Model& model, std::string_view source) {
  const Vocabulary& vocab = model.vocab();
  SearchResult result;
  result.method = Method::kGreedy;
  Hypothesis hyp;
  for (;;) {
    const auto row = model.score_step(source, hyp.tokens);
    ++result.explored_states;
    TokenId best = 0;
    for (TokenId w = 1; w < row.size(); ++w)
      if (row[w] > row[best]) best = w;
    hyp.logprob = hyp.logprob + row[best];
    hyp.tokens.push_back(best);
    if (best == vocab.eos()) break;
  }
  result.hypotheses.push_back(std::move(hyp));
  return result;
}

/// Beam search on raw log-probabilities (no length normalization).
///
/// Each step scores every live prefix, ranks all one-token extensions and
/// keeps the beam_size best. Extensions ending in eos leave the beam and are
/// collected. The search stops when the beam is empty or every live prefix
/// scores strictly below the beam_size-th best collected hypothesis; since
/// scores only decrease along a path, no live prefix can then enter the
/// returned list.
template <SequenceModel Model>
SearchResult beam(const Model& model, std::string_view source, std::size_t beam_size) {
  if (beam_size == 0) throw InvalidArgument("beam size must be at least 1");
  const Vocabulary& vocab = model.vocab();
  SearchResult result;
  result.method = Method::kBeam;
  result.settings.beam_size = beam_size;

  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> collected;
  std::vector<Hypothesis> candidates;
  const RanksBefore ranks;

  while (!live.empty()) {
    if (collected.size() >= beam_size) {
      std::nth_element(collected.begin(), collected.begin() + (beam_size - 1),
                       collected.end(), ranks);
      const double threshold = collected[beam_size - 1].logprob;
      const bool hopeless = std::all_of(live.begin(), live.end(), [&](const Hypothesis& h) {
        return h.logprob < threshold;
      });
      if (hopeless) break;
    }

    candidates.clear();
    for (const auto& h : live) {
      const auto row = model.score_step(source, h.tokens);
      ++result.explored_states;
      for (TokenId w = 0; w < row.size(); ++w) {
        if (row[w] == kNegInf) continue;
        Hypothesis c{h.tokens, h.logprob + row[w]};
        c.tokens.push_back(w);
        candidates.push_back(std::move(c));
      }
    }
    const std::size_t keep = std::min(beam_size, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + keep, candidates.end(), ranks);

    live.clear();
    for (std::size_t i = 0; i < keep; ++i) {
      auto& c = candidates[i];
      if (c.tokens.back() == vocab.eos())
        collected.push_back(std::move(c));
      else
        live.push_back(std::move(c));
    }
  }

  std::sort(collected.begin(), collected.end(), ranks);
  if (collected.size() > beam_size) collected.resize(beam_size);
  result.hypotheses = std::move(collected);
  return result;
}

/// Single-best exact depth-first search: tracks the best complete score seen
/// and expands a child only if its prefix score is strictly greater.
/// Written recursively; nbest_dfs is the iterative generalization.
template <SequenceModel Model>
SearchResult dfs(const Model& model, std::string_view source, SearchBudget budget = {}) {
  const Vocabulary& vocab = model.vocab();
  SearchResult result;
  result.method = Method::kDfs;
  result.settings.n = 1;
  result.settings.max_states = budget.max_states;

  std::optional<Hypothesis> best;
  Sequence prefix;

  std::function<void(double)> visit = [&](double p) {
    if (!result.terminated) return;
    if (!budget.allows(result.explored_states)) {
      result.terminated = false;
      return;
    }
    ++result.explored_states;
    if (!prefix.empty() && prefix.back() == vocab.eos()) {
      Hypothesis h{prefix, p};
      if (!best || RanksBefore{}(h, *best)) best = std::move(h);
      return;
    }
    const auto row = model.score_step(source, prefix);
    std::vector<TokenId> order;
    detail::expansion_order(row, order);
    for (TokenId w : order) {
      const double child = p + row[w];
      if (child > (best ? best->logprob : kNegInf)) {
        prefix.push_back(w);
        visit(child);
        prefix.pop_back();
      }
    }
  };
  visit(0.0);

  if (best) result.hypotheses.push_back(std::move(*best));
  return result;
}

using GammaObserver = std::function<void(double gamma)>;

/// Exact n-best depth-first search with branch-and-bound pruning.
///
/// Complete hypotheses go into an NBestQueue of capacity n whose gamma() is
/// the lower bound. A child with prefix score p' is visited iff p' > gamma
/// (strict), evaluated when the child is reached, exactly as a recursive
/// formulation would. Children are visited in descending step probability.
/// explored_states counts every visit, including the root and visits of
/// complete hypotheses. If the budget runs out, terminated is false and the
/// queue contents found so far are returned.
///
/// Seeds only pre-fill the queue; each is re-scored and must match its
/// stated logprob within 1e-9.
template <SequenceModel Model>
SearchResult nbest_dfs(const Model& model, std::string_view source, std::size_t n,
                       SearchBudget budget = {}, std::span<const Hypothesis> seeds = {},
                       const GammaObserver& on_gamma = {}) {
  const Vocabulary& vocab = model.vocab();
  NBestQueue queue(n);
  SearchResult result;
  result.method = Method::kNbestDfs;
  result.settings.n = n;
  result.settings.max_states = budget.max_states;

  double gamma = kNegInf;
  auto push = [&](Hypothesis h) {
    queue.push(std::move(h));
    if (queue.gamma() != gamma) {
      gamma = queue.gamma();
      if (on_gamma) on_gamma(gamma);
    }
  };

  for (const auto& seed : seeds) {
    double rescored = 0.0;
    try {
      rescored = logprob_sequence(model, source, seed.tokens);
    } catch (const Error& e) {
      throw InvalidSeed(std::string("seed rejected: ") + e.what());
    }
    if (!std::isfinite(rescored) || !(std::abs(rescored - seed.logprob) <= 1e-9))
      throw InvalidSeed("seed logprob does not match the model");
    push(Hypothesis{seed.tokens, rescored});
  }

  // Pending visit: extend the path truncated to `depth` by `token`.
  struct Pending {
    std::size_t depth;
    TokenId token;
    double logprob;
  };
  std::vector<Pending> stack;
  std::vector<TokenId> order;
  Sequence prefix;

  auto expand = [&](double p) {
    const auto row = model.score_step(source, prefix);
    detail::expansion_order(row, order);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
      stack.push_back({prefix.size(), *it, p + row[*it]});
  };

  ++result.explored_states;  // root
  expand(0.0);
  while (!stack.empty()) {
    const Pending next = stack.back();
    stack.pop_back();
    if (!(next.logprob > gamma)) continue;
    if (!budget.allows(result.explored_states)) {
      result.terminated = false;
      break;
    }
    ++result.explored_states;
    prefix.resize(next.depth);
    prefix.push_back(next.token);
    if (next.token == vocab.eos())
      push(Hypothesis{prefix, next.logprob});
    else
      expand(next.logprob);
  }

  result.hypotheses = queue.sorted();
  return result;
}

inline constexpr std::size_t kEnumerateMaxTokens = 6;  // non-eos tokens
inline constexpr std::size_t kEnumerateMaxLen = 8;

namespace detail {

template <SequenceModel Model>
void check_enumerable(const Model& model) {
  if (model.vocab().size() - 1 > kEnumerateMaxTokens || model.max_len() > kEnumerateMaxLen)
    throw SpaceTooLarge("exhaustive enumeration needs at most " +
                        std::to_string(kEnumerateMaxTokens) + " non-eos tokens and max_len <= " +
                        std::to_string(kEnumerateMaxLen));
}

// Visits every node of the support tree; returns the node count.
template <SequenceModel Model, class OnComplete>
std::uint64_t walk_support(const Model& model, std::string_view source, Sequence& prefix,
                           double p, OnComplete& on_complete) {
  if (!prefix.empty() && prefix.back() == model.vocab().eos()) {
    on_complete(prefix, p);
    return 1;
  }
  std::uint64_t nodes = 1;
  const auto row = model.score_step(source, prefix);
  for (TokenId w = 0; w < row.size(); ++w) {
    if (row[w] == kNegInf) continue;
    prefix.push_back(w);
    nodes += walk_support(model, source, prefix, p + row[w], on_complete);
    prefix.pop_back();
  }
  return nodes;
}

}  // namespace detail

/// Every complete sequence with non-zero probability and its exact logprob,
/// sorted by RanksBefore. Intended as a test oracle on tiny spaces.
template <SequenceModel Model>
std::vector<Hypothesis> enumerate_all(const Model& model, std::string_view source) {
  detail::check_enumerable(model);
  std::vector<Hypothesis> out;
  auto collect = [&](const Sequence& s, double p) { out.push_back({s, p}); };
  Sequence prefix;
  detail::walk_support(model, source, prefix, 0.0, collect);
  std::sort(out.begin(), out.end(), RanksBefore{});
  return out;
}

/// Node count of the full support tree, counted the way nbest_dfs counts
/// explored states (root and complete leaves included).
template <SequenceModel Model>
std::uint64_t search_tree_size(const Model& model, std::string_view source) {
  detail::check_enumerable(model);
  auto ignore = [](const Sequence&, double) {};
  Sequence prefix;
  return detail::walk_support(model, source, prefix, 0.0, ignore);
}

}  // namespace nbest
