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

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nbest/nbest.hpp"

namespace nbest::testing {

inline TableModel model_from(ModelDocument doc) { return TableModel(std::move(doc)); }

// Root {a:.6, b:.4}; after "a" flat over {c,d}; after "b" eos is certain.
// Greedy takes "a c </s>" (.3) while the mode is "b </s>" (.4).
inline TableModel garden_path() {
  ModelDocument doc;
  doc.vocab = {"a", "b", "c", "d", "</s>"};
  doc.context_order = 1;
  doc.max_len = 2;
  doc.fallback = {{"</s>", 1.0}};
  doc.sources["x"] = {
      {"", {{"a", 0.6}, {"b", 0.4}}},
      {"a", {{"c", 0.5}, {"d", 0.5}}},
      {"b", {{"</s>", 1.0}}},
  };
  return model_from(doc);
}

// Prefix-independent row {a:.5, b:.3, </s>:.2} with max_len 2: seven
// complete sequences with total mass 1.
inline TableModel seven() {
  ModelDocument doc;
  doc.vocab = {"a", "b", "</s>"};
  doc.context_order = 0;
  doc.max_len = 2;
  doc.fallback = {{"a", 0.5}, {"b", 0.3}, {"</s>", 0.2}};
  doc.sources["x"] = {{"", {{"a", 0.5}, {"b", 0.3}, {"</s>", 0.2}}}};
  return model_from(doc);
}

// Every row has a single certain token: "a b </s>".
inline TableModel chain() {
  ModelDocument doc;
  doc.vocab = {"a", "b", "</s>"};
  doc.context_order = 1;
  doc.max_len = 3;
  doc.fallback = {{"</s>", 1.0}};
  doc.sources["x"] = {
      {"", {{"a", 1.0}}},
      {"a", {{"b", 1.0}}},
      {"b", {{"</s>", 1.0}}},
  };
  return model_from(doc);
}

inline Sequence ids(const TableModel& m, const std::string& text) {
  return encode(m.vocab(), tokenize(text));
}

struct Instance {
  SynthSpec spec;
  TableModel model;
  std::string source;
};

// The i-th member of a deterministic family of small synthetic models:
// vocab 2..5, max_len 1..6, alpha in {0.05, 0.5, 5}, context order 0..2.
inline SynthSpec small_spec(std::size_t i, std::uint64_t base_seed = 1000) {
  static constexpr double kAlphas[] = {0.05, 0.5, 5.0};
  SynthSpec s;
  s.vocab_size = 2 + i % 4;
  s.max_len = 1 + (i / 4) % 6;
  s.alpha = kAlphas[i % 3];
  s.context_order = (i / 24) % 3;
  s.seed = base_seed + i;
  s.num_sources = 1;
  return s;
}

inline std::vector<Instance> small_instances(std::size_t count, std::uint64_t base_seed = 1000) {
  std::vector<Instance> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const SynthSpec s = small_spec(i, base_seed);
    out.push_back({s, gen_synthetic(s), synth_source(0, 1)});
  }
  return out;
}

// True when `got` is the oracle's top-n except possibly for which members of
// an exact score tie at rank n are returned (strict pruning drops a
// candidate that only ties the n-th score).
inline bool matches_top_n(const std::vector<Hypothesis>& got, const std::vector<Hypothesis>& oracle,
                          std::size_t n, double tol = 1e-9) {
  const std::size_t want = std::min(n, oracle.size());
  if (got.size() != want) return false;
  if (want == 0) return true;
  const double cutoff = oracle[want - 1].logprob;
  for (std::size_t i = 0; i < want; ++i) {
    if (std::abs(got[i].logprob - oracle[i].logprob) > tol) return false;
    if (got[i].tokens == oracle[i].tokens) continue;
    if (oracle[i].logprob != cutoff) return false;
    bool tied_member = false;
    for (const auto& h : oracle)
      if (h.logprob == cutoff && h.tokens == got[i].tokens) tied_member = true;
    if (!tied_member) return false;
  }
  return true;
}

}  // namespace nbest::testing
