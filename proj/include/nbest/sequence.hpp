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
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "nbest/errors.hpp"

namespace nbest {

using TokenId = std::uint32_t;

// Target-side token ids. Empty is the root prefix.
using Sequence = std::vector<TokenId>;

// Transparent hash so maps keyed by std::string accept string_view lookups.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

/// Fixed token inventory with a distinguished end-of-sentence symbol.
/// Token ids are positions in the constructor list and never change.
class Vocabulary {
 public:
  Vocabulary(std::vector<std::string> tokens, std::size_t eos_index)
      : tokens_(std::move(tokens)), eos_(static_cast<TokenId>(eos_index)) {
    if (eos_index >= tokens_.size())
      throw InvalidArgument("eos index " + std::to_string(eos_index) +
                            " out of range for vocabulary of size " +
                            std::to_string(tokens_.size()));
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      if (t.empty()) throw InvalidArgument("empty token in vocabulary");
      if (t.find_first_of(" \t\n\r\f\v") != std::string::npos)
        throw InvalidArgument("token '" + t + "' contains whitespace");
      if (!index_.emplace(t, static_cast<TokenId>(i)).second)
        throw InvalidArgument("duplicate token '" + t + "' in vocabulary");
    }
  }

  // Tokens followed by eos_token appended at the end.
  static Vocabulary with_eos(std::vector<std::string> tokens,
                             std::string eos_token = "</s>") {
    tokens.push_back(std::move(eos_token));
    const std::size_t eos = tokens.size() - 1;
    return Vocabulary(std::move(tokens), eos);
  }

  std::size_t size() const noexcept { return tokens_.size(); }
  TokenId eos() const noexcept { return eos_; }
  const std::string& eos_token() const { return tokens_[eos_]; }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  const std::string& token(TokenId id) const { return tokens_.at(id); }

  const TokenId* find(std::string_view token) const {
    auto it = index_.find(token);
    return it == index_.end() ? nullptr : &it->second;
  }

  bool contains(TokenId id) const noexcept { return id < tokens_.size(); }

 private:
  std::vector<std::string> tokens_;
  TokenId eos_;
  std::unordered_map<std::string, TokenId, StringHash, std::equal_to<>> index_;
};

// Complete iff the last id is eos and eos occurs nowhere else.
inline bool is_complete(std::span<const TokenId> seq, const Vocabulary& vocab) {
  if (seq.empty() || seq.back() != vocab.eos()) return false;
  return std::find(seq.begin(), seq.end() - 1, vocab.eos()) == seq.end() - 1;
}

struct Hypothesis {
  Sequence tokens;
  double logprob = 0.0;  // natural log

  friend bool operator==(const Hypothesis&, const Hypothesis&) = default;
};

// Total order used everywhere hypotheses are ranked: higher logprob first,
// then shorter, then lexicographically smaller token ids.
struct RanksBefore {
  bool operator()(const Hypothesis& a, const Hypothesis& b) const noexcept {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    if (a.tokens.size() != b.tokens.size())
      return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  }
};

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  constexpr std::string_view kSpace = " \t\n\r\f\v";
  std::size_t pos = text.find_first_not_of(kSpace);
  while (pos != std::string_view::npos) {
    const std::size_t end = text.find_first_of(kSpace, pos);
    out.emplace_back(text.substr(pos, end == std::string_view::npos
                                          ? std::string_view::npos
                                          : end - pos));
    pos = text.find_first_not_of(kSpace, end);
  }
  return out;
}

inline std::string join(std::span<const std::string> tokens,
                        std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

inline Sequence encode(const Vocabulary& vocab,
                       std::span<const std::string> tokens) {
  Sequence out;
  out.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const TokenId* id = vocab.find(tokens[i]);
    if (!id) throw UnknownToken(tokens[i], i);
    out.push_back(*id);
  }
  return out;
}

inline std::vector<std::string> decode(const Vocabulary& vocab,
                                       std::span<const TokenId> ids) {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId id : ids) out.push_back(vocab.token(id));
  return out;
}

struct DatasetItem {
  std::string id;
  std::vector<std::string> source;
  std::vector<std::vector<std::string>> references;

  // Key under which a model looks up source-conditioned rows.
  std::string source_key() const { return join(source); }
};

}  // namespace nbest
