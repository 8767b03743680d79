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
#include <concepts>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbest/errors.hpp"
#include "nbest/sequence.hpp"

namespace nbest {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kNormTolerance = 1e-6;

// A locally normalized next-token model. score_step returns one natural-log
// probability per vocabulary id; once |prefix| >= max_len the row puts all
// mass on eos. Implementations must be pure and safe to call concurrently.
template <class M>
concept SequenceModel = requires(const M& m, std::string_view source,
                                 std::span<const TokenId> prefix) {
  { m.vocab() } -> std::same_as<const Vocabulary&>;
  { m.max_len() } -> std::convertible_to<std::size_t>;
  { m.score_step(source, prefix) } -> std::convertible_to<std::span<const double>>;
};

namespace detail {

inline std::vector<double> forced_eos_row(const Vocabulary& vocab) {
  std::vector<double> row(vocab.size(), kNegInf);
  row[vocab.eos()] = 0.0;
  return row;
}

inline void check_prefix(std::span<const TokenId> prefix, const Vocabulary& vocab) {
  if (!prefix.empty() && prefix.back() == vocab.eos()) throw PrefixComplete();
}

// Raw bytes of a run of ids; used as a zero-copy hash key.
inline std::string_view id_bytes(std::span<const TokenId> ids) {
  return {reinterpret_cast<const char*>(ids.data()), ids.size_bytes()};
}

}  // namespace detail

/// Every non-terminal prefix gets the same uniform row.
class UniformModel {
 public:
  UniformModel(Vocabulary vocab, std::size_t max_len)
      : vocab_(std::move(vocab)),
        max_len_(max_len),
        uniform_(vocab_.size(), std::log(1.0 / static_cast<double>(vocab_.size()))),
        forced_(detail::forced_eos_row(vocab_)) {
    if (max_len_ == 0) throw InvalidArgument("max_len must be positive");
  }

  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::size_t max_len() const noexcept { return max_len_; }

  std::span<const double> score_step(std::string_view,
                                     std::span<const TokenId> prefix) const {
    detail::check_prefix(prefix, vocab_);
    return prefix.size() >= max_len_ ? forced_ : uniform_;
  }

 private:
  Vocabulary vocab_;
  std::size_t max_len_;
  std::vector<double> uniform_;
  std::vector<double> forced_;
};

// Linear-domain row keyed by token string, as stored in model files.
using ProbRow = std::map<std::string, double>;

/// In-memory image of a model file.
struct ModelDocument {
  std::vector<std::string> vocab;
  std::string eos = "</s>";
  std::size_t context_order = 0;
  std::size_t max_len = 1;
  ProbRow fallback;
  // source id -> context key ("" for root, else last <= k tokens) -> row
  std::map<std::string, std::map<std::string, ProbRow>> sources;
};

inline nlohmann::json to_json(const ModelDocument& doc) {
  nlohmann::json j;
  j["vocab"] = doc.vocab;
  j["eos"] = doc.eos;
  j["context_order"] = doc.context_order;
  j["max_len"] = doc.max_len;
  j["fallback"] = doc.fallback;
  j["sources"] = doc.sources;
  return j;
}

inline ModelDocument model_document_from_json(const nlohmann::json& j) {
  ModelDocument doc;
  try {
    doc.vocab = j.at("vocab").get<std::vector<std::string>>();
    doc.eos = j.value("eos", std::string("</s>"));
    doc.context_order = j.at("context_order").get<std::size_t>();
    doc.max_len = j.at("max_len").get<std::size_t>();
    doc.fallback = j.at("fallback").get<ProbRow>();
    doc.sources = j.at("sources").get<std::map<std::string, std::map<std::string, ProbRow>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed model document: ") + e.what());
  }
  if (std::find(doc.vocab.begin(), doc.vocab.end(), doc.eos) == doc.vocab.end())
    doc.vocab.push_back(doc.eos);
  return doc;
}

struct Violation {
  std::string where;
  std::string message;
  // True when rescaling the row to sum 1 would repair it.
  bool normalization_only = false;

  std::string to_string() const { return where + ": " + message; }
};

namespace detail {

inline std::string describe_row(const std::string& source, const std::string& context) {
  if (source.empty()) return "fallback row";
  return "source '" + source + "' context \"" + context + "\"";
}

inline void validate_row(const ProbRow& row, const std::vector<std::string>& vocab,
                         const std::string& where, std::vector<Violation>& out) {
  double sum = 0.0;
  bool usable = true;
  for (const auto& [token, p] : row) {
    if (std::find(vocab.begin(), vocab.end(), token) == vocab.end()) {
      out.push_back({where, "unknown token '" + token + "'"});
      usable = false;
    }
    if (!std::isfinite(p) || p < 0.0) {
      out.push_back({where, "invalid probability for '" + token + "'"});
      usable = false;
    }
    sum += p;
  }
  if (usable && std::abs(sum - 1.0) > kNormTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "row sums to " << sum;
    out.push_back({where, msg.str(), sum > 0.0});
  }
}

}  // namespace detail

/// Checks a model document: tokens exist, contexts are well formed, and every
/// row normalizes within 1e-6. Violations are returned, never thrown.
inline std::vector<Violation> validate_model(const ModelDocument& doc) {
  std::vector<Violation> out;
  std::map<std::string, int> seen;
  for (const auto& t : doc.vocab) {
    if (t.empty() || t.find_first_of(" \t\n\r\f\v") != std::string::npos)
      out.push_back({"vocab", "invalid token '" + t + "'"});
    if (++seen[t] == 2) out.push_back({"vocab", "duplicate token '" + t + "'"});
  }
  if (doc.max_len == 0) out.push_back({"max_len", "must be positive"});

  detail::validate_row(doc.fallback, doc.vocab, "fallback row", out);
  for (const auto& [source, contexts] : doc.sources) {
    for (const auto& [context, row] : contexts) {
      const std::string where = detail::describe_row(source, context);
      const auto ctx_tokens = tokenize(context);
      if (ctx_tokens.size() > doc.context_order)
        out.push_back({where, "context longer than context_order"});
      for (const auto& t : ctx_tokens) {
        if (t == doc.eos)
          out.push_back({where, "context contains the end-of-sentence token"});
        else if (std::find(doc.vocab.begin(), doc.vocab.end(), t) == doc.vocab.end())
          out.push_back({where, "unknown context token '" + t + "'"});
      }
      detail::validate_row(row, doc.vocab, where, out);
    }
  }
  return out;
}

/// Finite context-table model. Lookup backs off from the last
/// min(k, |prefix|) target tokens to successively shorter suffixes, then to
/// the fallback row; sources not present in the table use the fallback row.
class TableModel {
 public:
  explicit TableModel(ModelDocument doc, bool renormalize = false)
      : doc_(std::move(doc)), vocab_(make_vocab(doc_)) {
    std::vector<std::string> fatal;
    for (const auto& v : validate_model(doc_)) {
      if (!(renormalize && v.normalization_only)) fatal.push_back(v.to_string());
    }
    if (!fatal.empty()) throw ModelValidationError(std::move(fatal));
    if (renormalize) {
      rescale(doc_.fallback);
      for (auto& [source, contexts] : doc_.sources)
        for (auto& [context, row] : contexts) rescale(row);
    }

    forced_offset_ = append_row(detail::forced_eos_row(vocab_));
    fallback_offset_ = append_row(log_row(doc_.fallback));
    for (const auto& [source, contexts] : doc_.sources) {
      auto& table = sources_[source];
      for (const auto& [context, row] : contexts) {
        const Sequence ids = encode(vocab_, tokenize(context));
        table.emplace(std::string(detail::id_bytes(ids)), append_row(log_row(row)));
      }
    }
  }

  const Vocabulary& vocab() const noexcept { return vocab_; }
  std::size_t max_len() const noexcept { return doc_.max_len; }
  std::size_t context_order() const noexcept { return doc_.context_order; }
  const ModelDocument& document() const noexcept { return doc_; }

  std::span<const double> score_step(std::string_view source,
                                     std::span<const TokenId> prefix) const {
    detail::check_prefix(prefix, vocab_);
    if (prefix.size() >= doc_.max_len) return row_at(forced_offset_);
    auto src = sources_.find(source);
    if (src == sources_.end()) return row_at(fallback_offset_);
    const std::size_t longest = std::min(doc_.context_order, prefix.size());
    for (std::size_t len = longest + 1; len-- > 0;) {
      auto it = src->second.find(detail::id_bytes(prefix.last(len)));
      if (it != src->second.end()) return row_at(it->second);
    }
    return row_at(fallback_offset_);
  }

  // Stored rows in log domain, for post-construction checks.
  std::size_t num_rows() const noexcept { return rows_.size() / vocab_.size(); }
  std::span<const double> stored_row(std::size_t i) const {
    return row_at(i * vocab_.size());
  }

 private:
  using RowIndex = std::unordered_map<std::string, std::size_t, StringHash, std::equal_to<>>;

  static Vocabulary make_vocab(const ModelDocument& doc) {
    auto it = std::find(doc.vocab.begin(), doc.vocab.end(), doc.eos);
    if (it == doc.vocab.end())
      throw InvalidArgument("vocabulary does not contain '" + doc.eos + "'");
    return Vocabulary(doc.vocab, static_cast<std::size_t>(it - doc.vocab.begin()));
  }

  static void rescale(ProbRow& row) {
    double sum = 0.0;
    for (const auto& [_, p] : row) sum += p;
    for (auto& [_, p] : row) p /= sum;
  }

  std::vector<double> log_row(const ProbRow& row) const {
    std::vector<double> out(vocab_.size(), kNegInf);
    for (const auto& [token, p] : row) out[*vocab_.find(token)] = std::log(p);
    return out;
  }

  std::size_t append_row(const std::vector<double>& row) {
    const std::size_t offset = rows_.size();
    rows_.insert(rows_.end(), row.begin(), row.end());
    return offset;
  }

  std::span<const double> row_at(std::size_t offset) const {
    return {rows_.data() + offset, vocab_.size()};
  }

  ModelDocument doc_;
  Vocabulary vocab_;
  std::vector<double> rows_;
  std::size_t forced_offset_ = 0;
  std::size_t fallback_offset_ = 0;
  std::unordered_map<std::string, RowIndex, StringHash, std::equal_to<>> sources_;
};

/// Violations of the normalization invariant among a built model's rows.
inline std::vector<Violation> validate_model(const TableModel& model) {
  std::vector<Violation> out;
  for (std::size_t i = 0; i < model.num_rows(); ++i) {
    double sum = 0.0;
    for (double lp : model.stored_row(i)) sum += std::exp(lp);
    if (std::abs(sum - 1.0) > kNormTolerance)
      out.push_back({"row " + std::to_string(i), "row sums to " + std::to_string(sum), true});
  }
  return out;
}

inline TableModel load_model(const std::string& path, bool renormalize = false) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path, 0, e.what());
  }
  return TableModel(model_document_from_json(j), renormalize);
}

inline void save_model(const ModelDocument& doc, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write model file '" + path + "'");
  out << to_json(doc).dump(1) << '\n';
}

template <SequenceModel Model>
std::span<const double> score_step(const Model& model, std::string_view source,
                                   std::span<const TokenId> prefix) {
  return model.score_step(source, prefix);
}

/// Sum of step log-probabilities along a complete sequence, accumulated left
/// to right from 0.0 (the same order every search uses).
template <SequenceModel Model>
double logprob_sequence(const Model& model, std::string_view source,
                        std::span<const TokenId> y) {
  const Vocabulary& vocab = model.vocab();
  if (!is_complete(y, vocab)) throw IncompleteSequence();
  if (y.size() > model.max_len() + 1)
    throw InvalidArgument("sequence longer than max_len + 1");
  double p = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (!vocab.contains(y[j])) throw InvalidArgument("token id out of range");
    p = p + model.score_step(source, y.first(j))[y[j]];
  }
  return p;
}

}  // namespace nbest
