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

#include <charconv>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "nbest/analysis.hpp"
#include "nbest/errors.hpp"
#include "nbest/metrics.hpp"
#include "nbest/search.hpp"
#include "nbest/sequence.hpp"

namespace nbest {

// Shortest representation that round-trips; "inf"/"-inf"/"nan" otherwise.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else if (c != '\r') {
      out.back() += c;
    }
  }
  return out;
}

namespace detail {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open '" + path + "'");
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write '" + path + "'");
  return out;
}

inline bool blank(std::string_view s) {
  return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace detail

// ---- dataset --------------------------------------------------------------

/// JSONL: {"id": str, "source": str, "references": [str, ...]} per line.
/// Blank lines are skipped; "references" may be omitted.
inline std::vector<DatasetItem> read_dataset(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<DatasetItem> items;
  std::set<std::string> ids;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::blank(line)) continue;
    DatasetItem item;
    try {
      const auto j = nlohmann::json::parse(line);
      item.id = j.at("id").get<std::string>();
      item.source = tokenize(j.at("source").get<std::string>());
      if (j.contains("references"))
        for (const auto& r : j.at("references")) item.references.push_back(tokenize(r.get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, e.what());
    }
    if (!ids.insert(item.id).second) throw ParseError(path, lineno, "duplicate id '" + item.id + "'");
    items.push_back(std::move(item));
  }
  return items;
}

inline void write_dataset(const std::vector<DatasetItem>& items, const std::string& path) {
  auto out = detail::open_output(path);
  for (const auto& item : items) {
    nlohmann::ordered_json j;
    j["id"] = item.id;
    j["source"] = join(item.source);
    auto refs = nlohmann::ordered_json::array();
    for (const auto& r : item.references) refs.push_back(join(r));
    j["references"] = std::move(refs);
    out << j.dump() << '\n';
  }
}

// ---- search results -------------------------------------------------------

inline nlohmann::ordered_json settings_json(const SearchSettings& s) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (s.beam_size) j["beam_size"] = *s.beam_size;
  if (s.n) j["n"] = *s.n;
  if (s.n) j["max_states"] = s.max_states ? nlohmann::ordered_json(*s.max_states) : nlohmann::ordered_json(nullptr);
  if (s.seed_with_beam) j["seed_with_beam"] = *s.seed_with_beam;
  return j;
}

inline std::string result_line(const SearchResult& r, const Vocabulary& vocab) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["method"] = to_string(r.method);
  j["settings"] = settings_json(r.settings);
  j["terminated"] = r.terminated;
  j["explored_states"] = r.explored_states;
  auto hyps = nlohmann::ordered_json::array();
  for (const auto& h : r.hypotheses) {
    nlohmann::ordered_json hj;
    hj["tokens"] = decode(vocab, h.tokens);
    hj["logprob"] = h.logprob;
    hyps.push_back(std::move(hj));
  }
  j["hypotheses"] = std::move(hyps);
  return j.dump();
}

inline void write_results(const std::vector<SearchResult>& results, const Vocabulary& vocab,
                          const std::string& path) {
  auto out = detail::open_output(path);
  for (const auto& r : results) out << result_line(r, vocab) << '\n';
}

/// Maps token strings from result files to ids. Share one interner between
/// files whose sequences will be compared.
class TokenInterner {
 public:
  TokenId intern(const std::string& token) {
    auto [it, inserted] = ids_.emplace(token, static_cast<TokenId>(ids_.size()));
    return it->second;
  }

 private:
  std::unordered_map<std::string, TokenId> ids_;
};

inline std::vector<SearchResult> read_results(const std::string& path, TokenInterner& interner) {
  auto in = detail::open_input(path);
  std::vector<SearchResult> results;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::blank(line)) continue;
    SearchResult r;
    try {
      const auto j = nlohmann::json::parse(line);
      r.id = j.at("id").get<std::string>();
      r.method = method_from_string(j.at("method").get<std::string>());
      const auto& s = j.at("settings");
      if (s.contains("beam_size")) r.settings.beam_size = s["beam_size"].get<std::size_t>();
      if (s.contains("n")) r.settings.n = s["n"].get<std::size_t>();
      if (s.contains("max_states") && !s["max_states"].is_null())
        r.settings.max_states = s["max_states"].get<std::uint64_t>();
      if (s.contains("seed_with_beam")) r.settings.seed_with_beam = s["seed_with_beam"].get<std::size_t>();
      r.terminated = j.at("terminated").get<bool>();
      r.explored_states = j.at("explored_states").get<std::uint64_t>();
      for (const auto& h : j.at("hypotheses")) {
        Hypothesis hyp;
        for (const auto& t : h.at("tokens")) hyp.tokens.push_back(interner.intern(t.get<std::string>()));
        hyp.logprob = h.at("logprob").get<double>();
        r.hypotheses.push_back(std::move(hyp));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, lineno, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(path, lineno, e.what());
    }
    results.push_back(std::move(r));
  }
  return results;
}

// ---- CSV reports ----------------------------------------------------------

inline void write_uncertainty_csv(const std::vector<UncertaintyRecord>& records, std::ostream& out) {
  out << "item_id,n_refs,avg_ref_len,u\n";
  for (const auto& r : records)
    out << csv_field(r.item_id) << ',' << r.n_refs << ',' << format_double(r.avg_ref_len) << ','
        << format_double(r.u) << '\n';
}

inline std::vector<UncertaintyRecord> read_uncertainty_csv(const std::string& path) {
  auto in = detail::open_input(path);
  std::vector<UncertaintyRecord> out;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(path, 1, "missing header");
  ++lineno;
  if (split_csv_line(line) != std::vector<std::string>{"item_id", "n_refs", "avg_ref_len", "u"})
    throw ParseError(path, lineno, "unexpected header");
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::blank(line)) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 4) throw ParseError(path, lineno, "expected 4 fields");
    try {
      out.push_back({f[0], std::stoul(f[1]), std::stod(f[2]), std::stod(f[3])});
    } catch (const std::exception&) {
      throw ParseError(path, lineno, "malformed number");
    }
  }
  return out;
}

inline void write_bucket_csv(const std::vector<BucketStat>& buckets, std::ostream& out) {
  out << "bucket_lo,bucket_hi,count,mean,sem\n";
  for (const auto& b : buckets)
    out << format_double(b.bucket_lo) << ',' << format_double(b.bucket_hi) << ',' << b.count << ','
        << format_double(b.mean) << ',' << format_double(b.sem) << '\n';
}

}  // namespace nbest
