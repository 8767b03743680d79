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
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "nbest/errors.hpp"
#include "nbest/model.hpp"
#include "nbest/sequence.hpp"

namespace nbest {

/// SplitMix64 (Steele, Lea & Flood). 64-bit state, one add and two
/// xor-shift-multiply rounds per output. All synthetic randomness is drawn
/// from this generator so that models are reproducible bit for bit.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_;
};

namespace detail {

// Marsaglia polar method. The spare variate is discarded so every call
// consumes a whole number of rejection rounds.
inline double standard_normal(SplitMix64& rng) {
  for (;;) {
    const double u = 2.0 * rng.uniform() - 1.0;
    const double v = 2.0 * rng.uniform() - 1.0;
    const double s = u * u + v * v;
    if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
  }
}

// Marsaglia & Tsang (2000); shape < 1 uses the Gamma(a+1) * U^(1/a) boost.
inline double gamma_variate(SplitMix64& rng, double shape) {
  if (shape < 1.0) {
    const double g = gamma_variate(rng, shape + 1.0);
    return g * std::pow(rng.uniform_open(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = standard_normal(rng);
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform_open();
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

inline std::string padded(std::size_t i, std::size_t count) {
  std::string digits = std::to_string(i);
  const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
  return std::string(width - std::min(width, digits.size()), '0') + digits;
}

}  // namespace detail

/// Symmetric Dirichlet(alpha) draw of dimension k via normalized Gamma draws.
inline std::vector<double> dirichlet(SplitMix64& rng, std::size_t k, double alpha) {
  std::vector<double> out(k);
  double sum = 0.0;
  for (auto& g : out) {
    g = detail::gamma_variate(rng, alpha);
    sum += g;
  }
  if (!(sum > 0.0)) return std::vector<double>(k, 1.0 / static_cast<double>(k));
  for (auto& g : out) g /= sum;
  return out;
}

struct SynthSpec {
  std::size_t vocab_size = 5;  // excluding eos
  std::size_t max_len = 6;
  std::size_t context_order = 1;
  double alpha = 1.0;
  std::uint64_t seed = 0;
  std::size_t num_sources = 1;
};

inline constexpr std::size_t kMaxSynthRows = 5'000'000;

inline std::size_t synth_row_count(const SynthSpec& spec) {
  const std::size_t longest = std::min(spec.context_order, spec.max_len - 1);
  std::size_t per_source = 0, layer = 1;
  for (std::size_t len = 0; len <= longest; ++len) {
    per_source += layer;
    if (per_source > kMaxSynthRows) return kMaxSynthRows + 1;
    layer *= spec.vocab_size;
  }
  if (per_source > kMaxSynthRows / spec.num_sources) return kMaxSynthRows + 1;
  return per_source * spec.num_sources;
}

inline void validate(const SynthSpec& spec) {
  if (spec.vocab_size < 2) throw InvalidArgument("vocab_size must be at least 2");
  if (spec.max_len < 1) throw InvalidArgument("max_len must be at least 1");
  if (!(spec.alpha > 0.0) || !std::isfinite(spec.alpha))
    throw InvalidArgument("alpha must be a positive finite number");
  if (spec.num_sources < 1) throw InvalidArgument("num_sources must be at least 1");
  if (synth_row_count(spec) > kMaxSynthRows)
    throw InvalidArgument("synthetic model would exceed " +
                          std::to_string(kMaxSynthRows) + " rows");
}

inline std::string synth_token(std::size_t i) { return "w" + std::to_string(i); }

inline std::string synth_source(std::size_t i, std::size_t count) {
  return "src" + detail::padded(i, count);
}

/// Model document with one Dirichlet(alpha) row per (source, target context
/// of length <= context_order reachable before max_len). Draw order: sources
/// ascending, then context length ascending, then contexts in odometer order
/// over token ids; each row draws vocab ids 0..V (eos last).
inline ModelDocument synth_document(const SynthSpec& spec) {
  validate(spec);
  ModelDocument doc;
  for (std::size_t i = 0; i < spec.vocab_size; ++i) doc.vocab.push_back(synth_token(i));
  doc.vocab.push_back(doc.eos);
  doc.context_order = spec.context_order;
  doc.max_len = spec.max_len;
  const std::size_t dim = doc.vocab.size();
  for (const auto& t : doc.vocab) doc.fallback[t] = 1.0 / static_cast<double>(dim);

  SplitMix64 rng(spec.seed);
  const std::size_t longest = std::min(spec.context_order, spec.max_len - 1);
  for (std::size_t s = 0; s < spec.num_sources; ++s) {
    auto& contexts = doc.sources[synth_source(s, spec.num_sources)];
    for (std::size_t len = 0; len <= longest; ++len) {
      std::vector<std::size_t> odometer(len, 0);
      for (;;) {
        std::vector<std::string> ctx;
        for (std::size_t id : odometer) ctx.push_back(doc.vocab[id]);
        const auto probs = dirichlet(rng, dim, spec.alpha);
        ProbRow row;
        for (std::size_t k = 0; k < dim; ++k) row[doc.vocab[k]] = probs[k];
        contexts[join(ctx)] = std::move(row);

        std::size_t pos = len;
        while (pos > 0 && ++odometer[pos - 1] == spec.vocab_size) odometer[--pos] = 0;
        if (pos == 0) break;
      }
    }
  }
  return doc;
}

inline TableModel gen_synthetic(const SynthSpec& spec) {
  return TableModel(synth_document(spec));
}

/// Ancestral sample of one complete sequence; eos is not included in the
/// returned tokens.
template <SequenceModel Model>
std::vector<std::string> sample_sequence(const Model& model, std::string_view source,
                                         SplitMix64& rng) {
  const Vocabulary& vocab = model.vocab();
  Sequence prefix;
  for (;;) {
    const auto row = model.score_step(source, prefix);
    const double u = rng.uniform();
    double cumulative = 0.0;
    // A rounding shortfall in the cumulative sum lands on the last supported token.
    TokenId pick = vocab.eos();
    for (TokenId w = 0; w < row.size(); ++w) {
      if (row[w] == kNegInf) continue;
      pick = w;
      cumulative += std::exp(row[w]);
      if (u < cumulative) break;
    }
    if (pick == vocab.eos()) break;
    prefix.push_back(pick);
  }
  return decode(vocab, prefix);
}

// Stream constant separating dataset sampling from model generation.
inline constexpr std::uint64_t kDatasetStream = 0xd1b54a32d192ed03ULL;

/// Companion dataset: one item per synthetic source with references sampled
/// from the model itself.
inline std::vector<DatasetItem> synth_dataset(const TableModel& model, const SynthSpec& spec,
                                              std::size_t refs_per_source) {
  SplitMix64 rng(spec.seed ^ kDatasetStream);
  std::vector<DatasetItem> items;
  items.reserve(spec.num_sources);
  for (std::size_t s = 0; s < spec.num_sources; ++s) {
    DatasetItem item;
    item.id = "s" + detail::padded(s, spec.num_sources);
    item.source = {synth_source(s, spec.num_sources)};
    for (std::size_t r = 0; r < refs_per_source; ++r)
      item.references.push_back(sample_sequence(model, item.source.front(), rng));
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace nbest
