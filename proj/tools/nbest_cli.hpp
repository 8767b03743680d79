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
#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "nbest/nbest.hpp"

namespace nbest::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUser = 2;

struct RunConfig {
  std::string model_path;
  std::string dataset_path;
  std::string out_path;
  std::string method = "greedy";
  std::size_t beam_size = 4;
  std::size_t nbest = 1;
  std::string nbest_list = "1";
  std::uint64_t max_states = kDefaultMaxStates;  // 0 = unlimited
  std::size_t seed_with_beam = 0;                // 0 = off
  std::string buckets = "10,20,30,40";
  std::size_t jobs = 1;
  bool renormalize = false;

  SynthSpec synth;
  std::size_t refs_per_source = 4;

  std::string analyze_mode;
  std::string which = "errors";
  std::vector<std::string> inputs;
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `jobs` threads; results keep index
// order. The first exception by index is rethrown.
template <class T, class Fn>
std::vector<T> parallel_map(std::size_t count, std::size_t jobs, Fn fn) {
  std::vector<T> out(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        out[i] = fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(count, 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& field : split_csv_line(text)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw InvalidArgument("malformed number list '" + text + "'");
    }
  }
  return out;
}

inline std::vector<std::size_t> parse_count_list(const std::string& text) {
  std::vector<std::size_t> out;
  for (double v : parse_number_list(text)) {
    if (v < 1 || v != static_cast<double>(static_cast<std::size_t>(v)))
      throw InvalidArgument("expected positive integers in '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

// "report.csv" -> "report" + suffix; other names get the suffix appended.
inline std::string sibling(const std::string& out, const std::string& suffix) {
  const std::string ext = ".csv";
  if (out.size() > ext.size() && out.compare(out.size() - ext.size(), ext.size(), ext) == 0)
    return out.substr(0, out.size() - ext.size()) + suffix;
  return out + suffix;
}

inline SearchBudget budget_of(std::uint64_t max_states) {
  return max_states == 0 ? SearchBudget::unlimited() : SearchBudget::of(max_states);
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

inline int cmd_uncertainty(const RunConfig& cfg) {
  detail::Stopwatch clock;
  const auto items = read_dataset(cfg.dataset_path);
  const auto boundaries = detail::parse_number_list(cfg.buckets);

  std::vector<UncertaintyRecord> records;
  std::size_t skipped = 0;
  for (const auto& item : items) {
    try {
      records.push_back(make_uncertainty_record(item.id, item.references));
    } catch (const TooFewReferences& e) {
      std::cerr << "warning: item '" << item.id << "' skipped: " << e.what() << '\n';
      ++skipped;
    } catch (const AllEmptyReferences& e) {
      std::cerr << "warning: item '" << item.id << "' skipped: " << e.what() << '\n';
      ++skipped;
    }
  }

  std::vector<std::pair<double, double>> by_length;
  for (const auto& r : records) by_length.emplace_back(r.avg_ref_len, r.u);
  const auto buckets = bucketize(by_length, boundaries);

  auto out = nbest::detail::open_output(cfg.out_path);
  write_uncertainty_csv(records, out);
  auto bucket_out = nbest::detail::open_output(detail::sibling(cfg.out_path, ".buckets.csv"));
  write_bucket_csv(buckets, bucket_out);

  std::cout << "uncertainty: items=" << items.size() << " scored=" << records.size()
            << " warnings=" << skipped << " wall=" << clock.seconds() << "s\n";
  return kExitOk;
}

namespace detail {

template <class Search>
int run_search(const RunConfig& cfg, const char* label, Search search) {
  Stopwatch clock;
  const TableModel model = load_model(cfg.model_path, cfg.renormalize);
  const auto items = read_dataset(cfg.dataset_path);
  auto results = parallel_map<SearchResult>(items.size(), cfg.jobs, [&](std::size_t i) {
    SearchResult r = search(model, items[i].source_key());
    r.id = items[i].id;
    return r;
  });
  write_results(results, model.vocab(), cfg.out_path);
  const auto unterminated = std::count_if(results.begin(), results.end(),
                                          [](const SearchResult& r) { return !r.terminated; });
  std::cout << label << ": items=" << results.size() << " unterminated=" << unterminated
            << " wall=" << clock.seconds() << "s\n";
  return kExitOk;
}

}  // namespace detail

inline int cmd_decode(const RunConfig& cfg) {
  if (cfg.method == "greedy")
    return detail::run_search(cfg, "decode", [](const TableModel& m, const std::string& src) {
      return greedy(m, src);
    });
  if (cfg.method == "beam") {
    if (cfg.beam_size == 0) throw InvalidArgument("--beam-size must be at least 1");
    return detail::run_search(cfg, "decode", [&](const TableModel& m, const std::string& src) {
      return beam(m, src, cfg.beam_size);
    });
  }
  throw InvalidArgument("--method must be greedy or beam");
}

inline int cmd_exact(const RunConfig& cfg) {
  if (cfg.nbest == 0) throw InvalidArgument("--nbest must be at least 1");
  const SearchBudget budget = detail::budget_of(cfg.max_states);
  return detail::run_search(cfg, "exact", [&](const TableModel& m, const std::string& src) {
    std::vector<Hypothesis> seeds;
    if (cfg.seed_with_beam > 0) seeds = beam(m, src, cfg.seed_with_beam).hypotheses;
    SearchResult r = nbest_dfs(m, src, cfg.nbest, budget, seeds);
    if (cfg.seed_with_beam > 0) r.settings.seed_with_beam = cfg.seed_with_beam;
    return r;
  });
}

namespace detail {

inline void require_inputs(const RunConfig& cfg, std::size_t n, const char* usage) {
  if (cfg.inputs.size() != n)
    throw InvalidArgument(std::string("analyze ") + cfg.analyze_mode + " expects " + usage);
}

inline int analyze_errors(const RunConfig& cfg) {
  require_inputs(cfg, 2, "APPROX.jsonl EXACT.jsonl");
  TokenInterner interner;
  const auto approx = read_results(cfg.inputs[0], interner);
  const auto exact = read_results(cfg.inputs[1], interner);
  const auto report = count_search_errors(approx, exact);

  auto out = nbest::detail::open_output(cfg.out_path);
  out << "total_items,search_errors,error_rate,unterminated_excluded\n"
      << report.total_items << ',' << report.search_errors << ','
      << format_double(report.error_rate) << ',' << report.unterminated_excluded << '\n';
  auto items = nbest::detail::open_output(sibling(cfg.out_path, ".items.jsonl"));
  for (const auto& it : report.per_item) {
    nlohmann::ordered_json j;
    j["id"] = it.id;
    j["is_error"] = it.is_error;
    j["approx_logprob"] = it.approx_logprob;
    j["exact_logprob"] = it.exact_logprob;
    items << j.dump() << '\n';
  }
  std::cout << "analyze errors: items=" << report.total_items << " errors=" << report.search_errors
            << " excluded=" << report.unterminated_excluded << '\n';
  return kExitOk;
}

inline int analyze_mass(const RunConfig& cfg) {
  require_inputs(cfg, 1, "RESULTS.jsonl");
  TokenInterner interner;
  const auto results = read_results(cfg.inputs[0], interner);
  const auto ns = parse_count_list(cfg.nbest_list);

  auto out = nbest::detail::open_output(cfg.out_path);
  auto hist = nbest::detail::open_output(sibling(cfg.out_path, ".hist.csv"));
  auto items = nbest::detail::open_output(sibling(cfg.out_path, ".items.jsonl"));
  out << "n,items,mean_mass\n";
  hist << "n,band_lo,band_hi,count\n";
  for (std::size_t n : ns) {
    const auto report = mass_coverage(results, n);
    out << n << ',' << report.per_item.size() << ',' << format_double(report.mean_mass) << '\n';
    for (std::size_t b = 0; b < kMassBands; ++b)
      hist << n << ',' << format_double(static_cast<double>(b) / 10.0) << ','
           << format_double(static_cast<double>(b + 1) / 10.0) << ',' << report.mass_histogram[b]
           << '\n';
    for (const auto& it : report.per_item) {
      nlohmann::ordered_json j;
      j["id"] = it.id;
      j["n"] = n;
      j["n_used"] = it.n_used;
      j["cumulative_mass"] = it.cumulative_mass;
      items << j.dump() << '\n';
    }
  }
  std::cout << "analyze mass: items=" << results.size() << " lists=" << ns.size() << '\n';
  return kExitOk;
}

inline int analyze_gap(const RunConfig& cfg) {
  require_inputs(cfg, 2, "BEAM.jsonl EXACT.jsonl");
  TokenInterner interner;
  const auto beam_results = read_results(cfg.inputs[0], interner);
  const auto exact = read_results(cfg.inputs[1], interner);
  const auto report = mass_gap(beam_results, exact, cfg.nbest);

  auto out = nbest::detail::open_output(cfg.out_path);
  out << "n,items,mean_gap,unterminated_excluded\n"
      << report.n << ',' << report.per_item.size() << ',' << format_double(report.mean_gap) << ','
      << report.unterminated_excluded << '\n';
  auto items = nbest::detail::open_output(sibling(cfg.out_path, ".items.jsonl"));
  for (const auto& it : report.per_item) {
    nlohmann::ordered_json j;
    j["id"] = it.id;
    j["exact_mass"] = it.exact_mass;
    j["beam_mass"] = it.beam_mass;
    j["gap"] = it.gap;
    items << j.dump() << '\n';
  }
  std::cout << "analyze gap: items=" << report.per_item.size()
            << " mean_gap=" << format_double(report.mean_gap) << '\n';
  return kExitOk;
}

inline int analyze_correlate(const RunConfig& cfg) {
  if (cfg.inputs.empty()) throw InvalidArgument("analyze correlate expects UNCERTAINTY.csv RESULTS...");
  const auto records = read_uncertainty_csv(cfg.inputs[0]);
  TokenInterner interner;
  ItemValues values;
  CorrelationTarget which;
  if (cfg.which == "errors") {
    require_inputs(cfg, 3, "UNCERTAINTY.csv APPROX.jsonl EXACT.jsonl");
    which = CorrelationTarget::kErrors;
    const auto approx = read_results(cfg.inputs[1], interner);
    const auto exact = read_results(cfg.inputs[2], interner);
    values = error_values(count_search_errors(approx, exact));
  } else if (cfg.which == "states") {
    require_inputs(cfg, 2, "UNCERTAINTY.csv EXACT.jsonl");
    which = CorrelationTarget::kStates;
    values = state_values(read_results(cfg.inputs[1], interner));
  } else if (cfg.which == "mass") {
    require_inputs(cfg, 2, "UNCERTAINTY.csv RESULTS.jsonl");
    which = CorrelationTarget::kMass;
    values = mass_values(mass_coverage(read_results(cfg.inputs[1], interner), cfg.nbest));
  } else {
    throw InvalidArgument("--which must be errors, states or mass");
  }
  const auto report = correlate(records, values, which);

  auto out = nbest::detail::open_output(cfg.out_path);
  out << "which,pairs,rho\n"
      << to_string(report.which) << ',' << report.pairs.size() << ',' << format_double(report.rho)
      << '\n';
  auto pairs = nbest::detail::open_output(sibling(cfg.out_path, ".pairs.csv"));
  pairs << "id,u,value\n";
  for (const auto& p : report.pairs)
    pairs << csv_field(p.id) << ',' << format_double(p.u) << ',' << format_double(p.value) << '\n';
  std::cout << "analyze correlate: which=" << to_string(report.which)
            << " pairs=" << report.pairs.size() << " rho=" << format_double(report.rho) << '\n';
  return kExitOk;
}

}  // namespace detail

inline int cmd_analyze(const RunConfig& cfg) {
  if (cfg.analyze_mode == "errors") return detail::analyze_errors(cfg);
  if (cfg.analyze_mode == "mass") return detail::analyze_mass(cfg);
  if (cfg.analyze_mode == "gap") return detail::analyze_gap(cfg);
  if (cfg.analyze_mode == "correlate") return detail::analyze_correlate(cfg);
  throw InvalidArgument("analyze mode must be errors, mass, gap or correlate");
}

inline int cmd_synth(const RunConfig& cfg) {
  detail::Stopwatch clock;
  const ModelDocument doc = synth_document(cfg.synth);
  const TableModel model(doc);
  save_model(doc, cfg.model_path);
  write_dataset(synth_dataset(model, cfg.synth, cfg.refs_per_source), cfg.dataset_path);
  std::cout << "synth: sources=" << cfg.synth.num_sources << " rows=" << model.num_rows() - 2
            << " wall=" << clock.seconds() << "s\n";
  return kExitOk;
}

/// Entry point shared by the binary and the tests. Exit codes: 0 success,
/// 1 internal failure, 2 user or input error.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"Exact and approximate search over autoregressive sequence models"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* unc = app.add_subcommand("uncertainty", "Per-item uncertainty u and length buckets");
  unc->add_option("--dataset", cfg.dataset_path, "Dataset JSONL")->required();
  unc->add_option("--out", cfg.out_path, "Per-item CSV (buckets go to <stem>.buckets.csv)")->required();
  unc->add_option("--buckets", cfg.buckets, "Bucket boundaries, comma separated");

  auto add_model_flags = [&](CLI::App* sub) {
    sub->add_option("--model", cfg.model_path, "Model JSON")->required();
    sub->add_option("--dataset", cfg.dataset_path, "Dataset JSONL")->required();
    sub->add_option("--out", cfg.out_path, "Result JSONL")->required();
    sub->add_option("--jobs", cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--renormalize", cfg.renormalize, "Rescale rows that do not sum to 1");
  };

  auto* dec = app.add_subcommand("decode", "Greedy or beam search");
  add_model_flags(dec);
  dec->add_option("--method", cfg.method, "greedy | beam");
  dec->add_option("--beam-size", cfg.beam_size, "Beam size");

  auto* ex = app.add_subcommand("exact", "Exact n-best depth-first search");
  add_model_flags(ex);
  ex->add_option("--nbest", cfg.nbest, "Size of the n-best list");
  ex->add_option("--max-states", cfg.max_states, "State budget (0 = unlimited)");
  ex->add_option("--seed-with-beam", cfg.seed_with_beam, "Seed the queue with a beam search of this size");

  auto* an = app.add_subcommand("analyze", "Search-error, mass, gap and correlation reports");
  an->add_option("mode", cfg.analyze_mode, "errors | mass | gap | correlate")->required();
  an->add_option("inputs", cfg.inputs, "Input files")->required();
  an->add_option("--out", cfg.out_path, "Report CSV")->required();
  an->add_option("--nbest", cfg.nbest_list, "n (comma list for mass)");
  an->add_option("--which", cfg.which, "correlate target: errors | states | mass");

  auto* syn = app.add_subcommand("synth", "Generate a synthetic model and dataset");
  syn->add_option("--model", cfg.model_path, "Output model JSON")->required();
  syn->add_option("--dataset", cfg.dataset_path, "Output dataset JSONL")->required();
  syn->add_option("--vocab-size", cfg.synth.vocab_size, "Tokens excluding eos");
  syn->add_option("--max-len", cfg.synth.max_len, "Forced eos after this many tokens");
  syn->add_option("--context-order", cfg.synth.context_order, "Target context length");
  syn->add_option("--alpha", cfg.synth.alpha, "Dirichlet concentration");
  syn->add_option("--seed", cfg.synth.seed, "Random seed");
  syn->add_option("--num-sources", cfg.synth.num_sources, "Number of sources");
  syn->add_option("--refs-per-source", cfg.refs_per_source, "References sampled per source");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUser;
  }

  try {
    if (*unc) return cmd_uncertainty(cfg);
    if (*dec) return cmd_decode(cfg);
    if (*ex) return cmd_exact(cfg);
    if (*an) {
      if (cfg.analyze_mode != "mass") {
        const auto ns = detail::parse_count_list(cfg.nbest_list);
        if (ns.size() != 1) throw InvalidArgument("--nbest takes a single value here");
        cfg.nbest = ns.front();
      }
      return cmd_analyze(cfg);
    }
    if (*syn) return cmd_synth(cfg);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUser;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

inline int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"nbest"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace nbest::cli
