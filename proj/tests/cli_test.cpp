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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "nbest/io.hpp"
#include "nbest_cli.hpp"

namespace nbest {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> csv_rows(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(split_csv_line(line));
  return rows;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nbest_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  static std::string data(const std::string& name) { return std::string(NBEST_TEST_DATA_DIR) + "/" + name; }

  static int run(std::vector<std::string> args) { return cli::run(args); }

  std::vector<SearchResult> results(const std::string& p) {
    TokenInterner interner;
    return read_results(p, interner);
  }

  fs::path dir_;
};

TEST_F(CliTest, UncertaintyReport) {
  ASSERT_EQ(run({"uncertainty", "--dataset", data("refs.jsonl"), "--out", path("u.csv")}), 0);
  const auto rows = csv_rows(path("u.csv"));
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"item_id", "n_refs", "avg_ref_len", "u"}));
  EXPECT_EQ(rows[1][0], "same");
  EXPECT_EQ(std::stod(rows[1][3]), 0.0);
  EXPECT_EQ(rows[2][0], "diff");
  EXPECT_NEAR(std::stod(rows[2][3]), 0.333333, 1e-6);

  const auto buckets = csv_rows(path("u.buckets.csv"));
  ASSERT_EQ(buckets.size(), 6u);
  EXPECT_EQ(buckets[1][2], "2");
}

TEST_F(CliTest, UncertaintySkipsSingleReferenceItems) {
  std::ofstream(path("single.jsonl")) << "{\"id\":\"a\",\"source\":\"x\",\"references\":[\"one\"]}\n"
                                      << "{\"id\":\"b\",\"source\":\"x\",\"references\":[]}\n";
  ASSERT_EQ(run({"uncertainty", "--dataset", path("single.jsonl"), "--out", path("u.csv")}), 0);
  EXPECT_EQ(csv_rows(path("u.csv")).size(), 1u);
}

TEST_F(CliTest, InputErrorsExitTwo) {
  EXPECT_EQ(run({"uncertainty", "--dataset", path("nope.jsonl"), "--out", path("u.csv")}), 2);
  std::ofstream(path("bad.jsonl")) << "{\"id\":\"a\",\"source\":\"x\"}\nnot json\n";
  EXPECT_EQ(run({"uncertainty", "--dataset", path("bad.jsonl"), "--out", path("u.csv")}), 2);
  EXPECT_EQ(run({"decode", "--model", data("garden_path.json")}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
}

TEST_F(CliTest, BinaryExitCodes) {
  const std::string bin = NBEST_CLI_PATH;
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " uncertainty --dataset " + path("missing.jsonl") + " --out " +
                                     path("u.csv") + " 2>/dev/null").c_str())),
            2);
  EXPECT_EQ(WEXITSTATUS(std::system((bin + " uncertainty --dataset " + data("refs.jsonl") + " --out " +
                                     path("u.csv") + " >/dev/null").c_str())),
            0);
}

TEST_F(CliTest, DecodeGreedyAndBeamOnGardenPath) {
  ASSERT_EQ(run({"decode", "--model", data("garden_path.json"), "--dataset", data("one_item.jsonl"), "--out",
                 path("g.jsonl"), "--method", "greedy"}),
            0);
  ASSERT_EQ(run({"decode", "--model", data("garden_path.json"), "--dataset", data("one_item.jsonl"), "--out",
                 path("b.jsonl"), "--method", "beam", "--beam-size", "2"}),
            0);
  const auto g = nlohmann::json::parse(slurp(path("g.jsonl")));
  EXPECT_EQ(g["hypotheses"][0]["tokens"], nlohmann::json({"a", "c", "</s>"}));
  EXPECT_EQ(g["method"], "greedy");
  const auto b = nlohmann::json::parse(slurp(path("b.jsonl")));
  EXPECT_EQ(b["hypotheses"][0]["tokens"], nlohmann::json({"b", "</s>"}));
  EXPECT_EQ(b["settings"]["beam_size"], 2);
  EXPECT_EQ(run({"decode", "--model", data("garden_path.json"), "--dataset", data("one_item.jsonl"), "--out",
                 path("x.jsonl"), "--method", "sampling"}),
            2);
}

TEST_F(CliTest, ValidationFailureUnlessRenormalized) {
  std::ofstream(path("off.json")) << R"({"vocab":["a","</s>"],"context_order":0,"max_len":2,
    "fallback":{"a":0.3,"</s>":0.3},"sources":{}})";
  const std::vector<std::string> base{"decode", "--model", path("off.json"), "--dataset", data("one_item.jsonl"),
                                      "--out", path("r.jsonl")};
  EXPECT_EQ(run(base), 2);
  auto fixed = base;
  fixed.push_back("--renormalize");
  EXPECT_EQ(run(fixed), 0);
}

TEST_F(CliTest, ExactSevenSequenceFixture) {
  ASSERT_EQ(run({"exact", "--model", data("seven.json"), "--dataset", data("one_item.jsonl"), "--out",
                 path("e.jsonl"), "--nbest", "3"}),
            0);
  const auto r = results(path("e.jsonl"));
  ASSERT_EQ(r[0].hypotheses.size(), 3u);
  EXPECT_NEAR(std::exp(r[0].hypotheses[0].logprob), 0.25, 1e-12);
  EXPECT_NEAR(std::exp(r[0].hypotheses[1].logprob), 0.2, 1e-12);
  EXPECT_NEAR(std::exp(r[0].hypotheses[2].logprob), 0.15, 1e-12);
  EXPECT_TRUE(r[0].terminated);

  ASSERT_EQ(run({"exact", "--model", data("seven.json"), "--dataset", data("one_item.jsonl"), "--out",
                 path("cut.jsonl"), "--nbest", "3", "--max-states", "2"}),
            0);
  EXPECT_FALSE(results(path("cut.jsonl"))[0].terminated);
}

TEST_F(CliTest, SeedingDoesNotChangeExactOutput) {
  ASSERT_EQ(run({"synth", "--model", path("m.json"), "--dataset", path("d.jsonl"), "--num-sources", "20",
                 "--alpha", "0.5", "--seed", "4"}),
            0);
  ASSERT_EQ(run({"exact", "--model", path("m.json"), "--dataset", path("d.jsonl"), "--out", path("plain.jsonl")}),
            0);
  ASSERT_EQ(run({"exact", "--model", path("m.json"), "--dataset", path("d.jsonl"), "--out", path("seeded.jsonl"),
                 "--seed-with-beam", "4"}),
            0);
  const auto plain = results(path("plain.jsonl"));
  const auto seeded = results(path("seeded.jsonl"));
  ASSERT_EQ(plain.size(), seeded.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    ASSERT_EQ(plain[i].hypotheses.size(), seeded[i].hypotheses.size());
    for (std::size_t k = 0; k < plain[i].hypotheses.size(); ++k)
      EXPECT_EQ(plain[i].hypotheses[k].logprob, seeded[i].hypotheses[k].logprob);
    EXPECT_LE(seeded[i].explored_states, plain[i].explored_states);
    EXPECT_EQ(seeded[i].settings.seed_with_beam, 4u);
  }
}

TEST_F(CliTest, AnalyzeErrorsMassAndCorrelate) {
  const auto model = data("garden_path.json");
  const auto items = data("one_item.jsonl");
  ASSERT_EQ(run({"decode", "--model", model, "--dataset", items, "--out", path("g.jsonl")}), 0);
  ASSERT_EQ(run({"exact", "--model", model, "--dataset", items, "--out", path("e.jsonl")}), 0);
  ASSERT_EQ(run({"analyze", "errors", path("g.jsonl"), path("e.jsonl"), "--out", path("err.csv")}), 0);
  const auto err = csv_rows(path("err.csv"));
  EXPECT_EQ(err[1][0], "1");
  EXPECT_EQ(err[1][1], "1");
  EXPECT_EQ(std::stod(err[1][2]), 1.0);
  EXPECT_TRUE(fs::exists(path("err.items.jsonl")));

  ASSERT_EQ(run({"exact", "--model", data("seven.json"), "--dataset", items, "--out", path("e3.jsonl"), "--nbest",
                 "3"}),
            0);
  ASSERT_EQ(run({"analyze", "mass", path("e3.jsonl"), "--nbest", "1,3", "--out", path("mass.csv")}), 0);
  const auto mass = csv_rows(path("mass.csv"));
  ASSERT_EQ(mass.size(), 3u);
  EXPECT_NEAR(std::stod(mass[1][2]), 0.25, 1e-12);
  EXPECT_NEAR(std::stod(mass[2][2]), 0.6, 1e-12);

  ASSERT_EQ(run({"analyze", "gap", path("g.jsonl"), path("e.jsonl"), "--out", path("gap.csv")}), 0);
  EXPECT_NEAR(std::stod(csv_rows(path("gap.csv"))[1][2]), 0.1, 1e-12);

  // Two items with identical results make the value column constant.
  std::ofstream(path("u.csv")) << "item_id,n_refs,avg_ref_len,u\nx1,2,1,0.5\nx2,2,1,0.7\n";
  const std::string line = slurp(path("e.jsonl"));
  std::ofstream(path("e2.jsonl")) << line << std::string(line).replace(line.find("\"x1\""), 4, "\"x2\"");
  EXPECT_EQ(run({"analyze", "correlate", "--which", "states", path("u.csv"), path("e2.jsonl"), "--out",
                 path("c.csv")}),
            2);
}

TEST_F(CliTest, AnalyzeIdMismatchExitsTwo) {
  ASSERT_EQ(run({"decode", "--model", data("garden_path.json"), "--dataset", data("one_item.jsonl"), "--out",
                 path("g.jsonl")}),
            0);
  std::ofstream(path("other.jsonl")) << R"({"id":"zz","method":"nbest_dfs","settings":{"n":1,"max_states":null},)"
                                     << R"("terminated":true,"explored_states":3,"hypotheses":[{"tokens":["b","</s>"],"logprob":-0.9}]})"
                                     << "\n";
  EXPECT_EQ(run({"analyze", "errors", path("g.jsonl"), path("other.jsonl"), "--out", path("err.csv")}), 2);
}

TEST_F(CliTest, SynthIsDeterministicAndChecksBounds) {
  const std::vector<std::string> flags{"--vocab-size", "4", "--max-len", "5", "--context-order", "2",
                                       "--alpha", "0.3", "--seed", "11", "--num-sources", "7"};
  auto a = std::vector<std::string>{"synth", "--model", path("a.json"), "--dataset", path("a.jsonl")};
  auto b = std::vector<std::string>{"synth", "--model", path("b.json"), "--dataset", path("b.jsonl")};
  a.insert(a.end(), flags.begin(), flags.end());
  b.insert(b.end(), flags.begin(), flags.end());
  ASSERT_EQ(run(a), 0);
  ASSERT_EQ(run(b), 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.jsonl")), slurp(path("b.jsonl")));
  EXPECT_EQ(run({"synth", "--model", path("c.json"), "--dataset", path("c.jsonl"), "--vocab-size", "1"}), 2);
}

TEST_F(CliTest, SynthFlatDatasetsAreMoreUncertain) {
  auto mean_u = [&](const std::string& alpha) {
    const auto tag = "a" + alpha;
    EXPECT_EQ(run({"synth", "--model", path(tag + ".json"), "--dataset", path(tag + ".jsonl"), "--alpha", alpha,
                   "--seed", "21", "--num-sources", "100"}),
              0);
    EXPECT_EQ(run({"uncertainty", "--dataset", path(tag + ".jsonl"), "--out", path(tag + ".csv")}), 0);
    double total = 0.0;
    const auto recs = read_uncertainty_csv(path(tag + ".csv"));
    for (const auto& r : recs) total += r.u;
    return total / static_cast<double>(recs.size());
  };
  EXPECT_GT(mean_u("5"), mean_u("0.05"));
}

TEST_F(CliTest, OutputIndependentOfJobs) {
  ASSERT_EQ(run({"synth", "--model", path("m.json"), "--dataset", path("d.jsonl"), "--num-sources", "40",
                 "--alpha", "1", "--seed", "8"}),
            0);
  for (const std::string cmd : {"decode", "exact"}) {
    std::vector<std::string> base{cmd, "--model", path("m.json"), "--dataset", path("d.jsonl")};
    if (cmd == "decode") base.insert(base.end(), {"--method", "beam", "--beam-size", "3"});
    else base.insert(base.end(), {"--nbest", "5"});
    auto one = base, eight = base;
    one.insert(one.end(), {"--out", path(cmd + "1.jsonl"), "--jobs", "1"});
    eight.insert(eight.end(), {"--out", path(cmd + "8.jsonl"), "--jobs", "8"});
    ASSERT_EQ(run(one), 0);
    ASSERT_EQ(run(eight), 0);
    EXPECT_EQ(slurp(path(cmd + "1.jsonl")), slurp(path(cmd + "8.jsonl")));
    const auto r = results(path(cmd + "8.jsonl"));
    ASSERT_EQ(r.size(), 40u);
    EXPECT_EQ(r.front().id, "s00");
    EXPECT_EQ(r.back().id, "s39");
  }
}

}  // namespace
}  // namespace nbest
