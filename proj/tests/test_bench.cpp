// Copyright 2026  speechchain authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "speechchain/bench.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace speechchain {
namespace {

std::string temp_dir(const std::string& name) {
  static int counter = 0;
  return ::testing::TempDir() + "bench_" + std::to_string(getpid()) + "_" +
         std::to_string(counter++) + "_" + name;
}

// A canned runner: metric values looked up by (experiment, seed).
bench::RunFn canned(std::map<std::string, std::map<uint64_t, bench::RunOutcome>>
                        table) {
  return [table](const bench::ExperimentSpec& spec, uint64_t seed,
                 const std::string&) { return table.at(spec.name).at(seed); };
}

bench::RunOutcome ok(double cer, double mel) {
  bench::RunOutcome o;
  o.ok = true;
  o.dev_cer_percent = cer;
  o.dev_mel_mse = mel;
  return o;
}

TEST(StandardMatrix, HasOneBaselineAndBothWeightsUnderBothModes) {
  auto specs = bench::standard_matrix();
  ASSERT_EQ(specs.size(), 5u);
  int baselines = 0;
  std::set<std::pair<double, std::string>> grid;
  std::set<std::string> names;
  for (const auto& s : specs) {
    names.insert(s.name);
    if (s.baseline) {
      ++baselines;
      continue;
    }
    EXPECT_DOUBLE_EQ(s.beta, 1.0);
    grid.insert({s.alpha, s.generation_mode});
  }
  EXPECT_EQ(baselines, 1);
  EXPECT_EQ(names.size(), 5u);
  EXPECT_TRUE(grid.count({0.25, "greedy"}));
  EXPECT_TRUE(grid.count({0.5, "greedy"}));
  EXPECT_TRUE(grid.count({0.25, "beam"}));
  EXPECT_TRUE(grid.count({0.5, "beam"}));
}

TEST(RunMatrix, MediansDirectionsAndFilesOnAPassingGrid) {
  std::vector<bench::ExperimentSpec> specs = {
      {"baseline-supervised", true, 1.0, 0.0, "greedy", 5},
      {"chain-greedy-a0.25", false, 0.25, 1.0, "greedy", 5},
  };
  std::map<std::string, std::map<uint64_t, bench::RunOutcome>> table;
  table["baseline-supervised"] = {
      {1, ok(12.0, 0.50)}, {2, ok(10.0, 0.52)}, {3, ok(11.0, 0.48)}};
  table["chain-greedy-a0.25"] = {
      {1, ok(6.0, 0.50)}, {2, ok(7.0, 0.40)}, {3, ok(5.0, 0.45)}};
  std::string dir = temp_dir("pass");
  bench::MatrixResult r =
      bench::run_matrix(specs, {1, 2, 3}, dir, canned(table));

  EXPECT_TRUE(r.runs_ok);
  EXPECT_TRUE(r.directions_ok);
  ASSERT_EQ(r.experiments.size(), 2u);
  EXPECT_DOUBLE_EQ(r.experiments[0].median_cer_percent, 11.0);
  EXPECT_DOUBLE_EQ(r.experiments[1].median_cer_percent, 6.0);
  EXPECT_DOUBLE_EQ(r.experiments[1].median_mel_mse, 0.45);

  // Baseline row keeps its coefficient and generation cells empty.
  EXPECT_NE(r.markdown.find("| baseline-supervised |  |  |  | 11.00 |"),
            std::string::npos)
      << r.markdown;
  EXPECT_NE(r.markdown.find("| chain-greedy-a0.25 | 0.25 | 1 | greedy |"),
            std::string::npos)
      << r.markdown;
  EXPECT_NE(r.markdown.find("overall: PASS"), std::string::npos);

  // CSV: header + (2 experiments x (3 seeds + 1 median row)).
  EXPECT_EQ(std::count(r.csv.begin(), r.csv.end(), '\n'), 1 + 2 * 4);
  EXPECT_NE(r.csv.find("baseline-supervised,median,,,,"), std::string::npos)
      << r.csv;
  EXPECT_TRUE(std::filesystem::exists(r.markdown_path));
  EXPECT_TRUE(std::filesystem::exists(r.csv_path));
}

TEST(RunMatrix, EvenSeedCountUsesMiddleMean) {
  std::vector<bench::ExperimentSpec> specs = {
      {"baseline-supervised", true, 1.0, 0.0, "greedy", 5},
      {"chain", false, 0.5, 1.0, "greedy", 5},
  };
  std::map<std::string, std::map<uint64_t, bench::RunOutcome>> table;
  table["baseline-supervised"] = {{1, ok(10.0, 1.0)}, {2, ok(20.0, 1.0)}};
  table["chain"] = {{1, ok(2.0, 1.0)}, {2, ok(4.0, 1.0)}};
  bench::MatrixResult r =
      bench::run_matrix(specs, {1, 2}, temp_dir("even"), canned(table));
  EXPECT_DOUBLE_EQ(r.experiments[0].median_cer_percent, 15.0);
  EXPECT_DOUBLE_EQ(r.experiments[1].median_cer_percent, 3.0);
}

TEST(RunMatrix, CrashedCellGetsStatusAndFailsTheMatrix) {
  std::vector<bench::ExperimentSpec> specs = {
      {"baseline-supervised", true, 1.0, 0.0, "greedy", 5},
      {"chain", false, 0.5, 1.0, "greedy", 5},
  };
  auto runner = [](const bench::ExperimentSpec& spec, uint64_t seed,
                   const std::string&) -> bench::RunOutcome {
    if (!spec.baseline && seed == 2) throw DataError("manifest went missing");
    return ok(spec.baseline ? 10.0 : 5.0, 1.0);
  };
  bench::MatrixResult r =
      bench::run_matrix(specs, {1, 2, 3}, temp_dir("crash"), runner);
  EXPECT_FALSE(r.runs_ok);
  EXPECT_FALSE(r.directions_ok);
  EXPECT_NE(r.markdown.find("failed: manifest went missing"),
            std::string::npos)
      << r.markdown;
  EXPECT_NE(r.markdown.find("overall: FAIL"), std::string::npos);
  // The two surviving chain runs still report their numbers in the CSV.
  EXPECT_NE(r.csv.find("chain,1,"), std::string::npos);
  EXPECT_NE(r.csv.find("chain,3,"), std::string::npos);
}

TEST(RunMatrix, WorseChainMetricsFailTheDirectionCheck) {
  std::vector<bench::ExperimentSpec> specs = {
      {"baseline-supervised", true, 1.0, 0.0, "greedy", 5},
      {"chain", false, 0.5, 1.0, "greedy", 5},
  };
  std::map<std::string, std::map<uint64_t, bench::RunOutcome>> table;
  table["baseline-supervised"] = {{7, ok(10.0, 1.0)}};
  table["chain"] = {{7, ok(12.0, 1.0)}};  // higher error than the baseline
  bench::MatrixResult r =
      bench::run_matrix(specs, {7}, temp_dir("worse"), canned(table));
  EXPECT_TRUE(r.runs_ok);
  EXPECT_FALSE(r.directions_ok);
  ASSERT_EQ(r.assertion_lines.size(), 1u);
  EXPECT_NE(r.assertion_lines[0].find("FAIL"), std::string::npos);
}

TEST(RunMatrix, RunDirectoriesFollowExperimentAndSeed) {
  std::vector<bench::ExperimentSpec> specs = {
      {"baseline-supervised", true, 1.0, 0.0, "greedy", 5},
  };
  std::vector<std::string> seen;
  auto runner = [&seen](const bench::ExperimentSpec&, uint64_t,
                        const std::string& run_dir) {
    seen.push_back(run_dir);
    return ok(1.0, 1.0);
  };
  std::string dir = temp_dir("dirs");
  bench::run_matrix(specs, {4, 9}, dir, runner);
  ASSERT_EQ(seen.size(), 2u);
  EXPECT_TRUE(seen[0].ends_with("baseline-supervised/4"));
  EXPECT_TRUE(seen[1].ends_with("baseline-supervised/9"));
  EXPECT_TRUE(std::filesystem::is_directory(seen[0]));
}

TEST(RunMatrix, RequiresExactlyOneBaseline) {
  std::vector<bench::ExperimentSpec> none = {
      {"chain", false, 0.5, 1.0, "greedy", 5}};
  auto runner = [](const bench::ExperimentSpec&, uint64_t,
                   const std::string&) { return ok(1.0, 1.0); };
  EXPECT_THROW(bench::run_matrix(none, {1}, temp_dir("nobase"), runner),
               ConfigError);
  EXPECT_THROW(bench::run_matrix({}, {1}, temp_dir("empty"), runner),
               ConfigError);
  std::vector<bench::ExperimentSpec> good = {
      {"baseline-supervised", true, 1.0, 0.0, "greedy", 5}};
  EXPECT_THROW(bench::run_matrix(good, {}, temp_dir("noseeds"), runner),
               ConfigError);
}

}  // namespace
}  // namespace speechchain
