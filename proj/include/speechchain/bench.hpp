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

// Comparison harness: runs a supervised baseline and a grid of closed-loop
// configurations over several seeds, tabulates dev metrics, and checks the
// claimed orderings (closed-loop error rate below the baseline, mel
// reconstruction no worse). Assertions are inequalities on medians — never
// absolute numbers, which are corpus-bound.

#ifndef SPEECHCHAIN_BENCH_HPP_
#define SPEECHCHAIN_BENCH_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "speechchain/errors.hpp"

namespace speechchain {
namespace bench {

struct ExperimentSpec {
  std::string name;
  bool baseline = false;  // paired-only row; coefficient cells render empty
  double alpha = 1.0;
  double beta = 0.0;
  std::string generation_mode = "greedy";
  int64_t beam_size = 5;
};

// The default grid: a paired-only baseline plus the closed loop at both
// supervised weights, under greedy and beam-5 generation.
inline std::vector<ExperimentSpec> standard_matrix() {
  std::vector<ExperimentSpec> specs;
  specs.push_back({"baseline-supervised", true, 1.0, 0.0, "greedy", 5});
  specs.push_back({"chain-greedy-a0.25", false, 0.25, 1.0, "greedy", 5});
  specs.push_back({"chain-greedy-a0.5", false, 0.5, 1.0, "greedy", 5});
  specs.push_back({"chain-beam5-a0.25", false, 0.25, 1.0, "beam", 5});
  specs.push_back({"chain-beam5-a0.5", false, 0.5, 1.0, "beam", 5});
  return specs;
}

struct RunOutcome {
  bool ok = false;
  std::string error;  // populated when !ok
  double dev_cer_percent = std::numeric_limits<double>::quiet_NaN();
  double dev_mel_mse = std::numeric_limits<double>::quiet_NaN();
};

// Executes one (experiment, seed) cell, writing its logs under run_dir.
using RunFn = std::function<RunOutcome(const ExperimentSpec&, uint64_t seed,
                                       const std::string& run_dir)>;

struct SeedRun {
  uint64_t seed = 0;
  RunOutcome outcome;
};

struct ExperimentResult {
  ExperimentSpec spec;
  std::vector<SeedRun> runs;
  bool all_ok = false;
  double median_cer_percent = std::numeric_limits<double>::quiet_NaN();
  double median_mel_mse = std::numeric_limits<double>::quiet_NaN();
};

struct MatrixResult {
  std::vector<ExperimentResult> experiments;
  bool runs_ok = false;        // every cell finished
  bool directions_ok = false;  // every ordering assertion held
  std::vector<std::string> assertion_lines;
  std::string markdown;
  std::string csv;
  std::string markdown_path;
  std::string csv_path;
};

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::string cell_safe(std::string s) {
  for (char& c : s)
    if (c == '\n' || c == '\r' || c == '|' || c == ',') c = ';';
  if (s.size() > 120) s = s.substr(0, 117) + "...";
  return s;
}

inline std::string fixed(double v, int digits) {
  if (std::isnan(v)) return "n/a";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

inline std::string full(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string trim_number(double v) {
  // Coefficients are human-chosen values like 0.25; default formatting keeps
  // them short.
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace detail

inline MatrixResult run_matrix(const std::vector<ExperimentSpec>& specs,
                               const std::vector<uint64_t>& seeds,
                               const std::string& out_dir, const RunFn& run) {
  std::string problems;
  if (specs.empty()) problems += "no experiments given; ";
  if (seeds.empty()) problems += "no seeds given; ";
  int64_t baselines = 0;
  for (const ExperimentSpec& s : specs) baselines += s.baseline ? 1 : 0;
  if (baselines != 1)
    problems += "exactly one baseline experiment is required, got " +
                std::to_string(baselines) + "; ";
  if (!problems.empty()) throw ConfigError("experiment matrix: " + problems);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  MatrixResult result;
  result.runs_ok = true;
  for (const ExperimentSpec& spec : specs) {
    ExperimentResult er;
    er.spec = spec;
    er.all_ok = true;
    std::vector<double> cers, mels;
    for (uint64_t seed : seeds) {
      std::string run_dir =
          (fs::path(out_dir) / spec.name / std::to_string(seed)).string();
      fs::create_directories(run_dir);
      SeedRun sr;
      sr.seed = seed;
      try {
        sr.outcome = run(spec, seed, run_dir);
      } catch (const std::exception& e) {
        sr.outcome.ok = false;
        sr.outcome.error = e.what();
      }
      if (sr.outcome.ok) {
        cers.push_back(sr.outcome.dev_cer_percent);
        mels.push_back(sr.outcome.dev_mel_mse);
      } else {
        er.all_ok = false;
        result.runs_ok = false;
      }
      er.runs.push_back(std::move(sr));
    }
    er.median_cer_percent = detail::median(cers);
    er.median_mel_mse = detail::median(mels);
    result.experiments.push_back(std::move(er));
  }

  // Ordering assertions against the baseline medians.
  const ExperimentResult* baseline = nullptr;
  for (const ExperimentResult& er : result.experiments)
    if (er.spec.baseline) baseline = &er;
  result.directions_ok = true;
  if (!baseline->all_ok) {
    result.directions_ok = false;
    result.assertion_lines.push_back(
        "baseline runs failed; direction checks not evaluable");
  } else {
    for (const ExperimentResult& er : result.experiments) {
      if (er.spec.baseline) continue;
      if (!er.all_ok) {
        result.directions_ok = false;
        result.assertion_lines.push_back(er.spec.name +
                                         ": runs failed; not evaluable");
        continue;
      }
      bool cer_better = er.median_cer_percent < baseline->median_cer_percent;
      bool mel_no_worse = er.median_mel_mse <= baseline->median_mel_mse;
      if (!cer_better || !mel_no_worse) result.directions_ok = false;
      std::ostringstream line;
      line << er.spec.name << ": median dev CER "
           << detail::fixed(er.median_cer_percent, 2) << " vs baseline "
           << detail::fixed(baseline->median_cer_percent, 2) << " -> "
           << (cer_better ? "pass" : "FAIL") << "; median mel MSE "
           << detail::fixed(er.median_mel_mse, 4) << " vs "
           << detail::fixed(baseline->median_mel_mse, 4) << " -> "
           << (mel_no_worse ? "pass" : "FAIL");
      result.assertion_lines.push_back(line.str());
    }
  }

  // Markdown table; the baseline row leaves the coefficient and generation
  // cells empty.
  std::ostringstream md;
  md << "# comparison matrix\n\n";
  md << "| system | alpha | beta | gen. mode | dev CER % | dev mel MSE | "
        "status |\n";
  md << "|---|---|---|---|---|---|---|\n";
  for (const ExperimentResult& er : result.experiments) {
    std::string status = "ok";
    for (const SeedRun& sr : er.runs)
      if (!sr.outcome.ok)
        status = "failed: " + detail::cell_safe(sr.outcome.error);
    md << "| " << er.spec.name << " | ";
    if (er.spec.baseline) {
      md << " |  |  | ";
    } else {
      md << detail::trim_number(er.spec.alpha) << " | "
         << detail::trim_number(er.spec.beta) << " | "
         << er.spec.generation_mode
         << (er.spec.generation_mode == "beam"
                 ? " " + std::to_string(er.spec.beam_size)
                 : "")
         << " | ";
    }
    md << detail::fixed(er.median_cer_percent, 2) << " | "
       << detail::fixed(er.median_mel_mse, 4) << " | " << status << " |\n";
  }
  md << "\nmedians over " << seeds.size() << " seed(s)\n";
  md << "\n## direction checks\n\n";
  for (const std::string& line : result.assertion_lines)
    md << "- " << line << "\n";
  if (result.assertion_lines.empty()) md << "- (none)\n";
  md << "\noverall: "
     << (result.runs_ok && result.directions_ok ? "PASS" : "FAIL") << "\n";
  result.markdown = md.str();

  std::ostringstream csv;
  csv << "experiment,seed,alpha,beta,generation_mode,dev_cer_percent,"
         "dev_mel_mse,status\n";
  for (const ExperimentResult& er : result.experiments) {
    std::string alpha =
        er.spec.baseline ? "" : detail::trim_number(er.spec.alpha);
    std::string beta =
        er.spec.baseline ? "" : detail::trim_number(er.spec.beta);
    std::string mode = er.spec.baseline ? "" : er.spec.generation_mode;
    for (const SeedRun& sr : er.runs)
      csv << er.spec.name << "," << sr.seed << "," << alpha << "," << beta
          << "," << mode << "," << detail::full(sr.outcome.dev_cer_percent)
          << "," << detail::full(sr.outcome.dev_mel_mse) << ","
          << (sr.outcome.ok ? "ok"
                            : "failed: " + detail::cell_safe(sr.outcome.error))
          << "\n";
    csv << er.spec.name << ",median," << alpha << "," << beta << "," << mode
        << "," << detail::full(er.median_cer_percent) << ","
        << detail::full(er.median_mel_mse) << ","
        << (er.all_ok ? "ok" : "failed") << "\n";
  }
  result.csv = csv.str();

  result.markdown_path = (fs::path(out_dir) / "matrix.md").string();
  result.csv_path = (fs::path(out_dir) / "matrix.csv").string();
  std::ofstream(result.markdown_path, std::ios::trunc) << result.markdown;
  std::ofstream(result.csv_path, std::ios::trunc) << result.csv;
  return result;
}

}  // namespace bench
}  // namespace speechchain

#endif  // SPEECHCHAIN_BENCH_HPP_
