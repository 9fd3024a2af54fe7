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

// Evaluation metrics: character error rate (edit distance over characters),
// spectrogram mean squared error, and end-of-utterance flag accuracy, plus
// small accumulators that aggregate them over a corpus and render a report.

#ifndef SPEECHCHAIN_EVAL_HPP_
#define SPEECHCHAIN_EVAL_HPP_

#include <algorithm>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "speechchain/errors.hpp"
#include "speechchain/tensor.hpp"

namespace speechchain {
namespace eval {

// --- Edit distance and character error rate ---------------------------------------

// Unit-cost Levenshtein distance (insertions, deletions, substitutions) over
// the characters of the two strings. Two-row dynamic program, O(|a|*|b|).
inline int64_t edit_distance(const std::string& a, const std::string& b) {
  const size_t n = a.size();
  const size_t m = b.size();
  std::vector<int64_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<int64_t>(j);
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int64_t>(i);
    for (size_t j = 1; j <= m; ++j) {
      int64_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// Character error rate: edits / reference length. Expects already-normalized
// text (spaces are ordinary characters; no sentinel tokens). Can exceed 1
// when the hypothesis is much longer than the reference.
inline double cer(const std::string& hypothesis, const std::string& reference) {
  if (reference.empty())
    throw DataError("cer: reference transcript is empty");
  return static_cast<double>(edit_distance(hypothesis, reference)) /
         static_cast<double>(reference.size());
}

// Corpus-level aggregation. Micro-average pools edits over pooled reference
// length; macro-average means the per-utterance rates.
struct CerAccumulator {
  int64_t total_edits = 0;
  int64_t total_reference_chars = 0;
  double rate_sum = 0.0;
  int64_t utterances = 0;

  void add(const std::string& hypothesis, const std::string& reference) {
    if (reference.empty())
      throw DataError("cer: reference transcript is empty");
    int64_t edits = edit_distance(hypothesis, reference);
    total_edits += edits;
    total_reference_chars += static_cast<int64_t>(reference.size());
    rate_sum += static_cast<double>(edits) /
                static_cast<double>(reference.size());
    ++utterances;
  }

  double micro() const {
    if (utterances == 0) throw DataError("cer accumulator: no utterances");
    return static_cast<double>(total_edits) /
           static_cast<double>(total_reference_chars);
  }
  double macro() const {
    if (utterances == 0) throw DataError("cer accumulator: no utterances");
    return rate_sum / static_cast<double>(utterances);
  }
};

// --- Spectrogram mean squared error ------------------------------------------------

// MSE over every frame and dimension of one utterance pair. Both tensors must
// be rank-2 with identical shapes (teacher-forced evaluation guarantees this).
inline double spectrogram_mse(const ad::Tensor& predicted,
                              const ad::Tensor& gold) {
  if (predicted.rank() != 2 || gold.rank() != 2)
    throw ShapeError("spectrogram_mse: expects rank-2 inputs");
  if (predicted.shape() != gold.shape())
    throw ShapeError("spectrogram_mse: shape mismatch, predicted " +
                     std::to_string(predicted.shape()[0]) + "x" +
                     std::to_string(predicted.shape()[1]) + " vs gold " +
                     std::to_string(gold.shape()[0]) + "x" +
                     std::to_string(gold.shape()[1]));
  const auto& p = predicted.values();
  const auto& g = gold.values();
  if (p.empty()) throw DataError("spectrogram_mse: empty spectrogram");
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    double d = p[i] - g[i];
    acc += d * d;
  }
  return acc / static_cast<double>(p.size());
}

// Corpus-level aggregation. Macro-average (mean of per-utterance MSEs) is the
// headline number; micro-average (pooled squared error over pooled element
// count) is kept alongside because the two differ when lengths vary.
struct MseAccumulator {
  double per_utterance_sum = 0.0;
  double squared_error_sum = 0.0;
  int64_t element_count = 0;
  int64_t utterances = 0;

  void add(const ad::Tensor& predicted, const ad::Tensor& gold) {
    double mse = spectrogram_mse(predicted, gold);
    int64_t n = static_cast<int64_t>(predicted.values().size());
    per_utterance_sum += mse;
    squared_error_sum += mse * static_cast<double>(n);
    element_count += n;
    ++utterances;
  }

  double macro() const {
    if (utterances == 0) throw DataError("mse accumulator: no utterances");
    return per_utterance_sum / static_cast<double>(utterances);
  }
  double micro() const {
    if (utterances == 0) throw DataError("mse accumulator: no utterances");
    return squared_error_sum / static_cast<double>(element_count);
  }
};

// --- End-of-utterance flag accuracy ------------------------------------------------

// Fraction of frames, over all sequences, where thresholding the predicted
// probability at 0.5 reproduces the gold 0/1 flag. Returned as a percentage.
inline double end_flag_accuracy(
    const std::vector<std::vector<double>>& predicted,
    const std::vector<std::vector<double>>& gold) {
  if (predicted.size() != gold.size())
    throw ShapeError("end_flag_accuracy: " + std::to_string(predicted.size()) +
                     " predicted sequences vs " + std::to_string(gold.size()) +
                     " gold");
  int64_t correct = 0;
  int64_t total = 0;
  for (size_t u = 0; u < predicted.size(); ++u) {
    if (predicted[u].size() != gold[u].size())
      throw ShapeError("end_flag_accuracy: length mismatch in sequence " +
                       std::to_string(u));
    for (size_t t = 0; t < predicted[u].size(); ++t) {
      bool hat = predicted[u][t] > 0.5;
      bool ref = gold[u][t] > 0.5;
      correct += (hat == ref) ? 1 : 0;
      ++total;
    }
  }
  if (total == 0) throw DataError("end_flag_accuracy: no frames");
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

struct FlagAccumulator {
  int64_t correct = 0;
  int64_t total = 0;

  void add(const std::vector<double>& predicted,
           const std::vector<double>& gold) {
    if (predicted.size() != gold.size())
      throw ShapeError("flag accumulator: length mismatch");
    for (size_t t = 0; t < predicted.size(); ++t) {
      bool hat = predicted[t] > 0.5;
      bool ref = gold[t] > 0.5;
      correct += (hat == ref) ? 1 : 0;
      ++total;
    }
  }

  double percent() const {
    if (total == 0) throw DataError("flag accumulator: no frames");
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  }
};

// --- Report ------------------------------------------------------------------------

struct EvalReport {
  double cer_percent = 0.0;        // micro-averaged, as a percentage
  double cer_percent_macro = 0.0;  // mean of per-utterance rates
  double mel_mse = 0.0;            // macro over utterances
  double raw_mse = 0.0;            // macro over utterances (linear spectrogram)
  double flag_accuracy_percent = 0.0;
  int64_t utterance_count = 0;

  static std::string csv_header() {
    return "utterances,cer_percent,cer_percent_macro,mel_mse,raw_mse,"
           "flag_accuracy_percent";
  }

  std::string csv_row() const {
    std::ostringstream os;
    os.precision(10);
    os << utterance_count << "," << cer_percent << "," << cer_percent_macro
       << "," << mel_mse << "," << raw_mse << "," << flag_accuracy_percent;
    return os.str();
  }

  std::string summary() const {
    std::ostringstream os;
    os.precision(4);
    os << "evaluation over " << utterance_count << " utterance(s)\n"
       << "  CER           : " << cer_percent << "% (macro "
       << cer_percent_macro << "%)\n"
       << "  mel MSE       : " << mel_mse << "\n"
       << "  raw MSE       : " << raw_mse << "\n"
       << "  flag accuracy : " << flag_accuracy_percent << "%\n";
    return os.str();
  }
};

}  // namespace eval
}  // namespace speechchain

#endif  // SPEECHCHAIN_EVAL_HPP_
