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

// Synthetic toy corpus: random sentences over a 10-word vocabulary, rendered
// to audio by additive sinusoids so that every character carries a fixed
// spectral template and a "speaker" is a fixed linear spectral tilt. Small
// models can learn both recognition and synthesis on it in minutes, and the
// full WAV -> features -> model path gets exercised for real.

#ifndef SPEECHCHAIN_TOY_HPP_
#define SPEECHCHAIN_TOY_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "speechchain/errors.hpp"
#include "speechchain/rng.hpp"
#include "speechchain/text.hpp"
#include "speechchain/wav.hpp"

namespace speechchain {
namespace toy {

struct ToyCorpusConfig {
  uint64_t seed = 7;
  int64_t paired_utterances = 200;
  int64_t speech_only_utterances = 800;
  int64_t text_only_utterances = 800;
  int64_t dev_utterances = 40;
  int64_t test_utterances = 40;
  int num_speakers = 1;  // 1 leaves the speaker column empty
  int64_t words_min = 3;
  int64_t words_max = 12;
  double char_ms = 25.0;  // audio duration of one character
  int sample_rate = 16000;

  void validate() const {
    std::string problems;
    if (paired_utterances < 1) problems += "paired_utterances must be >= 1; ";
    if (speech_only_utterances < 0)
      problems += "speech_only_utterances must be >= 0; ";
    if (text_only_utterances < 0)
      problems += "text_only_utterances must be >= 0; ";
    if (dev_utterances < 1) problems += "dev_utterances must be >= 1; ";
    if (test_utterances < 1) problems += "test_utterances must be >= 1; ";
    if (num_speakers < 1) problems += "num_speakers must be >= 1; ";
    if (words_min < 1 || words_max < words_min)
      problems += "need 1 <= words_min <= words_max; ";
    if (char_ms <= 0) problems += "char_ms must be positive; ";
    if (sample_rate < 8000) problems += "sample_rate must be >= 8000; ";
    if (!problems.empty()) throw ConfigError("toy corpus config: " + problems);
  }
};

// Fixed 10-word vocabulary. Deliberately not seed-dependent so transcripts
// from different corpus draws stay comparable; each word starts with a
// different letter, which keeps the recognition task well-conditioned.
inline const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words{
      "bed", "cat", "dog", "fish", "gate",
      "hill", "jam", "kite", "lark", "moon"};
  return words;
}

inline std::string random_sentence(Rng& rng, const ToyCorpusConfig& cfg) {
  int64_t span = cfg.words_max - cfg.words_min + 1;
  int64_t n = cfg.words_min +
              static_cast<int64_t>(rng.uniform_int(static_cast<uint64_t>(span)));
  const auto& words = vocabulary();
  std::string s;
  for (int64_t i = 0; i < n; ++i) {
    if (i) s += ' ';
    s += words[rng.uniform_int(words.size())];
  }
  return s;
}

namespace detail {

// Fundamental frequency of one character's template. Letters map linearly
// into 180..1130 Hz; three harmonics keep the top partial below Nyquist at
// 8 kHz sample rate and up.
inline double char_fundamental(char c) {
  int64_t id = text::char_to_id(c);
  if (id < 3) throw DataError(std::string("toy render: unmappable char '") +
                              c + "'");
  return 180.0 + 38.0 * static_cast<double>(id - 3);
}

// Speakers differ by a fixed linear spectral tilt: gain varies linearly with
// frequency, from treble-heavy (+tilt) to bass-heavy (-tilt).
inline double speaker_tilt(int speaker_index, int num_speakers) {
  if (num_speakers <= 1) return 0.0;
  return -0.8 + 1.6 * static_cast<double>(speaker_index) /
                    static_cast<double>(num_speakers - 1);
}

}  // namespace detail

// Renders one transcript to audio: each character occupies char_ms of signal
// built from three harmonic partials at its fixed fundamental, with short
// raised-cosine fades at segment edges; spaces render as silence.
inline Waveform render_utterance(const std::string& transcript,
                                 int speaker_index,
                                 const ToyCorpusConfig& cfg) {
  cfg.validate();
  if (transcript.empty()) throw DataError("toy render: empty transcript");
  if (speaker_index < 0 || speaker_index >= cfg.num_speakers)
    throw DataError("toy render: speaker index " +
                    std::to_string(speaker_index) + " out of range");
  double tilt = detail::speaker_tilt(speaker_index, cfg.num_speakers);
  int64_t seg = static_cast<int64_t>(
      std::lround(cfg.char_ms / 1000.0 * cfg.sample_rate));
  int64_t fade = std::min<int64_t>(seg / 8, 40);
  Waveform w;
  w.sample_rate = cfg.sample_rate;
  w.samples.reserve(static_cast<size_t>(seg) * transcript.size());
  const double kPi = 3.14159265358979323846;
  for (char c : transcript) {
    if (c == ' ') {
      w.samples.insert(w.samples.end(), static_cast<size_t>(seg), 0.0);
      continue;
    }
    double f0 = detail::char_fundamental(c);
    double freqs[3] = {f0, 2.0 * f0, 3.0 * f0};
    double amps[3] = {0.5, 0.25, 0.125};
    for (int i = 0; i < 3; ++i) {
      double gain = 1.0 + tilt * (freqs[i] / 4000.0 - 0.5);
      amps[i] *= 0.75 * std::max(gain, 0.05);
    }
    for (int64_t t = 0; t < seg; ++t) {
      double x = 0.0;
      for (int i = 0; i < 3; ++i)
        x += amps[i] * std::sin(2.0 * kPi * freqs[i] *
                                static_cast<double>(t) / cfg.sample_rate);
      double env = 1.0;
      if (t < fade)
        env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(t) / fade);
      else if (t >= seg - fade)
        env = 0.5 - 0.5 * std::cos(kPi * static_cast<double>(seg - 1 - t) /
                                   fade);
      w.samples.push_back(env * x);
    }
  }
  return w;
}

struct ToyCorpusSummary {
  std::string paired_manifest;
  std::string speech_manifest;
  std::string text_manifest;
  std::string dev_manifest;
  std::string test_manifest;
  int64_t waveforms_written = 0;
};

namespace detail {

struct PendingRow {
  std::string id, path, transcript, speaker;
};

inline void write_manifest(const std::string& path,
                           const std::vector<PendingRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write manifest: " + path);
  for (const auto& r : rows)
    os << r.id << "\t" << r.path << "\t" << r.transcript << "\t" << r.speaker
       << "\n";
  if (!os) throw DataError("write failed for manifest: " + path);
}

}  // namespace detail

// Writes waveforms under <out_dir>/wav and the five manifests of the
// standard experiment layout: paired / speech-only / text-only training sets
// plus paired dev and test sets. Every random draw comes from a named
// sub-stream of the seed, so equal seeds give byte-identical corpora.
inline ToyCorpusSummary generate_corpus(const ToyCorpusConfig& cfg,
                                        const std::string& out_dir) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "wav");

  ToyCorpusSummary summary;
  auto speaker_tag = [&](int index) {
    return cfg.num_speakers == 1 ? std::string()
                                 : "spk" + std::to_string(index);
  };

  auto emit_set = [&](const std::string& set_name, int64_t count,
                      bool with_audio, bool with_transcript) {
    std::vector<detail::PendingRow> rows;
    Rng rng(cfg.seed, "toy-" + set_name);
    for (int64_t i = 0; i < count; ++i) {
      char id_buf[32];
      std::snprintf(id_buf, sizeof(id_buf), "%s-%05lld", set_name.c_str(),
                    static_cast<long long>(i));
      detail::PendingRow row;
      row.id = id_buf;
      std::string sentence = random_sentence(rng, cfg);
      int speaker = cfg.num_speakers == 1
                        ? 0
                        : static_cast<int>(rng.uniform_int(
                              static_cast<uint64_t>(cfg.num_speakers)));
      if (with_audio) {
        // Manifests keep paths relative to their own directory so the
        // corpus stays byte-identical wherever it is generated.
        std::string rel = "wav/" + row.id + ".wav";
        write_wav((fs::path(out_dir) / rel).string(),
                  render_utterance(sentence, speaker, cfg));
        row.path = rel;
        ++summary.waveforms_written;
        row.speaker = speaker_tag(speaker);
      }
      if (with_transcript) row.transcript = sentence;
      rows.push_back(std::move(row));
    }
    std::string manifest_path =
        (fs::path(out_dir) / (set_name + ".tsv")).string();
    detail::write_manifest(manifest_path, rows);
    return manifest_path;
  };

  summary.paired_manifest =
      emit_set("train_paired", cfg.paired_utterances, true, true);
  summary.speech_manifest =
      emit_set("train_speech", cfg.speech_only_utterances, true, false);
  summary.text_manifest =
      emit_set("train_text", cfg.text_only_utterances, false, true);
  summary.dev_manifest = emit_set("dev", cfg.dev_utterances, true, true);
  summary.test_manifest = emit_set("test", cfg.test_utterances, true, true);
  return summary;
}

}  // namespace toy
}  // namespace speechchain

#endif  // SPEECHCHAIN_TOY_HPP_
