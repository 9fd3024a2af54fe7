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

// Corpus plumbing: tab-separated manifests for paired, speech-only, and
// text-only sets; a feature store that serves precomputed feature files or
// extracts from WAV on the fly; normalization fitting; and deterministic
// length-bucketed batching with padding and masks.

#ifndef SPEECHCHAIN_DATA_HPP_
#define SPEECHCHAIN_DATA_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "speechchain/dsp.hpp"
#include "speechchain/errors.hpp"
#include "speechchain/rng.hpp"
#include "speechchain/tensor.hpp"
#include "speechchain/text.hpp"
#include "speechchain/wav.hpp"

namespace speechchain {
namespace data {

// --- Manifests ---------------------------------------------------------------------

struct ManifestRow {
  std::string id;
  std::string path;        // WAV file or feature base path; empty for text-only
  std::string transcript;  // stored normalized; empty for speech-only
  std::string speaker;     // free-form tag, empty when unused
};

struct Manifest {
  enum class Kind { kPaired, kSpeechOnly, kTextOnly };
  Kind kind = Kind::kPaired;
  std::vector<ManifestRow> rows;
  std::string source_path;
};

inline std::string kind_to_string(Manifest::Kind k) {
  switch (k) {
    case Manifest::Kind::kPaired: return "paired";
    case Manifest::Kind::kSpeechOnly: return "speech-only";
    case Manifest::Kind::kTextOnly: return "text-only";
  }
  throw ConfigError("unknown manifest kind");
}

inline Manifest::Kind kind_from_string(const std::string& s) {
  if (s == "paired") return Manifest::Kind::kPaired;
  if (s == "speech-only") return Manifest::Kind::kSpeechOnly;
  if (s == "text-only") return Manifest::Kind::kTextOnly;
  throw ConfigError("unknown manifest kind \"" + s +
                    "\" (expected paired, speech-only, or text-only)");
}

namespace detail {

inline std::string join(const std::vector<std::string>& parts,
                        const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields{""};
  for (char c : line) {
    if (c == '\t')
      fields.emplace_back();
    else
      fields.back() += c;
  }
  return fields;
}

}  // namespace detail

// Reads a 4-column TSV (id, path, transcript, speaker) and validates every
// row against the declared set kind. All violations are collected and
// reported together, each tagged with its line number. Transcripts are
// normalized in place so downstream consumers always see encodable text.
// Relative audio paths are resolved against the manifest's own directory,
// which keeps generated corpora relocatable.
inline Manifest load_manifest(const std::string& path, Manifest::Kind kind) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest: " + path);
  std::filesystem::path base = std::filesystem::path(path).parent_path();
  Manifest m;
  m.kind = kind;
  m.source_path = path;
  std::vector<std::string> problems;
  std::set<std::string> seen_ids;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto complain = [&](const std::string& what) {
      problems.push_back("line " + std::to_string(line_no) + ": " + what);
    };
    std::vector<std::string> f = detail::split_tabs(line);
    if (f.size() != 4) {
      complain("expected 4 tab-separated columns (id, path, transcript, "
               "speaker), got " + std::to_string(f.size()));
      continue;
    }
    ManifestRow row{f[0], f[1], f[2], f[3]};
    if (row.id.empty())
      complain("empty utterance id");
    else if (!seen_ids.insert(row.id).second)
      complain("duplicate utterance id \"" + row.id + "\"");
    switch (kind) {
      case Manifest::Kind::kPaired:
        if (row.path.empty()) complain("paired row needs an audio path");
        if (row.transcript.empty()) complain("paired row needs a transcript");
        break;
      case Manifest::Kind::kSpeechOnly:
        if (row.path.empty()) complain("speech-only row needs an audio path");
        if (!row.transcript.empty())
          complain("speech-only row must not carry a transcript");
        break;
      case Manifest::Kind::kTextOnly:
        if (!row.path.empty())
          complain("text-only row must not carry an audio path");
        if (row.transcript.empty()) complain("text-only row needs a transcript");
        break;
    }
    if (!row.transcript.empty()) {
      try {
        row.transcript = text::normalize_text(row.transcript);
      } catch (const DataError& e) {
        complain(std::string("transcript: ") + e.what());
      }
    }
    if (!row.path.empty() &&
        std::filesystem::path(row.path).is_relative() && !base.empty())
      row.path = (base / row.path).string();
    m.rows.push_back(std::move(row));
  }
  if (m.rows.empty() && problems.empty())
    problems.push_back("manifest has no rows");
  if (!problems.empty())
    throw DataError("invalid manifest " + path + ":\n  " +
                    detail::join(problems, "\n  "));
  return m;
}

// The train/dev/test split only means something if no utterance leaks across
// sets; reports every id that appears in more than one manifest.
inline void check_disjoint(const std::vector<const Manifest*>& sets) {
  std::map<std::string, std::vector<std::string>> where;
  for (const Manifest* m : sets) {
    std::string label =
        m->source_path.empty() ? kind_to_string(m->kind) : m->source_path;
    for (const ManifestRow& r : m->rows) where[r.id].push_back(label);
  }
  std::vector<std::string> problems;
  for (const auto& [id, sources] : where)
    if (sources.size() > 1)
      problems.push_back("id \"" + id + "\" appears in " +
                         detail::join(sources, " and "));
  if (!problems.empty())
    throw DataError("manifest sets overlap:\n  " +
                    detail::join(problems, "\n  "));
}

// --- Feature store -----------------------------------------------------------------

inline constexpr const char* kMelSuffix = ".mel.feat";
inline constexpr const char* kMagnitudeSuffix = ".mag.feat";

// Writes the two feature sequences of one utterance next to each other under
// a shared base path; the manifest then records just the base.
inline void save_feature_pair(const dsp::ExtractedFeatures& f,
                              const std::string& base_path,
                              const dsp::DspConfig& cfg) {
  dsp::save_features(f.log_mel, base_path + kMelSuffix, cfg);
  dsp::save_features(f.log_magnitude, base_path + kMagnitudeSuffix, cfg);
}

// Serves features for a manifest path: a ".wav" path is extracted on the fly
// with the configured front end, anything else is treated as the base path of
// a precomputed pair. Both routes return the same structure, so training code
// never needs to know which one it got.
class FeatureStore {
 public:
  explicit FeatureStore(dsp::DspConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
  }

  dsp::ExtractedFeatures get(const std::string& path) const {
    if (path.ends_with(".wav"))
      return dsp::extract_features(read_wav(path), cfg_);
    dsp::ExtractedFeatures out;
    out.log_mel = dsp::load_features(path + kMelSuffix);
    out.log_magnitude = dsp::load_features(path + kMagnitudeSuffix);
    if (out.log_mel.kind != dsp::FeatureSequence::Kind::LogMel)
      throw DataError("feature file is not a mel sequence: " + path +
                      kMelSuffix);
    if (out.log_magnitude.kind != dsp::FeatureSequence::Kind::LogMagnitude)
      throw DataError("feature file is not a magnitude sequence: " + path +
                      kMagnitudeSuffix);
    if (out.log_mel.s != out.log_magnitude.s)
      throw DataError("feature pair frame counts disagree for " + path);
    return out;
  }

  const dsp::DspConfig& config() const { return cfg_; }

 private:
  dsp::DspConfig cfg_;
};

// --- Normalization fitting -----------------------------------------------------------

struct FeatureStats {
  dsp::NormalizationStats mel;
  dsp::NormalizationStats magnitude;
};

// Fits per-dimension mean/stddev over every frame of the manifest. Stats are
// fit on the paired training set only and then applied to every other set:
// the unpaired speech is treated as unlabeled, so it must not influence the
// front-end statistics either.
inline FeatureStats fit_feature_stats(const Manifest& m,
                                      const FeatureStore& store) {
  if (m.kind == Manifest::Kind::kTextOnly)
    throw DataError("cannot fit feature stats on a text-only manifest");
  if (m.rows.empty()) throw DataError("cannot fit feature stats: no rows");
  std::vector<dsp::FeatureSequence> mels, mags;
  mels.reserve(m.rows.size());
  mags.reserve(m.rows.size());
  for (const ManifestRow& r : m.rows) {
    dsp::ExtractedFeatures f = store.get(r.path);
    mels.push_back(std::move(f.log_mel));
    mags.push_back(std::move(f.log_magnitude));
  }
  std::vector<const dsp::FeatureSequence*> mel_ptrs, mag_ptrs;
  for (const auto& f : mels) mel_ptrs.push_back(&f);
  for (const auto& f : mags) mag_ptrs.push_back(&f);
  FeatureStats stats;
  std::string tag = m.source_path.empty() ? "unnamed" : m.source_path;
  stats.mel = dsp::NormalizationStats::fit(mel_ptrs, tag + "#mel");
  stats.magnitude = dsp::NormalizationStats::fit(mag_ptrs, tag + "#mag");
  return stats;
}

// --- Batches -----------------------------------------------------------------------

// One immutable batch. Feature tensors are rank-3 (batch, padded frames,
// dims) zero-padded past each true length; token rows are padded with the
// end sentinel. Masks are true exactly on real frames/tokens, and the
// per-utterance accessors slice back to true lengths so losses computed
// through them never see padding.
struct Batch {
  Manifest::Kind kind = Manifest::Kind::kPaired;
  std::vector<std::string> ids;

  ad::Tensor mel;     // {B, s_max, mel_dim}; default-empty for text-only
  ad::Tensor linear;  // {B, s_max, magnitude_dim}; default-empty for text-only
  std::vector<int64_t> frame_lengths;
  std::vector<std::vector<bool>> frame_mask;  // B x s_max
  int64_t s_max = 0;

  std::vector<std::vector<int64_t>> tokens;  // B x t_max, padded with </s>
  std::vector<int64_t> token_lengths;
  std::vector<std::vector<bool>> token_mask;  // B x t_max
  int64_t t_max = 0;

  std::vector<std::optional<int64_t>> speakers;

  int64_t size() const { return static_cast<int64_t>(ids.size()); }

  bool has_features() const { return mel.defined() && mel.rank() == 3; }
  bool has_tokens() const { return t_max > 0; }

  ad::Tensor utterance_mel(int64_t b) const {
    return slice_features(mel, b, "mel");
  }
  ad::Tensor utterance_linear(int64_t b) const {
    return slice_features(linear, b, "linear");
  }

  text::TokenSequence utterance_tokens(int64_t b) const {
    check_index(b);
    if (!has_tokens()) throw DataError("batch carries no tokens");
    text::TokenSequence seq;
    seq.ids.assign(tokens[static_cast<size_t>(b)].begin(),
                   tokens[static_cast<size_t>(b)].begin() +
                       token_lengths[static_cast<size_t>(b)]);
    return seq;
  }

 private:
  void check_index(int64_t b) const {
    if (b < 0 || b >= size())
      throw DataError("batch index " + std::to_string(b) + " out of range");
  }

  ad::Tensor slice_features(const ad::Tensor& t, int64_t b,
                            const char* what) const {
    check_index(b);
    if (!t.defined() || t.rank() != 3)
      throw DataError(std::string("batch carries no ") + what + " features");
    int64_t d = t.shape()[2];
    int64_t len = frame_lengths[static_cast<size_t>(b)];
    const auto& v = t.values();
    size_t begin = static_cast<size_t>(b * s_max * d);
    std::vector<double> rows(v.begin() + begin, v.begin() + begin + len * d);
    return ad::Tensor::from_vector({len, d}, std::move(rows));
  }
};

struct BatchingConfig {
  int64_t batch_size = 8;
  bool sort_by_length = true;
  uint64_t seed = 0;
  int64_t pad_frames_to = 1;  // decoder reduction factor for TTS batches
  int64_t max_frames = 0;     // 0 = unlimited; longer utterances are skipped
  int64_t max_tokens = 0;
  const dsp::NormalizationStats* mel_stats = nullptr;
  const dsp::NormalizationStats* magnitude_stats = nullptr;
  const std::map<std::string, int64_t>* speaker_table = nullptr;

  void validate() const {
    std::string problems;
    if (batch_size < 1) problems += "batch_size must be >= 1; ";
    if (pad_frames_to < 1) problems += "pad_frames_to must be >= 1; ";
    if (max_frames < 0) problems += "max_frames must be >= 0; ";
    if (max_tokens < 0) problems += "max_tokens must be >= 0; ";
    if (!problems.empty()) throw ConfigError("batching config: " + problems);
  }
};

struct BatchStream {
  std::vector<Batch> batches;
  int64_t skipped_too_long = 0;
};

// Speaker tags are free-form strings in manifests; models index an embedding
// table. Indices are assigned in sorted tag order so they are stable across
// runs and machines.
inline std::map<std::string, int64_t> build_speaker_table(
    const std::vector<const Manifest*>& sets) {
  std::set<std::string> tags;
  for (const Manifest* m : sets)
    for (const ManifestRow& r : m->rows)
      if (!r.speaker.empty()) tags.insert(r.speaker);
  std::map<std::string, int64_t> table;
  int64_t next = 0;
  for (const std::string& t : tags) table[t] = next++;
  return table;
}

namespace detail {

struct UtteranceRecord {
  std::string id;
  std::vector<double> mel, magnitude;
  int64_t frames = 0, mel_dim = 0, magnitude_dim = 0;
  std::vector<int64_t> tokens;
  std::optional<int64_t> speaker;
  int64_t sort_length = 0;
};

}  // namespace detail

// Length-bucketed deterministic batching: utterances are sorted by length
// (stable, ties broken by id), chunked into consecutive batches, and the
// batch ORDER is then shuffled by the seed. Same seed, same stream.
// Over-long utterances are skipped and counted rather than failing the run.
inline BatchStream make_batches(const Manifest& manifest,
                                const FeatureStore* store,
                                const BatchingConfig& cfg) {
  cfg.validate();
  bool wants_features = manifest.kind != Manifest::Kind::kTextOnly;
  bool wants_tokens = manifest.kind != Manifest::Kind::kSpeechOnly;
  if (wants_features && store == nullptr)
    throw ConfigError("make_batches: a feature store is required for " +
                      kind_to_string(manifest.kind) + " manifests");

  BatchStream out;
  std::vector<detail::UtteranceRecord> records;
  records.reserve(manifest.rows.size());
  for (const ManifestRow& row : manifest.rows) {
    detail::UtteranceRecord rec;
    rec.id = row.id;
    if (wants_features) {
      dsp::ExtractedFeatures f = store->get(row.path);
      if (cfg.mel_stats) f.log_mel = cfg.mel_stats->apply(f.log_mel);
      if (cfg.magnitude_stats)
        f.log_magnitude = cfg.magnitude_stats->apply(f.log_magnitude);
      rec.frames = f.log_mel.s;
      rec.mel_dim = f.log_mel.d;
      rec.magnitude_dim = f.log_magnitude.d;
      rec.mel = std::move(f.log_mel.frames);
      rec.magnitude = std::move(f.log_magnitude.frames);
      if (cfg.max_frames > 0 && rec.frames > cfg.max_frames) {
        ++out.skipped_too_long;
        continue;
      }
    }
    if (wants_tokens) {
      rec.tokens = text::encode(row.transcript).ids;
      if (cfg.max_tokens > 0 &&
          static_cast<int64_t>(rec.tokens.size()) > cfg.max_tokens) {
        ++out.skipped_too_long;
        continue;
      }
    }
    if (!row.speaker.empty()) {
      if (cfg.speaker_table == nullptr)
        throw DataError("utterance \"" + row.id +
                        "\" has speaker \"" + row.speaker +
                        "\" but no speaker table was provided");
      auto it = cfg.speaker_table->find(row.speaker);
      if (it == cfg.speaker_table->end())
        throw DataError("speaker \"" + row.speaker +
                        "\" of utterance \"" + row.id +
                        "\" is missing from the speaker table");
      rec.speaker = it->second;
    }
    rec.sort_length =
        wants_features ? rec.frames : static_cast<int64_t>(rec.tokens.size());
    records.push_back(std::move(rec));
  }

  if (cfg.sort_by_length)
    std::stable_sort(records.begin(), records.end(),
                     [](const auto& a, const auto& b) {
                       if (a.sort_length != b.sort_length)
                         return a.sort_length < b.sort_length;
                       return a.id < b.id;
                     });

  std::vector<std::pair<size_t, size_t>> chunks;  // [begin, end) into records
  for (size_t begin = 0; begin < records.size();
       begin += static_cast<size_t>(cfg.batch_size))
    chunks.emplace_back(begin,
                        std::min(begin + static_cast<size_t>(cfg.batch_size),
                                 records.size()));

  Rng rng(cfg.seed, "batch-order");
  for (size_t i = chunks.size(); i > 1; --i)
    std::swap(chunks[i - 1], chunks[rng.uniform_int(i)]);

  for (const auto& [begin, end] : chunks) {
    Batch batch;
    batch.kind = manifest.kind;
    int64_t b_size = static_cast<int64_t>(end - begin);
    int64_t longest = 0, mel_dim = 0, magnitude_dim = 0, t_max = 0;
    for (size_t i = begin; i < end; ++i) {
      longest = std::max(longest, records[i].frames);
      mel_dim = std::max(mel_dim, records[i].mel_dim);
      magnitude_dim = std::max(magnitude_dim, records[i].magnitude_dim);
      t_max = std::max(t_max, static_cast<int64_t>(records[i].tokens.size()));
    }
    int64_t s_max = 0;
    if (wants_features && longest > 0)
      s_max = ((longest + cfg.pad_frames_to - 1) / cfg.pad_frames_to) *
              cfg.pad_frames_to;
    batch.s_max = s_max;
    batch.t_max = wants_tokens ? t_max : 0;

    std::vector<double> mel_buf(
        static_cast<size_t>(b_size * s_max * mel_dim), 0.0);
    std::vector<double> mag_buf(
        static_cast<size_t>(b_size * s_max * magnitude_dim), 0.0);
    for (size_t i = begin; i < end; ++i) {
      const auto& rec = records[i];
      int64_t b = static_cast<int64_t>(i - begin);
      batch.ids.push_back(rec.id);
      batch.speakers.push_back(rec.speaker);
      if (wants_features) {
        std::copy(rec.mel.begin(), rec.mel.end(),
                  mel_buf.begin() + static_cast<size_t>(b * s_max * mel_dim));
        std::copy(rec.magnitude.begin(), rec.magnitude.end(),
                  mag_buf.begin() +
                      static_cast<size_t>(b * s_max * magnitude_dim));
        batch.frame_lengths.push_back(rec.frames);
        std::vector<bool> mask(static_cast<size_t>(s_max), false);
        std::fill(mask.begin(), mask.begin() + rec.frames, true);
        batch.frame_mask.push_back(std::move(mask));
      } else {
        batch.frame_lengths.push_back(0);
        batch.frame_mask.emplace_back();
      }
      if (wants_tokens) {
        std::vector<int64_t> padded = rec.tokens;
        padded.resize(static_cast<size_t>(t_max), text::kEos);
        batch.tokens.push_back(std::move(padded));
        batch.token_lengths.push_back(
            static_cast<int64_t>(rec.tokens.size()));
        std::vector<bool> mask(static_cast<size_t>(t_max), false);
        std::fill(mask.begin(), mask.begin() + rec.tokens.size(), true);
        batch.token_mask.push_back(std::move(mask));
      } else {
        batch.token_lengths.push_back(0);
        batch.token_mask.emplace_back();
      }
    }
    if (wants_features) {
      batch.mel = ad::Tensor::from_vector({b_size, s_max, mel_dim},
                                          std::move(mel_buf));
      batch.linear = ad::Tensor::from_vector({b_size, s_max, magnitude_dim},
                                             std::move(mag_buf));
    }
    out.batches.push_back(std::move(batch));
  }
  return out;
}

}  // namespace data
}  // namespace speechchain

#endif  // SPEECHCHAIN_DATA_HPP_
