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

#include "speechchain/data.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "speechchain/asr.hpp"
#include "speechchain/params.hpp"
#include "speechchain/rng.hpp"

namespace sc = speechchain;
using sc::data::Manifest;

namespace {

std::string fixture_dir() {
  static int counter = 0;
  std::string dir = ::testing::TempDir() + "speechchain_data_" +
                    std::to_string(::getpid()) + "_" +
                    std::to_string(counter++);
  std::filesystem::create_directories(dir);
  return dir + "/";
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::trunc);
  ASSERT_TRUE(os) << path;
  os << content;
}

// A deterministic fake utterance: mel and magnitude sequences with the given
// frame count and dims, filled from the utterance's own rng stream.
sc::dsp::ExtractedFeatures fake_features(const std::string& id, int64_t frames,
                                         int64_t mel_dim, int64_t mag_dim) {
  sc::Rng rng(99, "fake-features-" + id);
  sc::dsp::ExtractedFeatures f;
  f.log_mel.kind = sc::dsp::FeatureSequence::Kind::LogMel;
  f.log_mel.s = frames;
  f.log_mel.d = mel_dim;
  for (int64_t i = 0; i < frames * mel_dim; ++i)
    f.log_mel.frames.push_back(rng.uniform(-1.5, 1.5));
  f.log_magnitude.kind = sc::dsp::FeatureSequence::Kind::LogMagnitude;
  f.log_magnitude.s = frames;
  f.log_magnitude.d = mag_dim;
  for (int64_t i = 0; i < frames * mag_dim; ++i)
    f.log_magnitude.frames.push_back(rng.uniform(-1.5, 1.5));
  return f;
}

// Writes feature pairs plus a paired manifest for the given (id, frames,
// transcript) triples. Returns the manifest path.
std::string build_corpus(const std::string& dir,
                         const std::vector<std::tuple<std::string, int64_t,
                                                      std::string>>& utts,
                         int64_t mel_dim = 4, int64_t mag_dim = 6) {
  sc::dsp::DspConfig cfg;
  std::string manifest;
  for (const auto& [id, frames, transcript] : utts) {
    std::string base = dir + id;
    sc::data::save_feature_pair(fake_features(id, frames, mel_dim, mag_dim),
                                base, cfg);
    manifest += id + "\t" + base + "\t" + transcript + "\t\n";
  }
  std::string path = dir + "train.tsv";
  write_file(path, manifest);
  return path;
}

}  // namespace

TEST(ManifestKind, StringRoundTripAndUnknownRejected) {
  using sc::data::kind_from_string;
  using sc::data::kind_to_string;
  for (auto k : {Manifest::Kind::kPaired, Manifest::Kind::kSpeechOnly,
                 Manifest::Kind::kTextOnly})
    EXPECT_EQ(kind_from_string(kind_to_string(k)), k);
  EXPECT_THROW(kind_from_string("unpaired"), sc::ConfigError);
}

TEST(LoadManifest, ValidPairedManifest) {
  std::string dir = fixture_dir();
  std::string path = dir + "ok.tsv";
  write_file(path,
             "utt1\t/data/utt1.wav\tHello  World\tspk_a\n"
             "utt2\t/data/utt2.wav\tgood morning\t\n"
             "utt3\t/data/utt3\tnight\tspk_b\n");
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  ASSERT_EQ(m.rows.size(), 3u);
  EXPECT_EQ(m.kind, Manifest::Kind::kPaired);
  EXPECT_EQ(m.source_path, path);
  EXPECT_EQ(m.rows[0].id, "utt1");
  EXPECT_EQ(m.rows[0].path, "/data/utt1.wav");
  // Transcripts come back normalized.
  EXPECT_EQ(m.rows[0].transcript, "hello world");
  EXPECT_EQ(m.rows[0].speaker, "spk_a");
  EXPECT_EQ(m.rows[1].speaker, "");
}

TEST(LoadManifest, RelativePathsResolveAgainstManifestDirectory) {
  std::string dir = fixture_dir();
  std::string path = dir + "rel.tsv";
  write_file(path,
             "utt1\twav/utt1.wav\thello\t\n"
             "utt2\t/abs/utt2.wav\tworld\t\n");
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  EXPECT_EQ(m.rows[0].path, dir + "wav/utt1.wav");
  EXPECT_EQ(m.rows[1].path, "/abs/utt2.wav");
}

TEST(LoadManifest, MissingFileRejected) {
  EXPECT_THROW(
      sc::data::load_manifest("/nonexistent/nowhere.tsv",
                              Manifest::Kind::kPaired),
      sc::DataError);
}

TEST(LoadManifest, EmptyFileRejected) {
  std::string dir = fixture_dir();
  write_file(dir + "empty.tsv", "");
  write_file(dir + "blank.tsv", "\n\n\n");
  for (const char* name : {"empty.tsv", "blank.tsv"}) {
    try {
      sc::data::load_manifest(dir + name, Manifest::Kind::kPaired);
      FAIL() << name << " should have been rejected";
    } catch (const sc::DataError& e) {
      EXPECT_NE(std::string(e.what()).find("no rows"), std::string::npos);
    }
  }
}

TEST(LoadManifest, DuplicateIdRejectedNamingTheId) {
  std::string dir = fixture_dir();
  std::string path = dir + "dup.tsv";
  write_file(path,
             "utt1\ta.wav\thello\t\n"
             "utt1\tb.wav\tworld\t\n");
  try {
    sc::data::load_manifest(path, Manifest::Kind::kPaired);
    FAIL() << "duplicate id should have been rejected";
  } catch (const sc::DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("duplicate"), std::string::npos) << msg;
    EXPECT_NE(msg.find("utt1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
  }
}

TEST(LoadManifest, PairedRowMissingTranscriptNamesTheRow) {
  std::string dir = fixture_dir();
  std::string path = dir + "missing.tsv";
  write_file(path,
             "utt1\ta.wav\thello\t\n"
             "utt2\tb.wav\t\t\n"
             "utt3\tc.wav\tworld\t\n");
  try {
    sc::data::load_manifest(path, Manifest::Kind::kPaired);
    FAIL() << "missing transcript should have been rejected";
  } catch (const sc::DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("transcript"), std::string::npos) << msg;
  }
}

TEST(LoadManifest, KindConstraintsEnforced) {
  std::string dir = fixture_dir();
  std::string path = dir + "kinds.tsv";
  write_file(path, "utt1\ta.wav\thello\t\n");
  // A paired row is invalid as speech-only (has a transcript)…
  EXPECT_THROW(sc::data::load_manifest(path, Manifest::Kind::kSpeechOnly),
               sc::DataError);
  // …and invalid as text-only (has a path).
  EXPECT_THROW(sc::data::load_manifest(path, Manifest::Kind::kTextOnly),
               sc::DataError);
  write_file(dir + "speech.tsv", "utt1\ta.wav\t\t\n");
  EXPECT_NO_THROW(
      sc::data::load_manifest(dir + "speech.tsv", Manifest::Kind::kSpeechOnly));
  write_file(dir + "text.tsv", "utt1\t\thello there\t\n");
  Manifest text_set =
      sc::data::load_manifest(dir + "text.tsv", Manifest::Kind::kTextOnly);
  EXPECT_EQ(text_set.rows[0].transcript, "hello there");
}

TEST(LoadManifest, AllViolationsReportedTogether) {
  std::string dir = fixture_dir();
  std::string path = dir + "multi.tsv";
  write_file(path,
             "utt1\ta.wav\thello\t\n"
             "\tb.wav\tworld\t\n"       // empty id
             "utt3\t\tagain\t\n"        // missing path
             "utt4\tc.wav\t###\t\n"     // transcript normalizes to nothing
             "utt5\td.wav\tfine\textra\tcolumn\n");  // 5 columns
  try {
    sc::data::load_manifest(path, Manifest::Kind::kPaired);
    FAIL() << "manifest should have been rejected";
  } catch (const sc::DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
  }
}

TEST(CheckDisjoint, SharedIdAcrossSetsRejected) {
  std::string dir = fixture_dir();
  write_file(dir + "train.tsv", "utt1\ta.wav\thello\t\nutt2\tb.wav\thi\t\n");
  write_file(dir + "dev.tsv", "utt3\tc.wav\tyes\t\nutt1\td.wav\tno\t\n");
  Manifest train =
      sc::data::load_manifest(dir + "train.tsv", Manifest::Kind::kPaired);
  Manifest dev =
      sc::data::load_manifest(dir + "dev.tsv", Manifest::Kind::kPaired);
  try {
    sc::data::check_disjoint({&train, &dev});
    FAIL() << "overlap should have been rejected";
  } catch (const sc::DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("utt1"), std::string::npos) << msg;
    EXPECT_NE(msg.find("train.tsv"), std::string::npos) << msg;
    EXPECT_NE(msg.find("dev.tsv"), std::string::npos) << msg;
  }
}

TEST(CheckDisjoint, DisjointSetsPass) {
  std::string dir = fixture_dir();
  write_file(dir + "a.tsv", "utt1\ta.wav\thello\t\n");
  write_file(dir + "b.tsv", "utt2\tb.wav\tworld\t\n");
  write_file(dir + "c.tsv", "utt3\t\tagain\t\n");
  Manifest a = sc::data::load_manifest(dir + "a.tsv", Manifest::Kind::kPaired);
  Manifest b = sc::data::load_manifest(dir + "b.tsv", Manifest::Kind::kPaired);
  Manifest c =
      sc::data::load_manifest(dir + "c.tsv", Manifest::Kind::kTextOnly);
  EXPECT_NO_THROW(sc::data::check_disjoint({&a, &b, &c}));
}

TEST(FeatureStore, PrecomputedPairRoundTrips) {
  std::string dir = fixture_dir();
  sc::dsp::DspConfig cfg;
  auto f = fake_features("rt", 9, 5, 7);
  sc::data::save_feature_pair(f, dir + "rt", cfg);
  sc::data::FeatureStore store(cfg);
  auto back = store.get(dir + "rt");
  ASSERT_EQ(back.log_mel.s, 9);
  ASSERT_EQ(back.log_mel.d, 5);
  ASSERT_EQ(back.log_magnitude.d, 7);
  // Feature files hold float32, so expect float-precision agreement.
  for (size_t i = 0; i < f.log_mel.frames.size(); ++i)
    EXPECT_NEAR(back.log_mel.frames[i], f.log_mel.frames[i], 1e-6);
  for (size_t i = 0; i < f.log_magnitude.frames.size(); ++i)
    EXPECT_NEAR(back.log_magnitude.frames[i], f.log_magnitude.frames[i], 1e-6);
}

TEST(FeatureStore, WavPathExtractsOnTheFly) {
  std::string dir = fixture_dir();
  sc::dsp::DspConfig cfg;
  sc::Waveform w;
  w.sample_rate = cfg.sample_rate;
  for (int i = 0; i < 4000; ++i)
    w.samples.push_back(0.25 * std::sin(2.0 * 3.14159265358979 * 220.0 * i /
                                        cfg.sample_rate));
  sc::write_wav(dir + "tone.wav", w);
  sc::data::FeatureStore store(cfg);
  auto via_store = store.get(dir + "tone.wav");
  auto direct = sc::dsp::extract_features(sc::read_wav(dir + "tone.wav"), cfg);
  ASSERT_EQ(via_store.log_mel.s, direct.log_mel.s);
  for (size_t i = 0; i < direct.log_mel.frames.size(); ++i)
    ASSERT_DOUBLE_EQ(via_store.log_mel.frames[i], direct.log_mel.frames[i]);
}

TEST(FeatureStats, FitPoolsFramesAcrossUtterances) {
  std::string dir = fixture_dir();
  std::string path = build_corpus(
      dir, {{"u1", 6, "hello"}, {"u2", 10, "there"}}, 4, 6);
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  auto stats = sc::data::fit_feature_stats(m, store);
  EXPECT_EQ(stats.mel.frame_count, 16);
  EXPECT_EQ(stats.magnitude.frame_count, 16);
  EXPECT_EQ(stats.mel.mean.size(), 4u);
  EXPECT_EQ(stats.magnitude.mean.size(), 6u);
  // Applying the stats to the pooled corpus must center it.
  double mean_after = 0.0;
  int64_t n = 0;
  for (const auto& row : m.rows) {
    auto norm = stats.mel.apply(store.get(row.path).log_mel);
    for (double v : norm.frames) mean_after += v;
    n += norm.s * norm.d;
  }
  EXPECT_NEAR(mean_after / static_cast<double>(n), 0.0, 1e-9);
}

TEST(FeatureStats, TextOnlyManifestRejected) {
  std::string dir = fixture_dir();
  write_file(dir + "t.tsv", "utt1\t\thello\t\n");
  Manifest m = sc::data::load_manifest(dir + "t.tsv", Manifest::Kind::kTextOnly);
  sc::data::FeatureStore store({});
  EXPECT_THROW(sc::data::fit_feature_stats(m, store), sc::DataError);
}

TEST(MakeBatches, PadsToBatchMaxWithTrueMasks) {
  std::string dir = fixture_dir();
  std::string path =
      build_corpus(dir, {{"long", 10, "hello"}, {"short", 7, "hi"}});
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  auto stream = sc::data::make_batches(m, &store, cfg);
  ASSERT_EQ(stream.batches.size(), 1u);
  const auto& b = stream.batches[0];
  EXPECT_EQ(b.s_max, 10);
  ASSERT_EQ(b.mel.shape(), (std::vector<int64_t>{2, 10, 4}));
  ASSERT_EQ(b.linear.shape(), (std::vector<int64_t>{2, 10, 6}));
  // Sorted by length: "short" (7) first, then "long" (10).
  EXPECT_EQ(b.ids[0], "short");
  EXPECT_EQ(b.frame_lengths[0], 7);
  EXPECT_EQ(b.frame_lengths[1], 10);
  int sum0 = 0, sum1 = 0;
  for (bool v : b.frame_mask[0]) sum0 += v ? 1 : 0;
  for (bool v : b.frame_mask[1]) sum1 += v ? 1 : 0;
  EXPECT_EQ(sum0, 7);
  EXPECT_EQ(sum1, 10);
  // Padding rows are zero.
  auto mel = b.mel.values();
  for (int64_t t = 7; t < 10; ++t)
    for (int64_t dmel = 0; dmel < 4; ++dmel)
      EXPECT_EQ(mel[static_cast<size_t>((0 * 10 + t) * 4 + dmel)], 0.0);
}

TEST(MakeBatches, PadsFrameCountToMultipleOfFour) {
  std::string dir = fixture_dir();
  std::string path =
      build_corpus(dir, {{"long", 10, "hello"}, {"short", 7, "hi"}});
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  cfg.pad_frames_to = 4;
  auto stream = sc::data::make_batches(m, &store, cfg);
  ASSERT_EQ(stream.batches.size(), 1u);
  EXPECT_EQ(stream.batches[0].s_max, 12);
  EXPECT_EQ(stream.batches[0].frame_lengths[1], 10);
}

TEST(MakeBatches, SameSeedSameOrderDifferentSeedDiffers) {
  std::string dir = fixture_dir();
  std::vector<std::tuple<std::string, int64_t, std::string>> utts;
  for (int i = 0; i < 12; ++i)
    utts.emplace_back("u" + std::to_string(i), 5 + i, "hello");
  std::string path = build_corpus(dir, utts);
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  cfg.seed = 17;
  auto order_of = [&](const sc::data::BatchStream& s) {
    std::vector<std::string> ids;
    for (const auto& b : s.batches)
      for (const auto& id : b.ids) ids.push_back(id);
    return ids;
  };
  auto first = order_of(sc::data::make_batches(m, &store, cfg));
  auto second = order_of(sc::data::make_batches(m, &store, cfg));
  EXPECT_EQ(first, second);
  cfg.seed = 18;
  auto other = order_of(sc::data::make_batches(m, &store, cfg));
  EXPECT_NE(first, other);
}

TEST(MakeBatches, LengthBucketingGroupsSimilarLengths) {
  std::string dir = fixture_dir();
  std::string path = build_corpus(dir, {{"a", 10, "x"},
                                        {"b", 2, "x x"},
                                        {"c", 9, "y"},
                                        {"d", 3, "y y"}});
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  cfg.seed = 3;
  auto stream = sc::data::make_batches(m, &store, cfg);
  ASSERT_EQ(stream.batches.size(), 2u);
  for (const auto& b : stream.batches) {
    int64_t lo = *std::min_element(b.frame_lengths.begin(),
                                   b.frame_lengths.end());
    int64_t hi = *std::max_element(b.frame_lengths.begin(),
                                   b.frame_lengths.end());
    EXPECT_LE(hi - lo, 1) << "bucketing should group 2,3 and 9,10";
  }
}

TEST(MakeBatches, OverlongUtterancesSkippedAndCounted) {
  std::string dir = fixture_dir();
  std::string path = build_corpus(
      dir, {{"ok", 6, "hello"}, {"huge", 50, "hi"}, {"ok2", 8, "yes"}});
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 4;
  cfg.max_frames = 20;
  auto stream = sc::data::make_batches(m, &store, cfg);
  EXPECT_EQ(stream.skipped_too_long, 1);
  ASSERT_EQ(stream.batches.size(), 1u);
  EXPECT_EQ(stream.batches[0].size(), 2);
}

TEST(MakeBatches, TextOnlyBatchesCarryPaddedTokens) {
  std::string dir = fixture_dir();
  write_file(dir + "text.tsv",
             "t1\t\thello\t\n"
             "t2\t\thi\t\n");
  Manifest m =
      sc::data::load_manifest(dir + "text.tsv", Manifest::Kind::kTextOnly);
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  auto stream = sc::data::make_batches(m, nullptr, cfg);
  ASSERT_EQ(stream.batches.size(), 1u);
  const auto& b = stream.batches[0];
  EXPECT_FALSE(b.has_features());
  EXPECT_TRUE(b.has_tokens());
  // "hi" = <s> h i </s> (4), "hello" = 7. Shorter row padded with </s>.
  EXPECT_EQ(b.t_max, 7);
  EXPECT_EQ(b.token_lengths[0], 4);
  ASSERT_EQ(b.tokens[0].size(), 7u);
  for (size_t i = 4; i < 7; ++i) EXPECT_EQ(b.tokens[0][i], sc::text::kEos);
  auto seq = b.utterance_tokens(0);
  EXPECT_EQ(sc::text::decode(seq), "hi");
  EXPECT_THROW(b.utterance_mel(0), sc::DataError);
}

TEST(MakeBatches, SpeakerResolutionThroughTable) {
  std::string dir = fixture_dir();
  sc::dsp::DspConfig dcfg;
  sc::data::save_feature_pair(fake_features("s1", 5, 4, 6), dir + "s1", dcfg);
  sc::data::save_feature_pair(fake_features("s2", 6, 4, 6), dir + "s2", dcfg);
  write_file(dir + "spk.tsv",
             "s1\t" + dir + "s1\thello\tbea\n" +
             "s2\t" + dir + "s2\tworld\tabe\n");
  Manifest m =
      sc::data::load_manifest(dir + "spk.tsv", Manifest::Kind::kPaired);
  auto table = sc::data::build_speaker_table({&m});
  ASSERT_EQ(table.size(), 2u);
  EXPECT_EQ(table.at("abe"), 0);  // sorted tag order
  EXPECT_EQ(table.at("bea"), 1);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  cfg.speaker_table = &table;
  auto stream = sc::data::make_batches(m, &store, cfg);
  const auto& b = stream.batches[0];
  ASSERT_TRUE(b.speakers[0].has_value());
  // Sorted by length: s1 (5 frames) first, speaker "bea" -> index 1.
  EXPECT_EQ(b.ids[0], "s1");
  EXPECT_EQ(*b.speakers[0], 1);
  EXPECT_EQ(*b.speakers[1], 0);

  // Without a table the same manifest must fail loudly.
  cfg.speaker_table = nullptr;
  EXPECT_THROW(sc::data::make_batches(m, &store, cfg), sc::DataError);
}

TEST(MakeBatches, InvalidConfigsRejected) {
  std::string dir = fixture_dir();
  std::string path = build_corpus(dir, {{"u", 5, "x"}});
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  sc::data::BatchingConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(sc::data::make_batches(m, &store, cfg), sc::ConfigError);
  cfg = {};
  cfg.pad_frames_to = 0;
  EXPECT_THROW(sc::data::make_batches(m, &store, cfg), sc::ConfigError);
  cfg = {};
  EXPECT_THROW(sc::data::make_batches(m, nullptr, cfg), sc::ConfigError);
}

// The central batching invariant: computing a model loss through the padded
// batch (slicing each utterance by its mask) gives the same numbers as
// running every utterance alone on its raw features.
TEST(MakeBatches, BatchedRecognizerLossMatchesSingleUtteranceLoss) {
  std::string dir = fixture_dir();
  std::string path = build_corpus(dir,
                                  {{"u1", 10, "hello"},
                                   {"u2", 7, "hi there"},
                                   {"u3", 13, "good"},
                                   {"u4", 5, "yes"}},
                                  4, 6);
  Manifest m = sc::data::load_manifest(path, Manifest::Kind::kPaired);
  sc::data::FeatureStore store({});
  auto stats = sc::data::fit_feature_stats(m, store);

  sc::asr::ASRConfig acfg;
  acfg.input_dim = 4;
  acfg.proj_dim = 8;
  acfg.enc_layers = 3;
  acfg.enc_units = 8;
  acfg.embed_dim = 4;
  acfg.dec_units = 8;
  acfg.mlp_hidden = 8;
  acfg.classes = 35;
  sc::ModelParameters params("asr");
  sc::Rng rng(5, "batch-loss");
  sc::asr::AsrModel model(params, acfg, rng);

  // Reference: per-utterance losses computed directly from the store.
  std::map<std::string, double> direct;
  for (const auto& row : m.rows) {
    auto norm = stats.mel.apply(store.get(row.path).log_mel);
    auto x = sc::ad::Tensor::from_vector({norm.s, norm.d}, norm.frames);
    auto y = sc::text::encode(row.transcript);
    auto tf = model.forward_teacher_forced(x, y);
    direct[row.id] = sc::asr::loss_asr(y, tf.log_probs).values()[0];
  }

  sc::data::BatchingConfig cfg;
  cfg.batch_size = 2;
  cfg.pad_frames_to = 4;
  cfg.seed = 9;
  cfg.mel_stats = &stats.mel;
  cfg.magnitude_stats = &stats.magnitude;
  auto stream = sc::data::make_batches(m, &store, cfg);
  ASSERT_EQ(stream.batches.size(), 2u);
  int checked = 0;
  for (const auto& batch : stream.batches)
    for (int64_t b = 0; b < batch.size(); ++b) {
      auto tf = model.forward_teacher_forced(batch.utterance_mel(b),
                                             batch.utterance_tokens(b));
      double batched =
          sc::asr::loss_asr(batch.utterance_tokens(b), tf.log_probs)
              .values()[0];
      ASSERT_NEAR(batched, direct.at(batch.ids[b]), 1e-6) << batch.ids[b];
      ++checked;
    }
  EXPECT_EQ(checked, 4);
}
