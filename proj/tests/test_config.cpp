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

#include "speechchain/config.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <fstream>
#include <string>

namespace speechchain {
namespace {

std::string temp_path(const std::string& name) {
  static int counter = 0;
  return ::testing::TempDir() + "config_" + std::to_string(getpid()) + "_" +
         std::to_string(counter++) + "_" + name;
}

std::string write_file(const std::string& name, const std::string& body) {
  std::string path = temp_path(name);
  std::ofstream out(path);
  out << body;
  return path;
}

TEST(RunConfigFile, RenderedDefaultsRoundTrip) {
  config::RunConfig cfg;
  cfg.seed = 99;
  cfg.out_dir = "runs/demo";
  cfg.paired_manifest = "corpus/train_paired.tsv";
  cfg.chain.alpha = 0.25;
  cfg.dsp.shift_ms = 12.5;
  std::string rendered = config::render(cfg);
  std::string path = write_file("roundtrip.cfg", rendered);
  config::RunConfig loaded = config::load_run_config(path);
  EXPECT_EQ(config::render(loaded), rendered);
  EXPECT_EQ(loaded.seed, 99u);
  EXPECT_EQ(loaded.chain.seed, 99u);  // the shared seed reaches the trainer
  EXPECT_EQ(loaded.out_dir, "runs/demo");
  EXPECT_DOUBLE_EQ(loaded.chain.alpha, 0.25);
  EXPECT_DOUBLE_EQ(loaded.dsp.shift_ms, 12.5);
}

TEST(RunConfigFile, CommentsBlankLinesAndListsParse) {
  std::string path = write_file("lists.cfg",
                                "# front end\n"
                                "dsp.n_mels = 8   # narrow\n"
                                "\n"
                                "tts.enc_prenet = 16, 8\n"
                                "asr.scorer = dot\n"
                                "chain.generation_mode = beam\n");
  config::RunConfig cfg = config::load_run_config(path);
  EXPECT_EQ(cfg.dsp.n_mels, 8);
  EXPECT_EQ(cfg.tts.enc_prenet, (std::vector<int64_t>{16, 8}));
  EXPECT_EQ(cfg.asr.scorer, asr::ScorerKind::kDot);
  EXPECT_EQ(cfg.chain.generation_mode, "beam");
}

TEST(RunConfigFile, EveryProblemReportedWithItsLine) {
  std::string path = write_file("broken.cfg",
                                "dsp.n_mels = 8\n"
                                "volume = 11\n"          // line 2: unknown
                                "chain.alpha = fast\n"   // line 3: not a number
                                "just some words\n"      // line 4: no equals
                                "asr.enc_layers = 9999999999999\n");  // line 5
  try {
    config::load_run_config(path);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("volume"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 4"), std::string::npos) << msg;
    EXPECT_NE(msg.find("line 5"), std::string::npos) << msg;
  }
}

TEST(RunConfigFile, MissingFileIsAConfigError) {
  EXPECT_THROW(config::load_run_config(temp_path("absent.cfg")), ConfigError);
}

TEST(Overrides, ApplyAndRejectUnknownKeys) {
  config::RunConfig cfg;
  config::apply_override(cfg, "chain.beta=0");
  EXPECT_DOUBLE_EQ(cfg.chain.beta, 0.0);
  config::apply_override(cfg, " chain.optimizer = sgd ");
  EXPECT_EQ(cfg.chain.optimizer, "sgd");
  EXPECT_THROW(config::apply_override(cfg, "chain.gamma=1"), ConfigError);
  EXPECT_THROW(config::apply_override(cfg, "no equals sign"), ConfigError);
}

TEST(Validation, CrossFieldCouplingsCollected) {
  config::RunConfig cfg;  // defaults are mutually consistent
  EXPECT_NO_THROW(config::validate(cfg));
  cfg.asr.input_dim = 13;     // disagrees with dsp.n_mels = 40
  cfg.tts.linear_dim = 7;     // disagrees with fft bins
  cfg.chain.learning_rate = 0.0;
  try {
    config::validate(cfg);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("asr.input_dim"), std::string::npos) << msg;
    EXPECT_NE(msg.find("tts.linear_dim"), std::string::npos) << msg;
    EXPECT_NE(msg.find("learning_rate"), std::string::npos) << msg;
  }
}

TEST(Echo, ResolvedFileLoadsBackIdentically) {
  config::RunConfig cfg;
  cfg.seed = 7;
  cfg.chain.beta = 0.0;
  cfg.chain.alpha = 1.0;
  std::string dir = temp_path("echo_dir");
  std::string path = config::echo_into(cfg, dir);
  EXPECT_TRUE(path.ends_with("run_config.resolved"));
  config::RunConfig loaded = config::load_run_config(path);
  EXPECT_EQ(config::render(loaded), config::render(cfg));
}

}  // namespace
}  // namespace speechchain
