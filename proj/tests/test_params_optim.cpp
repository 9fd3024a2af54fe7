// Parameter registry, checkpoint round-trips, and optimizer update rules.

// Copyright 2026  speechchain authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "speechchain/optim.hpp"
#include "speechchain/params.hpp"
#include "speechchain/rng.hpp"

using speechchain::AdamOptimizer;
using speechchain::ModelParameters;
using speechchain::Rng;
using speechchain::SgdOptimizer;
namespace ad = speechchain::ad;
namespace ckpt = speechchain::ckpt;

namespace {

std::string read_bytes(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(is),
                     std::istreambuf_iterator<char>());
}

std::string temp_path(const std::string& name) {
  return std::string(::testing::TempDir()) + "/" + name;
}

ModelParameters sample_params() {
  ModelParameters p("test-model");
  p.add("enc.w", ad::Tensor::from_vector({2, 3}, {0.1, -1.0 / 3.0, 2.5, 0.0,
                                                  -0.0, 1e-300}));
  p.add("enc.b", ad::Tensor::from_vector({3}, {1.0, 2.0, 3.0}));
  p.add("dec.emb", ad::Tensor::from_vector({4, 2},
                                           {1, 2, 3, 4, 5, 6, 7, 8}));
  return p;
}

}  // namespace

TEST(Params, RegistrationIsOrderedAndUnique) {
  ModelParameters p = sample_params();
  EXPECT_EQ(p.size(), 3u);
  EXPECT_EQ(p.entries()[0].first, "enc.w");
  EXPECT_EQ(p.entries()[2].first, "dec.emb");
  EXPECT_TRUE(p.get("enc.b").requires_grad());
  EXPECT_THROW(p.add("enc.w", ad::Tensor::zeros({1})),
               speechchain::ConfigError);
  EXPECT_THROW(p.get("nope"), speechchain::ConfigError);
}

TEST(Params, CloneIsDeep) {
  ModelParameters p = sample_params();
  ModelParameters q = p.clone();
  q.get("enc.b").mutable_values()[0] = 99.0;
  EXPECT_DOUBLE_EQ(p.get("enc.b").values()[0], 1.0);
  EXPECT_DOUBLE_EQ(q.get("enc.b").values()[0], 99.0);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  ModelParameters p = sample_params();
  std::string path1 = temp_path("ckpt_a.bin");
  std::string path2 = temp_path("ckpt_b.bin");
  ckpt::save(p, path1);

  ModelParameters q = sample_params();
  // Wipe values, restore from file, save again.
  for (auto& [name, t] : q.entries())
    for (auto& v : t.mutable_values()) v = 1234.5;
  ckpt::restore(q, path1);
  ckpt::save(q, path2);

  std::string b1 = read_bytes(path1);
  std::string b2 = read_bytes(path2);
  ASSERT_FALSE(b1.empty());
  EXPECT_EQ(b1, b2);
  std::remove(path1.c_str());
  std::remove(path2.c_str());
}

TEST(Checkpoint, RoundTripIsBitExact) {
  ModelParameters p = sample_params();
  std::string path = temp_path("ckpt_exact.bin");
  ckpt::save(p, path);
  auto loaded = ckpt::load(path);
  EXPECT_EQ(loaded.version_tag, "test-model");
  ASSERT_EQ(loaded.entries.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(loaded.entries[i].first, p.entries()[i].first);
    ASSERT_EQ(loaded.entries[i].second.shape(), p.entries()[i].second.shape());
    const auto& a = loaded.entries[i].second.values();
    const auto& b = p.entries()[i].second.values();
    for (size_t j = 0; j < a.size(); ++j) {
      // Bit-exact, including signed zero.
      EXPECT_EQ(std::signbit(a[j]), std::signbit(b[j]));
      EXPECT_EQ(a[j], b[j]);
    }
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, StrictRestoreRejectsMismatchNamingParameters) {
  ModelParameters p = sample_params();
  std::string path = temp_path("ckpt_mismatch.bin");
  ckpt::save(p, path);

  ModelParameters q("test-model");
  q.add("enc.w", ad::Tensor::zeros({2, 3}));
  q.add("brand.new", ad::Tensor::zeros({2}));
  try {
    ckpt::restore(q, path);
    FAIL() << "expected DataError";
  } catch (const speechchain::DataError& e) {
    std::string msg = e.what();
    EXPECT_NE(msg.find("brand.new"), std::string::npos);
    EXPECT_NE(msg.find("enc.b"), std::string::npos);
    EXPECT_NE(msg.find("dec.emb"), std::string::npos);
  }
  std::remove(path.c_str());
}

TEST(Checkpoint, PartialRestoreLoadsIntersection) {
  ModelParameters p = sample_params();
  std::string path = temp_path("ckpt_partial.bin");
  ckpt::save(p, path);

  ModelParameters q("test-model");
  q.add("enc.w", ad::Tensor::zeros({2, 3}));
  q.add("speaker.table", ad::Tensor::zeros({2, 4}));
  auto report = ckpt::restore(q, path, /*allow_partial=*/true);
  EXPECT_EQ(report.loaded, std::vector<std::string>{"enc.w"});
  EXPECT_EQ(report.missing_in_file,
            std::vector<std::string>{"speaker.table"});
  EXPECT_EQ(report.extra_in_file.size(), 2u);
  EXPECT_DOUBLE_EQ(q.get("enc.w").values()[2], 2.5);
  std::remove(path.c_str());
}

TEST(Checkpoint, ShapeMismatchIsAnError) {
  ModelParameters p = sample_params();
  std::string path = temp_path("ckpt_shape.bin");
  ckpt::save(p, path);
  ModelParameters q("test-model");
  q.add("enc.w", ad::Tensor::zeros({3, 2}));
  EXPECT_THROW(ckpt::restore(q, path, true), speechchain::DataError);
  std::remove(path.c_str());
}

TEST(Checkpoint, RejectsCorruptFile) {
  std::string path = temp_path("ckpt_bad.bin");
  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  EXPECT_THROW(ckpt::load(path), speechchain::DataError);
  std::remove(path.c_str());
}

TEST(Optimizer, PlainSgdMatchesHandValue) {
  ModelParameters p("m");
  p.add("w", ad::Tensor::from_vector({1}, {1.0}));
  p.get("w").accumulate_grad({2.0});
  SgdOptimizer opt(0.1, 0.0, /*max_grad_norm=*/0.0);
  opt.step(p);
  EXPECT_DOUBLE_EQ(p.get("w").values()[0], 0.8);
  EXPECT_FALSE(p.get("w").has_grad());
  EXPECT_EQ(opt.step_count(), 1);
}

TEST(Optimizer, MomentumZeroGivesSameDeltaTwice) {
  ModelParameters p("m");
  p.add("w", ad::Tensor::from_vector({2}, {1.0, -2.0}));
  SgdOptimizer opt(0.05, 0.0, 0.0);
  p.get("w").accumulate_grad({3.0, -1.0});
  opt.step(p);
  double d0 = 1.0 - p.get("w").values()[0];
  double d1 = -2.0 - p.get("w").values()[1];
  p.get("w").accumulate_grad({3.0, -1.0});
  opt.step(p);
  EXPECT_DOUBLE_EQ(1.0 - p.get("w").values()[0], 2.0 * d0);
  EXPECT_DOUBLE_EQ(-2.0 - p.get("w").values()[1], 2.0 * d1);
}

TEST(Optimizer, MomentumAccumulatesVelocity) {
  ModelParameters p("m");
  p.add("w", ad::Tensor::from_vector({1}, {0.0}));
  SgdOptimizer opt(1.0, 0.5, 0.0);
  // v1 = 1, w = -1; v2 = 0.5 + 1 = 1.5, w = -2.5
  p.get("w").accumulate_grad({1.0});
  opt.step(p);
  EXPECT_DOUBLE_EQ(p.get("w").values()[0], -1.0);
  p.get("w").accumulate_grad({1.0});
  opt.step(p);
  EXPECT_DOUBLE_EQ(p.get("w").values()[0], -2.5);
}

TEST(Optimizer, AdamMatchesHandDerivedRecurrenceForThreeSteps) {
  // Constant gradient g: biased moments are m_t = g(1-b1^t), v_t = g^2(1-b2^t),
  // so the bias-corrected values are exactly g and g^2 and every update is
  // lr * g / (|g| + eps).
  ModelParameters p("m");
  p.add("w", ad::Tensor::from_vector({1}, {1.0}));
  AdamOptimizer opt(0.1, 0.9, 0.999, 1e-8, 0.0);
  double delta = 0.1 * 2.0 / (2.0 + 1e-8);
  double w = 1.0;
  for (int t = 1; t <= 3; ++t) {
    p.get("w").accumulate_grad({2.0});
    opt.step(p);
    w -= delta;
    EXPECT_NEAR(p.get("w").values()[0], w, 1e-12) << "step " << t;
  }
}

TEST(Optimizer, MissingGradientListsParameterName) {
  ModelParameters p("m");
  p.add("has.grad", ad::Tensor::from_vector({1}, {1.0}));
  p.add("no.grad", ad::Tensor::from_vector({1}, {1.0}));
  p.get("has.grad").accumulate_grad({1.0});
  SgdOptimizer opt(0.1);
  try {
    opt.step(p);
    FAIL() << "expected NumericError";
  } catch (const speechchain::NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("no.grad"), std::string::npos);
  }
}

TEST(Optimizer, GlobalNormClippingScalesUpdates) {
  ModelParameters p("m");
  p.add("w", ad::Tensor::from_vector({2}, {0.0, 0.0}));
  p.get("w").accumulate_grad({6.0, 8.0});  // norm 10 -> scaled by 0.5
  SgdOptimizer opt(1.0, 0.0, /*max_grad_norm=*/5.0);
  opt.step(p);
  EXPECT_DOUBLE_EQ(p.get("w").values()[0], -3.0);
  EXPECT_DOUBLE_EQ(p.get("w").values()[1], -4.0);

  // At or below the threshold nothing is scaled.
  p.get("w").mutable_values() = {0.0, 0.0};
  p.get("w").accumulate_grad({3.0, 4.0});  // norm 5
  opt.step(p);
  EXPECT_DOUBLE_EQ(p.get("w").values()[0], -3.0);
  EXPECT_DOUBLE_EQ(p.get("w").values()[1], -4.0);
}

TEST(Optimizer, StepsIntegrateWithBackward) {
  // One real gradient-descent step on f(w) = mean((x w - y)^2) must reduce f.
  Rng rng(5);
  ModelParameters p("m");
  p.add("w", speechchain::init_weight({3, 1}, 3, rng));
  ad::Tensor x = ad::Tensor::from_vector({4, 3}, {1, 0, 2, -1, 1, 0, 0.5, 2,
                                                  1, 0, -1, 1});
  ad::Tensor y = ad::Tensor::from_vector({4, 1}, {1, -1, 0.5, 2});
  auto loss_value = [&]() {
    ad::Tensor d = ad::sub(ad::matmul(x, p.get("w")), y);
    return ad::mean(ad::mul(d, d));
  };
  AdamOptimizer opt(0.05);
  double before = loss_value().item();
  for (int i = 0; i < 20; ++i) {
    loss_value().backward();
    opt.step(p);
  }
  double after = loss_value().item();
  EXPECT_LT(after, before);
}

TEST(Init, RespectsStatedRanges) {
  Rng rng(9);
  auto w = speechchain::init_weight({64, 16}, 64, rng);
  double bound = std::sqrt(1.0 / 64.0);
  for (double v : w.values()) {
    EXPECT_GE(v, -bound);
    EXPECT_LE(v, bound);
  }
  auto b = speechchain::init_zeros({16});
  for (double v : b.values()) EXPECT_EQ(v, 0.0);
  auto e = speechchain::init_embedding({100, 8}, rng);
  double mean = 0.0;
  for (double v : e.values()) mean += v;
  mean /= static_cast<double>(e.numel());
  EXPECT_NEAR(mean, 0.0, 0.02);
}
