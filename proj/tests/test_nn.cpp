// Tests for the shared network layers: hand-computed cell steps, structural
// laws (shapes, subsampling), and finite-difference gradient checks through
// every layer type.

// Copyright 2026  speechchain authors
// Licensed under the Apache License, Version 2.0. See LICENSE.

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "grad_test_util.hpp"
#include "speechchain/nn.hpp"

namespace speechchain {
namespace nn {
namespace {

using ad::Tensor;

Tensor random_input(ad::Shape shape, Rng& rng) {
  std::vector<double> v(static_cast<size_t>(ad::shape_numel(shape)));
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return Tensor::from_vector(std::move(shape), std::move(v));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

TEST(Linear, MatchesManualAffine) {
  ModelParameters p("t");
  Rng rng(1, "linear");
  Linear lin(p, "lin", 3, 2, rng);
  Tensor x = Tensor::from_vector({1, 3}, {1.0, -2.0, 0.5});
  Tensor y = lin.forward(x);
  ASSERT_EQ(y.dim(0), 1);
  ASSERT_EQ(y.dim(1), 2);
  const auto& w = p.get("lin.w").values();
  const auto& b = p.get("lin.b").values();
  for (int j = 0; j < 2; ++j) {
    double want = 1.0 * w[static_cast<size_t>(j)] -
                  2.0 * w[static_cast<size_t>(2 + j)] +
                  0.5 * w[static_cast<size_t>(4 + j)] +
                  b[static_cast<size_t>(j)];
    EXPECT_NEAR(y.at(0, j), want, 1e-12);
  }
}

TEST(LstmCell, HandComputedStep) {
  // One unit, one input; set every weight by hand and follow the gate
  // arithmetic: i = s(0.5), f = s(-0.25), g = tanh(1.0), o = s(0.75) with
  // x = 1, h = 0.5, c = -0.2 and wx = [0.5, 0.25, 1.0, 0.25],
  // wh = [0, -1, 0, 1], b = 0.
  ModelParameters p("t");
  Rng rng(2, "lstm");
  LstmCell cell(p, "c", 1, 1, rng);
  p.get("c.wx").mutable_values() = {0.5, 0.25, 1.0, 0.25};
  p.get("c.wh").mutable_values() = {0.0, -1.0, 0.0, 1.0};
  p.get("c.b").mutable_values() = {0.0, 0.0, 0.0, 0.0};
  LstmCell::State s{Tensor::from_vector({1, 1}, {0.5}),
                    Tensor::from_vector({1, 1}, {-0.2})};
  Tensor x = Tensor::from_vector({1, 1}, {1.0});
  auto s2 = cell.step(x, s);
  double i = sigmoid(0.5), f = sigmoid(0.25 - 0.5), g = std::tanh(1.0),
         o = sigmoid(0.25 + 0.5);
  double c = f * -0.2 + i * g;
  EXPECT_NEAR(s2.c.item(), c, 1e-12);
  EXPECT_NEAR(s2.h.item(), o * std::tanh(c), 1e-12);
}

TEST(GruCell, HandComputedStep) {
  ModelParameters p("t");
  Rng rng(3, "gru");
  GruCell cell(p, "c", 1, 1, rng);
  p.get("c.wx").mutable_values() = {0.2, -0.4, 0.6};
  p.get("c.wh").mutable_values() = {0.1, 0.3, -0.5};
  p.get("c.b").mutable_values() = {0.05, -0.05, 0.0};
  Tensor x = Tensor::from_vector({1, 1}, {2.0});
  GruCell::State s{Tensor::from_vector({1, 1}, {-1.0})};
  auto s2 = cell.step(x, s);
  double z = sigmoid(2.0 * 0.2 + 0.05 + (-1.0) * 0.1);
  double r = sigmoid(2.0 * -0.4 - 0.05 + (-1.0) * 0.3);
  double n = std::tanh(2.0 * 0.6 + 0.0 + r * ((-1.0) * -0.5));
  double h = (1.0 - z) * n + z * -1.0;
  EXPECT_NEAR(s2.h.item(), h, 1e-12);
}

TEST(LstmCell, PrecomputedPathMatchesPlainStep) {
  ModelParameters p("t");
  Rng rng(4, "pre");
  LstmCell cell(p, "c", 3, 2, rng);
  Tensor xs = random_input({5, 3}, rng);
  Tensor zx = cell.precompute(xs);
  auto sa = cell.initial();
  auto sb = cell.initial();
  for (int64_t t = 0; t < 5; ++t) {
    sa = cell.step(ad::slice(xs, 0, t, 1), sa);
    sb = cell.step_precomputed(ad::slice(zx, 0, t, 1), sb);
    for (int64_t j = 0; j < 2; ++j)
      EXPECT_NEAR(sa.h.at(0, j), sb.h.at(0, j), 1e-12);
  }
}

TEST(Bidirectional, ShapeAndContent) {
  ModelParameters p("t");
  Rng rng(5, "bi");
  LstmCell fwd(p, "f", 2, 3, rng), bwd(p, "b", 2, 3, rng);
  Tensor xs = random_input({4, 2}, rng);
  Tensor y = bidirectional(fwd, bwd, xs);
  ASSERT_EQ(y.dim(0), 4);
  ASSERT_EQ(y.dim(1), 6);
  // Forward half of row 0 must equal a single forward step from zero state.
  auto s1 = fwd.step(ad::slice(xs, 0, 0, 1), fwd.initial());
  for (int64_t j = 0; j < 3; ++j) EXPECT_NEAR(y.at(0, j), s1.h.at(0, j), 1e-12);
  // Backward half of the last row must equal a single backward step.
  auto s2 = bwd.step(ad::slice(xs, 0, 3, 1), bwd.initial());
  for (int64_t j = 0; j < 3; ++j)
    EXPECT_NEAR(y.at(3, 3 + j), s2.h.at(0, j), 1e-12);
}

TEST(Subsample, KeepsEvenRowsCeilLaw) {
  for (int64_t s = 1; s <= 9; ++s) {
    std::vector<double> v(static_cast<size_t>(s));
    for (int64_t i = 0; i < s; ++i) v[static_cast<size_t>(i)] = double(i);
    Tensor x = Tensor::from_vector({s, 1}, std::move(v));
    Tensor y = subsample_even_rows(x);
    EXPECT_EQ(y.dim(0), (s + 1) / 2);
    for (int64_t i = 0; i < y.dim(0); ++i)
      EXPECT_DOUBLE_EQ(y.at(i, 0), double(2 * i));
  }
}

TEST(BiLstmStack, TopTwoLayerSubsamplingQuartersLength) {
  ModelParameters p("t");
  Rng rng(6, "stack");
  BiLstmStack stack(p, "enc", 3, 2, 3, {false, true, true}, rng);
  for (int64_t s : {1, 2, 3, 4, 5, 7, 8, 15, 16, 33}) {
    Tensor xs = random_input({s, 3}, rng);
    Tensor y = stack.forward(xs);
    int64_t want = (s + 3) / 4;  // ceil(s / 4)
    EXPECT_EQ(y.dim(0), want) << "s = " << s;
    EXPECT_EQ(y.dim(1), 4);
  }
}

TEST(Highway, ClosedGatePassesInputThrough) {
  ModelParameters p("t");
  Rng rng(7, "hw");
  Highway hw(p, "hw", 3, rng);
  // Drive the transform gate to ~0 so the carry path dominates.
  for (auto& b : hw.gate().bias().mutable_values()) b = -50.0;
  Tensor x = random_input({2, 3}, rng);
  Tensor y = hw.forward(x);
  for (int64_t i = 0; i < 2; ++i)
    for (int64_t j = 0; j < 3; ++j) EXPECT_NEAR(y.at(i, j), x.at(i, j), 1e-9);
}

TEST(PreNet, AppliesEachLayerWithLeakyRelu) {
  ModelParameters p("t");
  Rng rng(8, "pn");
  PreNet pn(p, "pn", 4, {5, 3}, rng);
  Tensor x = random_input({2, 4}, rng);
  Tensor y = pn.forward(x);
  ASSERT_EQ(y.dim(0), 2);
  ASSERT_EQ(y.dim(1), 3);
  EXPECT_TRUE(p.has("pn.fc0.w"));
  EXPECT_TRUE(p.has("pn.fc1.w"));
}

TEST(Cbhg, OutputShapeAndBankWidth) {
  ModelParameters p("t");
  Rng rng(9, "cbhg");
  CbhgConfig cfg;
  cfg.input_dim = 4;
  cfg.bank_k = 3;
  cfg.bank_channels = 2;
  cfg.proj_channels = 5;
  cfg.highway_layers = 4;
  cfg.gru_units = 3;
  Cbhg cbhg(p, "c", cfg, rng);
  Tensor x = random_input({6, 4}, rng);
  CbhgTrace trace;
  Tensor y = cbhg.forward(x, &trace);
  EXPECT_EQ(trace.bank_width, 3 * 2);
  ASSERT_EQ(y.dim(0), 6);
  ASSERT_EQ(y.dim(1), 6);
  EXPECT_EQ(cbhg.output_dim(), 6);
}

TEST(Cbhg, FullWidthBankConcatenatesEightBy128Channels) {
  ModelParameters p("t");
  Rng rng(10, "cbhg-full");
  CbhgConfig cfg;
  cfg.input_dim = 128;
  cfg.bank_k = 8;
  cfg.bank_channels = 128;
  cfg.proj_channels = 128;
  cfg.highway_layers = 4;
  cfg.gru_units = 128;
  Cbhg cbhg(p, "c", cfg, rng);
  Tensor x = random_input({3, 128}, rng);
  CbhgTrace trace;
  Tensor y = cbhg.forward(x, &trace);
  EXPECT_EQ(trace.bank_width, 8 * 128);
  EXPECT_EQ(y.dim(1), 256);
}

TEST(InitDeterminism, SameSeedSameParameters) {
  ModelParameters p1("t"), p2("t");
  Rng r1(42, "det"), r2(42, "det");
  Cbhg a(p1, "c", CbhgConfig{4, 2, 3, 5, 2, 3}, r1);
  Cbhg b(p2, "c", CbhgConfig{4, 2, 3, 5, 2, 3}, r2);
  ASSERT_EQ(p1.size(), p2.size());
  for (const auto& [name, tensor] : p1.entries()) {
    const auto& other = p2.get(name).values();
    ASSERT_EQ(tensor.values().size(), other.size());
    for (size_t i = 0; i < other.size(); ++i)
      EXPECT_EQ(tensor.values()[i], other[i]) << name;
  }
}

// ---- finite-difference gradient checks through each layer type ----

TEST(GradCheck, LstmSequenceLoss) {
  ModelParameters p("t");
  Rng rng(11, "gc-lstm");
  LstmCell cell(p, "c", 2, 3, rng);
  Linear head(p, "head", 3, 1, rng);
  Tensor xs = random_input({4, 2}, rng);
  auto loss = [&]() {
    auto s = cell.initial();
    Tensor zx = cell.precompute(xs);
    std::vector<Tensor> hs;
    for (int64_t t = 0; t < 4; ++t) {
      s = cell.step_precomputed(ad::slice(zx, 0, t, 1), s);
      hs.push_back(s.h);
    }
    return ad::mean(head.forward(ad::concat(hs, 0)));
  };
  auto report = testutil::check_model_gradients(loss, p);
  EXPECT_LT(report.max_rel_err, 1e-4)
      << report.worst_param << "[" << report.worst_index
      << "] analytic=" << report.analytic << " numeric=" << report.numeric;
}

TEST(GradCheck, BidirectionalGru) {
  ModelParameters p("t");
  Rng rng(12, "gc-gru");
  GruCell fwd(p, "f", 2, 2, rng), bwd(p, "b", 2, 2, rng);
  Tensor xs = random_input({3, 2}, rng);
  auto loss = [&]() {
    Tensor y = bidirectional(fwd, bwd, xs);
    return ad::mean(ad::mul(y, y));
  };
  auto report = testutil::check_model_gradients(loss, p);
  EXPECT_LT(report.max_rel_err, 1e-4) << report.worst_param;
}

TEST(GradCheck, CbhgEndToEnd) {
  ModelParameters p("t");
  Rng rng(13, "gc-cbhg");
  CbhgConfig cfg;
  cfg.input_dim = 3;
  cfg.bank_k = 2;
  cfg.bank_channels = 2;
  cfg.proj_channels = 3;
  cfg.highway_layers = 2;
  cfg.gru_units = 2;
  Cbhg cbhg(p, "c", cfg, rng);
  Tensor x = random_input({4, 3}, rng);
  auto loss = [&]() { return ad::mean(ad::mul(cbhg.forward(x), cbhg.forward(x))); };
  auto report = testutil::check_model_gradients(loss, p);
  EXPECT_LT(report.max_rel_err, 1e-4) << report.worst_param;
}

TEST(GradCheck, BiLstmStackWithSubsampling) {
  ModelParameters p("t");
  Rng rng(14, "gc-stack");
  BiLstmStack stack(p, "s", 2, 2, 3, {false, true, true}, rng);
  Tensor x = random_input({6, 2}, rng);
  auto loss = [&]() { return ad::mean(stack.forward(x)); };
  auto report = testutil::check_model_gradients(loss, p);
  EXPECT_LT(report.max_rel_err, 1e-4) << report.worst_param;
}

TEST(GradCheck, EmbeddingAndHighway) {
  ModelParameters p("t");
  Rng rng(15, "gc-emb");
  Embedding emb(p, "e", 5, 3, rng);
  Highway hw(p, "hw", 3, rng);
  std::vector<int64_t> ids = {1, 3, 1, 4};
  auto loss = [&]() { return ad::mean(hw.forward(emb.forward(ids))); };
  auto report = testutil::check_model_gradients(loss, p);
  EXPECT_LT(report.max_rel_err, 1e-4) << report.worst_param;
}

}  // namespace
}  // namespace nn
}  // namespace speechchain
