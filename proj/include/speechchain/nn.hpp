// speechchain/nn.hpp
//
// Layers shared by the recognizer and the synthesizer: linear, embedding,
// LSTM/GRU cells, bidirectional runners, 1-d convolution, highway blocks,
// prenets, and the CBHG block (conv bank -> max pool -> projections ->
// residual -> highway stack -> bidirectional GRU).
//
// A layer registers its tensors into a ModelParameters collection at
// construction and keeps shared handles, so optimizer updates and checkpoint
// restores are visible to it immediately.

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

#ifndef SPEECHCHAIN_NN_HPP
#define SPEECHCHAIN_NN_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "speechchain/params.hpp"
#include "speechchain/rng.hpp"
#include "speechchain/tensor.hpp"

namespace speechchain {
namespace nn {

using ad::Tensor;

constexpr double kLeakySlope = 1e-2;

inline Tensor row(const Tensor& m, int64_t r) { return ad::slice(m, 0, r, 1); }

class Linear {
 public:
  Linear() = default;
  Linear(ModelParameters& p, const std::string& prefix, int64_t in,
         int64_t out, Rng& rng, bool bias = true)
      : w_(p.add(prefix + ".w", init_weight({in, out}, in, rng))),
        has_bias_(bias) {
    if (bias) b_ = p.add(prefix + ".b", init_zeros({out}));
  }

  Tensor forward(const Tensor& x) const {
    Tensor y = ad::matmul(x, w_);
    return has_bias_ ? ad::add(y, b_) : y;
  }

  const Tensor& weight() const { return w_; }
  Tensor& bias() { return b_; }

 private:
  Tensor w_, b_;
  bool has_bias_ = false;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ModelParameters& p, const std::string& prefix, int64_t vocab,
            int64_t dim, Rng& rng)
      : table_(p.add(prefix + ".table", init_embedding({vocab, dim}, rng))) {}

  Tensor forward(const std::vector<int64_t>& ids) const {
    return ad::embedding_lookup(table_, ids);
  }

  const Tensor& table() const { return table_; }

 private:
  Tensor table_;
};

class LstmCell {
 public:
  struct State {
    Tensor h, c;
  };

  LstmCell() = default;
  LstmCell(ModelParameters& p, const std::string& prefix, int64_t in,
           int64_t hidden, Rng& rng)
      : wx_(p.add(prefix + ".wx", init_weight({in, 4 * hidden}, in, rng))),
        wh_(p.add(prefix + ".wh",
                  init_weight({hidden, 4 * hidden}, hidden, rng))),
        b_(p.add(prefix + ".b", init_zeros({4 * hidden}))),
        hidden_(hidden) {}

  State initial() const {
    return {Tensor::zeros({1, hidden_}), Tensor::zeros({1, hidden_})};
  }

  // Input contribution for a whole sequence at once: (S, 4H).
  Tensor precompute(const Tensor& xs) const { return ad::matmul(xs, wx_); }

  State step(const Tensor& x, const State& s) const {
    return from_gates(ad::add(ad::matmul(x, wx_), ad::matmul(s.h, wh_)), s);
  }

  State step_precomputed(const Tensor& zx, const State& s) const {
    return from_gates(ad::add(zx, ad::matmul(s.h, wh_)), s);
  }

  int64_t hidden_size() const { return hidden_; }

 private:
  // Gate order: input, forget, cell candidate, output.
  State from_gates(const Tensor& pre, const State& s) const {
    Tensor z = ad::add(pre, b_);
    Tensor i = ad::sigmoid(ad::slice(z, 1, 0, hidden_));
    Tensor f = ad::sigmoid(ad::slice(z, 1, hidden_, hidden_));
    Tensor g = ad::tanh(ad::slice(z, 1, 2 * hidden_, hidden_));
    Tensor o = ad::sigmoid(ad::slice(z, 1, 3 * hidden_, hidden_));
    Tensor c = ad::add(ad::mul(f, s.c), ad::mul(i, g));
    Tensor h = ad::mul(o, ad::tanh(c));
    return {h, c};
  }

  Tensor wx_, wh_, b_;
  int64_t hidden_ = 0;
};

class GruCell {
 public:
  struct State {
    Tensor h;
  };

  GruCell() = default;
  GruCell(ModelParameters& p, const std::string& prefix, int64_t in,
          int64_t hidden, Rng& rng)
      : wx_(p.add(prefix + ".wx", init_weight({in, 3 * hidden}, in, rng))),
        wh_(p.add(prefix + ".wh",
                  init_weight({hidden, 3 * hidden}, hidden, rng))),
        b_(p.add(prefix + ".b", init_zeros({3 * hidden}))),
        hidden_(hidden) {}

  State initial() const { return {Tensor::zeros({1, hidden_})}; }

  Tensor precompute(const Tensor& xs) const { return ad::matmul(xs, wx_); }

  State step(const Tensor& x, const State& s) const {
    return from_gates(ad::matmul(x, wx_), s);
  }

  State step_precomputed(const Tensor& zx, const State& s) const {
    return from_gates(zx, s);
  }

  int64_t hidden_size() const { return hidden_; }

 private:
  // Gate order: update z, reset r, candidate n. The reset gate scales the
  // hidden contribution of the candidate.
  State from_gates(const Tensor& zx_raw, const State& s) const {
    Tensor zx = ad::add(zx_raw, b_);
    Tensor zh = ad::matmul(s.h, wh_);
    Tensor z = ad::sigmoid(ad::add(ad::slice(zx, 1, 0, hidden_),
                                   ad::slice(zh, 1, 0, hidden_)));
    Tensor r = ad::sigmoid(ad::add(ad::slice(zx, 1, hidden_, hidden_),
                                   ad::slice(zh, 1, hidden_, hidden_)));
    Tensor n = ad::tanh(
        ad::add(ad::slice(zx, 1, 2 * hidden_, hidden_),
                ad::mul(r, ad::slice(zh, 1, 2 * hidden_, hidden_))));
    // h' = (1 - z) * n + z * h
    Tensor h = ad::add(n, ad::mul(z, ad::sub(s.h, n)));
    return {h};
  }

  Tensor wx_, wh_, b_;
  int64_t hidden_ = 0;
};

// Runs a cell over a (S, D) sequence in both directions and concatenates the
// per-step hidden states into (S, 2H).
template <class Cell>
Tensor bidirectional(const Cell& fwd, const Cell& bwd, const Tensor& x) {
  int64_t s = x.dim(0);
  if (s < 1) throw ShapeError("bidirectional: empty sequence");
  Tensor zf = fwd.precompute(x);
  Tensor zb = bwd.precompute(x);
  int64_t gate_width = zf.dim(1);
  std::vector<Tensor> f_h(static_cast<size_t>(s)),
      b_h(static_cast<size_t>(s));
  auto sf = fwd.initial();
  for (int64_t t = 0; t < s; ++t) {
    sf = fwd.step_precomputed(ad::slice(zf, 0, t, 1), sf);
    f_h[static_cast<size_t>(t)] = sf.h;
  }
  auto sb = bwd.initial();
  for (int64_t t = s - 1; t >= 0; --t) {
    sb = bwd.step_precomputed(ad::slice(zb, 0, t, 1), sb);
    b_h[static_cast<size_t>(t)] = sb.h;
  }
  (void)gate_width;
  std::vector<Tensor> rows(static_cast<size_t>(s));
  for (int64_t t = 0; t < s; ++t)
    rows[static_cast<size_t>(t)] = ad::concat(
        {f_h[static_cast<size_t>(t)], b_h[static_cast<size_t>(t)]}, 1);
  return ad::concat(rows, 0);
}

// Keep rows 0, 2, 4, ...: output length ceil(S/2).
inline Tensor subsample_even_rows(const Tensor& x) {
  std::vector<int64_t> keep;
  for (int64_t t = 0; t < x.dim(0); t += 2) keep.push_back(t);
  return ad::gather_rows(x, keep);
}

// Stacked bidirectional LSTM with optional x2 time subsampling after chosen
// layers (the recognizer subsamples after each of the top two layers).
class BiLstmStack {
 public:
  BiLstmStack() = default;
  BiLstmStack(ModelParameters& p, const std::string& prefix, int64_t in,
              int64_t hidden_per_dir, int layers,
              std::vector<bool> subsample_after, Rng& rng)
      : subsample_after_(std::move(subsample_after)) {
    if (static_cast<int>(subsample_after_.size()) != layers)
      throw ConfigError("BiLstmStack: subsample flags must match layer count");
    int64_t d = in;
    for (int l = 0; l < layers; ++l) {
      std::string name = prefix + ".l" + std::to_string(l);
      fwd_.emplace_back(p, name + ".fwd", d, hidden_per_dir, rng);
      bwd_.emplace_back(p, name + ".bwd", d, hidden_per_dir, rng);
      d = 2 * hidden_per_dir;
    }
  }

  Tensor forward(const Tensor& x) const {
    Tensor h = x;
    for (size_t l = 0; l < fwd_.size(); ++l) {
      h = bidirectional(fwd_[l], bwd_[l], h);
      if (subsample_after_[l]) h = subsample_even_rows(h);
    }
    return h;
  }

 private:
  std::vector<LstmCell> fwd_, bwd_;
  std::vector<bool> subsample_after_;
};

class Conv1dLayer {
 public:
  Conv1dLayer() = default;
  Conv1dLayer(ModelParameters& p, const std::string& prefix, int64_t width,
              int64_t in, int64_t out, Rng& rng)
      : k_(p.add(prefix + ".k", init_weight({width, in, out}, width * in,
                                            rng))),
        b_(p.add(prefix + ".b", init_zeros({out}))) {}

  Tensor forward(const Tensor& x) const {
    return ad::add(ad::conv1d_same(x, k_), b_);
  }

 private:
  Tensor k_, b_;
};

// Gated residual transform: y = t * H(x) + (1 - t) * x.
class Highway {
 public:
  Highway() = default;
  Highway(ModelParameters& p, const std::string& prefix, int64_t dim,
          Rng& rng)
      : h_(p, prefix + ".h", dim, dim, rng),
        t_(p, prefix + ".t", dim, dim, rng) {}

  Tensor forward(const Tensor& x) const {
    Tensor h = ad::leaky_relu(h_.forward(x), kLeakySlope);
    Tensor t = ad::sigmoid(t_.forward(x));
    Tensor carry = ad::add_scalar(ad::scale(t, -1.0), 1.0);
    return ad::add(ad::mul(t, h), ad::mul(carry, x));
  }

  Linear& gate() { return t_; }

 private:
  Linear h_, t_;
};

// Fully connected stack with a leaky-relu after every layer.
class PreNet {
 public:
  PreNet() = default;
  PreNet(ModelParameters& p, const std::string& prefix, int64_t in,
         const std::vector<int64_t>& sizes, Rng& rng) {
    int64_t d = in;
    for (size_t i = 0; i < sizes.size(); ++i) {
      layers_.emplace_back(p, prefix + ".fc" + std::to_string(i), d, sizes[i],
                           rng);
      d = sizes[i];
    }
  }

  Tensor forward(const Tensor& x) const {
    Tensor h = x;
    for (const auto& l : layers_) h = ad::leaky_relu(l.forward(h), kLeakySlope);
    return h;
  }

 private:
  std::vector<Linear> layers_;
};

struct CbhgConfig {
  int64_t input_dim = 0;
  int bank_k = 8;             // conv bank filter widths 1..bank_k
  int64_t bank_channels = 128;
  int64_t proj_channels = 128;
  int highway_layers = 4;
  int64_t gru_units = 128;  // per direction
};

struct CbhgTrace {
  int64_t bank_width = 0;  // channels after concatenating the conv bank
};

class Cbhg {
 public:
  Cbhg() = default;
  Cbhg(ModelParameters& p, const std::string& prefix, const CbhgConfig& cfg,
       Rng& rng)
      : cfg_(cfg) {
    for (int k = 1; k <= cfg.bank_k; ++k)
      bank_.emplace_back(p, prefix + ".bank" + std::to_string(k), k,
                         cfg.input_dim, cfg.bank_channels, rng);
    proj1_ = Conv1dLayer(p, prefix + ".proj1", 3,
                         cfg.bank_k * cfg.bank_channels, cfg.proj_channels,
                         rng);
    proj2_ = Conv1dLayer(p, prefix + ".proj2", 3, cfg.proj_channels,
                         cfg.input_dim, rng);
    for (int i = 0; i < cfg.highway_layers; ++i)
      highways_.emplace_back(p, prefix + ".hw" + std::to_string(i),
                             cfg.input_dim, rng);
    gru_fwd_ = GruCell(p, prefix + ".gru.fwd", cfg.input_dim, cfg.gru_units,
                       rng);
    gru_bwd_ = GruCell(p, prefix + ".gru.bwd", cfg.input_dim, cfg.gru_units,
                       rng);
  }

  // (S, input_dim) -> (S, 2 * gru_units)
  Tensor forward(const Tensor& x, CbhgTrace* trace = nullptr) const {
    std::vector<Tensor> bank_outs;
    bank_outs.reserve(bank_.size());
    for (const auto& conv : bank_)
      bank_outs.push_back(ad::leaky_relu(conv.forward(x), kLeakySlope));
    Tensor stacked = ad::concat(bank_outs, 1);
    if (trace) trace->bank_width = stacked.dim(1);
    Tensor pooled = ad::max_pool1d_same(stacked);
    Tensor p1 = ad::leaky_relu(proj1_.forward(pooled), kLeakySlope);
    Tensor p2 = proj2_.forward(p1);  // linear: restores input_dim
    Tensor h = ad::add(p2, x);       // residual
    for (const auto& hw : highways_) h = hw.forward(h);
    return bidirectional(gru_fwd_, gru_bwd_, h);
  }

  int64_t output_dim() const { return 2 * cfg_.gru_units; }

 private:
  CbhgConfig cfg_;
  std::vector<Conv1dLayer> bank_;
  Conv1dLayer proj1_, proj2_;
  std::vector<Highway> highways_;
  GruCell gru_fwd_, gru_bwd_;
};

}  // namespace nn
}  // namespace speechchain

#endif  // SPEECHCHAIN_NN_HPP
