// speechchain/asr.hpp
//
// Attention-based encoder-decoder speech recognizer. The encoder projects
// log-mel frames through a leaky-relu layer and three bidirectional LSTM
// layers, halving the frame rate after each of the top two layers (factor 4
// total). The decoder is a single LSTM fed [embedding(prev token); prev
// context]; the output layer consumes [decoder state; fresh context].

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

#ifndef SPEECHCHAIN_ASR_HPP
#define SPEECHCHAIN_ASR_HPP

#include <any>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "speechchain/nn.hpp"
#include "speechchain/search.hpp"
#include "speechchain/text.hpp"

namespace speechchain {
namespace asr {

using ad::Tensor;

enum class ScorerKind { kDot, kBilinear, kMlp };

inline ScorerKind scorer_from_string(const std::string& s) {
  if (s == "dot") return ScorerKind::kDot;
  if (s == "bilinear") return ScorerKind::kBilinear;
  if (s == "mlp") return ScorerKind::kMlp;
  throw ConfigError("unknown attention scorer \"" + s +
                    "\" (expected dot, bilinear, or mlp)");
}

inline std::string scorer_to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::kDot: return "dot";
    case ScorerKind::kBilinear: return "bilinear";
    case ScorerKind::kMlp: return "mlp";
  }
  return "?";
}

struct ASRConfig {
  int64_t input_dim = 40;   // log-mel bands
  int64_t proj_dim = 512;   // input projection, leaky-relu
  int enc_layers = 3;       // bidirectional layers
  int64_t enc_units = 256;  // per direction
  int64_t embed_dim = 128;  // character embedding
  int64_t dec_units = 512;  // decoder LSTM
  int64_t mlp_hidden = 512; // scorer hidden width for the mlp kind
  ScorerKind scorer = ScorerKind::kMlp;
  int64_t classes = text::kVocabSize;

  int64_t enc_width() const { return 2 * enc_units; }

  void validate() const {
    std::vector<std::string> problems;
    auto positive = [&](int64_t v, const char* what) {
      if (v <= 0)
        problems.push_back(std::string(what) + " must be positive, got " +
                           std::to_string(v));
    };
    positive(input_dim, "recognizer input dim");
    positive(proj_dim, "recognizer projection dim");
    positive(enc_layers, "recognizer encoder layer count");
    positive(enc_units, "recognizer encoder units");
    positive(embed_dim, "recognizer embedding dim");
    positive(dec_units, "recognizer decoder units");
    positive(mlp_hidden, "recognizer scorer hidden width");
    positive(classes, "recognizer class count");
    if (scorer == ScorerKind::kDot && enc_width() != dec_units)
      problems.push_back(
          "dot scorer requires encoder width == decoder units (" +
          std::to_string(enc_width()) + " vs " + std::to_string(dec_units) +
          ")");
    if (!problems.empty()) {
      std::string msg = "invalid recognizer config:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
  }
};

struct EncoderStates {
  Tensor h;                // (S', 2 * enc_units)
  std::vector<bool> mask;  // true = position may receive attention
};

struct AttentionResult {
  Tensor weights;  // (1, S'), nonnegative, sums to 1 over unmasked positions
  Tensor context;  // (1, 2 * enc_units) = weights . h
};

struct TeacherForcedResult {
  Tensor log_probs;                       // (T, C), rows are log-distributions
  std::vector<Tensor> attention_weights;  // one (1, S') row per step
};

// (-1/T) sum_t log p(y_t | y_<t, x). Works on log-probabilities, so a tiny
// target probability never produces -inf.
inline Tensor loss_asr(const text::TokenSequence& y, const Tensor& log_probs) {
  int64_t t_len = y.target_length();
  if (t_len != log_probs.dim(0))
    throw ShapeError("loss_asr: target length " + std::to_string(t_len) +
                     " does not match " + std::to_string(log_probs.dim(0)) +
                     " predicted distributions");
  int64_t c = log_probs.dim(1);
  std::vector<double> onehot(static_cast<size_t>(t_len * c), 0.0);
  for (int64_t t = 0; t < t_len; ++t) {
    int64_t id = y.ids[static_cast<size_t>(t + 1)];
    if (id < 0 || id >= c)
      throw DataError("loss_asr: token id " + std::to_string(id) +
                      " outside class range " + std::to_string(c));
    onehot[static_cast<size_t>(t * c + id)] = 1.0;
  }
  Tensor mask = Tensor::from_vector({t_len, c}, std::move(onehot));
  return ad::scale(ad::sum(ad::mul(log_probs, mask)),
                   -1.0 / static_cast<double>(t_len));
}

class AsrModel {
 public:
  AsrModel(ModelParameters& params, const ASRConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    cfg.validate();
    proj_ = nn::Linear(params, "asr.enc.proj", cfg.input_dim, cfg.proj_dim,
                       rng);
    std::vector<bool> subsample(static_cast<size_t>(cfg.enc_layers), false);
    // Halve the frame rate after each of the top two layers.
    for (int l = cfg.enc_layers - 2; l < cfg.enc_layers; ++l)
      if (l >= 0) subsample[static_cast<size_t>(l)] = true;
    stack_ = nn::BiLstmStack(params, "asr.enc.stack", cfg.proj_dim,
                             cfg.enc_units, cfg.enc_layers, subsample, rng);
    embed_ = nn::Embedding(params, "asr.dec.embed", cfg.classes,
                           cfg.embed_dim, rng);
    dec_ = nn::LstmCell(params, "asr.dec.lstm",
                        cfg.embed_dim + cfg.enc_width(), cfg.dec_units, rng);
    switch (cfg.scorer) {
      case ScorerKind::kDot:
        break;  // parameter-free
      case ScorerKind::kBilinear:
        bilinear_w_ = params.add(
            "asr.att.w",
            init_weight({cfg.enc_width(), cfg.dec_units}, cfg.enc_width(),
                        rng));
        break;
      case ScorerKind::kMlp:
        mlp_w_enc_ = params.add(
            "asr.att.w_enc",
            init_weight({cfg.enc_width(), cfg.mlp_hidden}, cfg.enc_width(),
                        rng));
        mlp_w_dec_ = params.add(
            "asr.att.w_dec",
            init_weight({cfg.dec_units, cfg.mlp_hidden}, cfg.dec_units, rng));
        mlp_v_ = params.add(
            "asr.att.v",
            init_weight({cfg.mlp_hidden, 1}, cfg.mlp_hidden, rng));
        break;
    }
    out_ = nn::Linear(params, "asr.dec.out", cfg.dec_units + cfg.enc_width(),
                      cfg.classes, rng);
  }

  const ASRConfig& config() const { return cfg_; }

  // (S, D) normalized log-mel -> (ceil(S/4), 2 * enc_units)
  EncoderStates encode(const Tensor& x) const {
    if (x.rank() != 2 || x.dim(1) != cfg_.input_dim)
      throw ShapeError("recognizer encode: expected (S, " +
                       std::to_string(cfg_.input_dim) + ") input");
    if (x.dim(0) == 0)
      throw DataError("recognizer encode: empty feature sequence");
    Tensor h = ad::leaky_relu(proj_.forward(x), nn::kLeakySlope);
    h = stack_.forward(h);
    EncoderStates enc;
    enc.mask.assign(static_cast<size_t>(h.dim(0)), true);
    enc.h = std::move(h);
    return enc;
  }

  // Raw attention scores of a decoder state against every encoder row:
  // (S', 1). Exposed for unit-level checks of the scorer variants.
  Tensor score(const Tensor& enc_rows, const Tensor& dec_state) const {
    switch (cfg_.scorer) {
      case ScorerKind::kDot: {
        if (enc_rows.dim(1) != dec_state.dim(1))
          throw ShapeError(
              "dot scorer: encoder width " + std::to_string(enc_rows.dim(1)) +
              " != decoder width " + std::to_string(dec_state.dim(1)));
        return row_sums(ad::mul(enc_rows, dec_state));
      }
      case ScorerKind::kBilinear:
        return row_sums(ad::mul(ad::matmul(enc_rows, bilinear_w_), dec_state));
      case ScorerKind::kMlp: {
        Tensor pre = ad::add(ad::matmul(enc_rows, mlp_w_enc_),
                             ad::matmul(dec_state, mlp_w_dec_));
        return ad::matmul(ad::tanh(pre), mlp_v_);
      }
    }
    throw ConfigError("recognizer: unknown scorer kind");
  }

  AttentionResult attend(const EncoderStates& enc,
                         const Tensor& dec_state) const {
    int64_t s = enc.h.dim(0);
    bool any = false;
    for (bool m : enc.mask) any = any || m;
    if (!any)
      throw NumericError("attend: every encoder position is masked");
    Tensor scores = ad::reshape(score(enc.h, dec_state), {1, s});
    if (static_cast<int64_t>(enc.mask.size()) != s)
      throw ShapeError("attend: mask length does not match encoder states");
    bool all = true;
    for (bool m : enc.mask) all = all && m;
    if (!all) {
      // Push masked positions far below any real score before the softmax.
      std::vector<double> offs(static_cast<size_t>(s), 0.0);
      for (int64_t i = 0; i < s; ++i)
        if (!enc.mask[static_cast<size_t>(i)])
          offs[static_cast<size_t>(i)] = -1e30;
      scores = ad::add(scores, Tensor::from_vector({1, s}, std::move(offs)));
    }
    AttentionResult att;
    att.weights = ad::softmax(scores, 1);
    att.context = ad::matmul(att.weights, enc.h);
    return att;
  }

  // Distributions over the next token for every position of y, conditioned
  // on the gold prefix (teacher forcing).
  TeacherForcedResult forward_teacher_forced(
      const Tensor& x, const text::TokenSequence& y) const {
    EncoderStates enc = encode(x);
    return decode_teacher_forced(enc, y);
  }

  TeacherForcedResult decode_teacher_forced(
      const EncoderStates& enc, const text::TokenSequence& y) const {
    int64_t t_len = y.target_length();
    if (t_len < 1)
      throw DataError("recognizer: token sequence has no targets");
    for (int64_t id : y.ids)
      if (id < 0 || id >= cfg_.classes)
        throw DataError("recognizer: token id " + std::to_string(id) +
                        " outside class range " +
                        std::to_string(cfg_.classes));
    TeacherForcedResult res;
    Tensor context = Tensor::zeros({1, cfg_.enc_width()});
    nn::LstmCell::State state = dec_.initial();
    std::vector<Tensor> rows;
    rows.reserve(static_cast<size_t>(t_len));
    for (int64_t t = 0; t < t_len; ++t) {
      int64_t prev = y.ids[static_cast<size_t>(t)];
      Tensor inp = ad::concat({embed_.forward({prev}), context}, 1);
      state = dec_.step(inp, state);
      AttentionResult att = attend(enc, state.h);
      context = att.context;
      res.attention_weights.push_back(att.weights);
      Tensor logits = out_.forward(ad::concat({state.h, context}, 1));
      rows.push_back(ad::log_softmax(logits, 1));
    }
    res.log_probs = ad::concat(rows, 0);
    return res;
  }

  search::DecodeResult greedy_decode(const Tensor& x, int64_t max_len) const {
    ad::NoGradGuard guard;
    EncoderStates enc = encode(x);
    return search::greedy(make_stepper(enc), max_len);
  }

  search::DecodeResult beam_search_decode(const Tensor& x, int beam_size,
                                          int64_t max_len) const {
    ad::NoGradGuard guard;
    EncoderStates enc = encode(x);
    return search::beam(make_stepper(enc), beam_size, max_len);
  }

  // Decoding over precomputed encoder states (used by the chain loop to
  // avoid re-encoding).
  search::DecodeResult beam_search_decode(const EncoderStates& enc,
                                          int beam_size,
                                          int64_t max_len) const {
    ad::NoGradGuard guard;
    return search::beam(make_stepper(enc), beam_size, max_len);
  }

 private:
  struct StepState {
    nn::LstmCell::State lstm;
    Tensor context;
    std::vector<double> log_probs;
  };

  // State after consuming one token: decoder advanced, next-token
  // distribution cached.
  StepState advance_state(const EncoderStates& enc, const StepState* prev,
                          int64_t token) const {
    StepState next;
    Tensor prev_context =
        prev ? prev->context : Tensor::zeros({1, cfg_.enc_width()});
    nn::LstmCell::State prev_lstm = prev ? prev->lstm : dec_.initial();
    Tensor inp = ad::concat({embed_.forward({token}), prev_context}, 1);
    next.lstm = dec_.step(inp, prev_lstm);
    AttentionResult att = attend(enc, next.lstm.h);
    next.context = att.context;
    Tensor logp =
        ad::log_softmax(out_.forward(ad::concat({next.lstm.h, next.context}, 1)),
                        1);
    next.log_probs = logp.values();
    return next;
  }

  search::Stepper make_stepper(const EncoderStates& enc) const {
    search::Stepper st;
    st.num_classes = cfg_.classes;
    st.bos_id = text::kBos;
    st.eos_id = text::kEos;
    st.initial = [this, &enc]() {
      return std::any(advance_state(enc, nullptr, text::kBos));
    };
    st.log_probs = [](const std::any& s) {
      return std::any_cast<const StepState&>(s).log_probs;
    };
    st.advance = [this, &enc](const std::any& s, int64_t token) {
      return std::any(
          advance_state(enc, &std::any_cast<const StepState&>(s), token));
    };
    return st;
  }

  static Tensor row_sums(const Tensor& m) {
    std::vector<double> ones(static_cast<size_t>(m.dim(1)), 1.0);
    return ad::matmul(m, Tensor::from_vector({m.dim(1), 1}, std::move(ones)));
  }

  ASRConfig cfg_;
  nn::Linear proj_;
  nn::BiLstmStack stack_;
  nn::Embedding embed_;
  nn::LstmCell dec_;
  Tensor bilinear_w_, mlp_w_enc_, mlp_w_dec_, mlp_v_;
  nn::Linear out_;
};

}  // namespace asr
}  // namespace speechchain

#endif  // SPEECHCHAIN_ASR_HPP
