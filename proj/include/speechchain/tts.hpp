// speechchain/tts.hpp
//
// Sequence-to-sequence speech synthesizer with three output heads: mel
// frames (r at a time), per-frame end flags, and a full linear-spectrogram
// reconstruction computed from the predicted mel sequence by a second CBHG.
// Attention is a single Gaussian window over encoder positions whose mean
// advances by exp(predicted value) each step, so the expected attention
// position is non-decreasing by construction. An optional speaker embedding
// is projected and concatenated at the decoder input, the mel regression
// input, and the linear regression input.

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

#ifndef SPEECHCHAIN_TTS_HPP
#define SPEECHCHAIN_TTS_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "speechchain/nn.hpp"
#include "speechchain/text.hpp"

namespace speechchain {
namespace tts {

using ad::Tensor;

struct TTSConfig {
  int64_t vocab = text::kVocabSize;
  int64_t embed_dim = 256;
  std::vector<int64_t> enc_prenet = {256, 128};
  std::vector<int64_t> dec_prenet = {256, 128};
  int bank_k = 8;              // conv bank widths 1..bank_k (both CBHGs)
  int64_t bank_channels = 128;
  int64_t proj_channels = 128;
  int highway_layers = 4;
  int64_t gru_units = 128;     // per direction (both CBHGs)
  int64_t dec_units = 256;     // each of the two stacked decoder LSTMs
  int64_t r = 4;               // mel frames emitted per decoder step
  int64_t mel_dim = 40;
  int64_t linear_dim = 1025;
  double attention_sigma = 1.0;  // Gaussian window width, fixed per utterance
  int64_t num_speakers = 0;
  int64_t speaker_dim = 0;   // 0 disables the speaker pathway entirely
  int64_t speaker_proj = 32;

  int64_t enc_out() const { return 2 * gru_units; }

  void validate() const {
    std::vector<std::string> problems;
    auto positive = [&](int64_t v, const char* what) {
      if (v <= 0)
        problems.push_back(std::string(what) + " must be positive, got " +
                           std::to_string(v));
    };
    positive(vocab, "synthesizer vocab");
    positive(embed_dim, "synthesizer embedding dim");
    positive(bank_k, "synthesizer conv bank size");
    positive(bank_channels, "synthesizer bank channels");
    positive(proj_channels, "synthesizer projection channels");
    positive(highway_layers, "synthesizer highway layer count");
    positive(gru_units, "synthesizer recurrent units");
    positive(dec_units, "synthesizer decoder units");
    positive(r, "synthesizer reduction factor");
    positive(mel_dim, "synthesizer mel dim");
    positive(linear_dim, "synthesizer linear dim");
    if (enc_prenet.empty() || dec_prenet.empty())
      problems.push_back("synthesizer prenets need at least one layer");
    if (attention_sigma <= 0.0)
      problems.push_back("synthesizer attention sigma must be positive");
    if (speaker_dim < 0 || num_speakers < 0)
      problems.push_back("synthesizer speaker settings must be nonnegative");
    if (speaker_dim > 0 && num_speakers <= 0)
      problems.push_back(
          "synthesizer speaker embedding enabled but speaker count is 0");
    if (speaker_dim > 0 && speaker_proj <= 0)
      problems.push_back("synthesizer speaker projection must be positive");
    if (!problems.empty()) {
      std::string msg = "invalid synthesizer config:";
      for (const auto& p : problems) msg += "\n  - " + p;
      throw ConfigError(msg);
    }
  }

  bool speakers_enabled() const { return speaker_dim > 0; }
};

struct TTSOutput {
  Tensor mel;     // (S, mel_dim)
  Tensor linear;  // (S, linear_dim)
  Tensor flags;   // (S, 1), probabilities in (0, 1)
  std::vector<std::vector<double>> alignments;  // one weight row per step
  int64_t padded_frames = 0;  // trailing frames beyond the caller's sequence
};

struct DecoderState {
  nn::LstmCell::State lstm1, lstm2;
  Tensor context;  // (1, enc_out)
  Tensor mu;       // (1, 1) attention window mean, in encoder positions
};

struct DecodeStepResult {
  Tensor mel_frames;   // (r, mel_dim)
  Tensor flag_probs;   // (r, 1)
  Tensor context;      // (1, enc_out)
  Tensor att_weights;  // (1, T)
};

// Index of the first frame whose end-flag probability exceeds 0.5, or -1.
inline int64_t first_stop_index(const Tensor& flags) {
  for (int64_t s = 0; s < flags.dim(0); ++s)
    if (flags.at(s, 0) > 0.5) return s;
  return -1;
}

// Gold end flags: 1 on every frame of the final r-group (which covers any
// padding frames), 0 elsewhere.
inline Tensor gold_end_flags(int64_t padded_len, int64_t r) {
  if (padded_len <= 0 || r <= 0 || padded_len % r != 0)
    throw ShapeError("gold_end_flags: length " + std::to_string(padded_len) +
                     " is not a positive multiple of r=" + std::to_string(r));
  std::vector<double> v(static_cast<size_t>(padded_len), 0.0);
  for (int64_t s = padded_len - r; s < padded_len; ++s)
    v[static_cast<size_t>(s)] = 1.0;
  return Tensor::from_vector({padded_len, 1}, std::move(v));
}

// Replicates the last row until the frame count is a multiple of r.
inline Tensor pad_frames_to_multiple(const Tensor& frames, int64_t r,
                                     int64_t* padded_count = nullptr) {
  int64_t s = frames.dim(0);
  if (s == 0) throw ShapeError("pad_frames_to_multiple: empty sequence");
  int64_t target = ((s + r - 1) / r) * r;
  if (padded_count) *padded_count = target - s;
  if (target == s) return frames;
  std::vector<Tensor> parts = {frames};
  for (int64_t i = s; i < target; ++i)
    parts.push_back(ad::slice(frames, 0, s - 1, 1));
  return ad::concat(parts, 0);
}

struct TTSLossTerms {
  Tensor total;
  Tensor mel_term, linear_term, flag_term;
};

// Mean over frames of: mel MSE + linear MSE + end-flag binary cross-entropy,
// where each MSE also averages over the feature dimension so the 40-dim and
// 1025-dim terms are scale-comparable. Predicted flags are clamped to
// [1e-7, 1 - 1e-7] before the logs.
inline TTSLossTerms loss_tts(const Tensor& gold_mel, const Tensor& mel_hat,
                             const Tensor& gold_linear,
                             const Tensor& linear_hat, const Tensor& gold_b,
                             const Tensor& b_hat) {
  auto check_finite = [](const Tensor& t, const char* what) {
    for (double v : t.values())
      if (!std::isfinite(v))
        throw NumericError(std::string("loss_tts: non-finite value in ") +
                           what);
  };
  check_finite(gold_mel, "gold mel");
  check_finite(mel_hat, "predicted mel");
  check_finite(gold_linear, "gold linear");
  check_finite(linear_hat, "predicted linear");
  check_finite(gold_b, "gold end flags");
  check_finite(b_hat, "predicted end flags");
  auto same_rows = [](const Tensor& a, const Tensor& b, const char* what) {
    if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1))
      throw ShapeError(std::string("loss_tts: shape mismatch in ") + what);
  };
  same_rows(gold_mel, mel_hat, "mel");
  same_rows(gold_linear, linear_hat, "linear");
  same_rows(gold_b, b_hat, "end flags");
  if (gold_mel.dim(0) != gold_linear.dim(0) ||
      gold_mel.dim(0) != gold_b.dim(0))
    throw ShapeError("loss_tts: mel, linear, and flag lengths differ");

  TTSLossTerms terms;
  Tensor dm = ad::sub(mel_hat, gold_mel);
  terms.mel_term = ad::mean(ad::mul(dm, dm));
  Tensor dl = ad::sub(linear_hat, gold_linear);
  terms.linear_term = ad::mean(ad::mul(dl, dl));
  Tensor p = ad::clamp(b_hat, 1e-7, 1.0 - 1e-7);
  Tensor one_minus_b = ad::add_scalar(ad::scale(gold_b, -1.0), 1.0);
  Tensor one_minus_p = ad::add_scalar(ad::scale(p, -1.0), 1.0);
  Tensor bce = ad::add(ad::mul(gold_b, ad::log(p)),
                       ad::mul(one_minus_b, ad::log(one_minus_p)));
  terms.flag_term = ad::scale(ad::mean(bce), -1.0);
  terms.total =
      ad::add(ad::add(terms.mel_term, terms.linear_term), terms.flag_term);
  return terms;
}

class TtsModel {
 public:
  TtsModel(ModelParameters& params, const TTSConfig& cfg, Rng& rng)
      : cfg_(cfg) {
    cfg.validate();
    embed_ = nn::Embedding(params, "tts.enc.embed", cfg.vocab, cfg.embed_dim,
                           rng);
    enc_prenet_ =
        nn::PreNet(params, "tts.enc.prenet", cfg.embed_dim, cfg.enc_prenet,
                   rng);
    nn::CbhgConfig enc_cbhg;
    enc_cbhg.input_dim = cfg.enc_prenet.back();
    enc_cbhg.bank_k = cfg.bank_k;
    enc_cbhg.bank_channels = cfg.bank_channels;
    enc_cbhg.proj_channels = cfg.proj_channels;
    enc_cbhg.highway_layers = cfg.highway_layers;
    enc_cbhg.gru_units = cfg.gru_units;
    enc_cbhg_ = nn::Cbhg(params, "tts.enc.cbhg", enc_cbhg, rng);

    dec_prenet_ =
        nn::PreNet(params, "tts.dec.prenet", cfg.mel_dim, cfg.dec_prenet,
                   rng);
    int64_t spk = cfg.speakers_enabled() ? cfg.speaker_proj : 0;
    int64_t dec_in = cfg.dec_prenet.back() + cfg.enc_out() + spk;
    lstm1_ = nn::LstmCell(params, "tts.dec.lstm1", dec_in, cfg.dec_units,
                          rng);
    lstm2_ = nn::LstmCell(params, "tts.dec.lstm2", cfg.dec_units,
                          cfg.dec_units, rng);
    att_delta_ = nn::Linear(params, "tts.att.delta", cfg.dec_units, 1, rng);
    mel_head_ = nn::Linear(params, "tts.head.mel",
                           cfg.dec_units + cfg.enc_out() + spk,
                           cfg.r * cfg.mel_dim, rng);
    flag_w_mel_ = params.add(
        "tts.head.flag.w_mel",
        init_weight({cfg.mel_dim, 1}, cfg.mel_dim + cfg.enc_out(), rng));
    flag_w_ctx_ = params.add(
        "tts.head.flag.w_ctx",
        init_weight({cfg.enc_out(), 1}, cfg.mel_dim + cfg.enc_out(), rng));
    // Negative bias: an untrained model keeps every end-flag below 0.5 and
    // synthesizes until the frame budget runs out.
    flag_b_ = params.add("tts.head.flag.b",
                         Tensor::from_vector({1}, {-3.0}));

    nn::CbhgConfig post_cbhg;
    post_cbhg.input_dim = cfg.mel_dim;
    post_cbhg.bank_k = cfg.bank_k;
    post_cbhg.bank_channels = cfg.bank_channels;
    post_cbhg.proj_channels = cfg.proj_channels;
    post_cbhg.highway_layers = cfg.highway_layers;
    post_cbhg.gru_units = cfg.gru_units;
    post_cbhg_ = nn::Cbhg(params, "tts.post.cbhg", post_cbhg, rng);
    lin_out_ = nn::Linear(params, "tts.head.linear", cfg.enc_out(),
                          cfg.linear_dim, rng);

    // Speaker parameters are registered last so that a speaker-less config
    // consumes exactly the same random stream for everything above.
    if (cfg.speakers_enabled()) {
      spk_table_ = nn::Embedding(params, "tts.spk.table", cfg.num_speakers,
                                 cfg.speaker_dim, rng);
      spk_proj_ = nn::Linear(params, "tts.spk.proj", cfg.speaker_dim,
                             cfg.speaker_proj, rng);
      lin_spk_w_ = params.add(
          "tts.head.linear.w_spk",
          init_weight({cfg.speaker_proj, cfg.linear_dim}, cfg.speaker_proj,
                      rng));
    }
  }

  const TTSConfig& config() const { return cfg_; }

  // Projected speaker vector (1, speaker_proj) for the concatenation sites.
  Tensor speaker_vector(std::optional<int64_t> speaker) const {
    if (!cfg_.speakers_enabled()) {
      if (speaker.has_value())
        throw DataError(
            "synthesizer: speaker id given but speaker pathway is disabled");
      return Tensor();
    }
    if (!speaker.has_value())
      throw DataError("synthesizer: speaker id required by this model");
    if (*speaker < 0 || *speaker >= cfg_.num_speakers)
      throw DataError("synthesizer: unknown speaker id " +
                      std::to_string(*speaker) + " (have " +
                      std::to_string(cfg_.num_speakers) + ")");
    return spk_proj_.forward(spk_table_.forward({*speaker}));
  }

  // (token count, enc_out) per-character states.
  Tensor encode_text(const text::TokenSequence& y) const {
    if (y.ids.empty())
      throw DataError("synthesizer: empty token sequence");
    for (int64_t id : y.ids)
      if (id < 0 || id >= cfg_.vocab)
        throw DataError("synthesizer: token id " + std::to_string(id) +
                        " outside vocabulary of " +
                        std::to_string(cfg_.vocab));
    Tensor h = embed_.forward(y.ids);
    h = enc_prenet_.forward(h);
    return enc_cbhg_.forward(h);
  }

  DecoderState initial_state() const {
    DecoderState s;
    s.lstm1 = lstm1_.initial();
    s.lstm2 = lstm2_.initial();
    s.context = Tensor::zeros({1, cfg_.enc_out()});
    s.mu = Tensor::zeros({1, 1});
    return s;
  }

  // One decoder step: consumes the last mel frame of the previous group and
  // emits the next r frames plus their end flags. The attention mean
  // advances by exp(predicted value), so it never moves backwards.
  DecodeStepResult decode_step(const Tensor& prev_mel_frame, DecoderState& st,
                               const Tensor& enc, const Tensor& spk) const {
    if (enc.dim(0) == 0)
      throw DataError("synthesizer decode: empty encoder states");
    if (prev_mel_frame.dim(0) != 1 || prev_mel_frame.dim(1) != cfg_.mel_dim)
      throw ShapeError("synthesizer decode: previous frame must be (1, " +
                       std::to_string(cfg_.mel_dim) + ")");
    Tensor pre = dec_prenet_.forward(prev_mel_frame);
    std::vector<Tensor> in_parts = {pre, st.context};
    if (cfg_.speakers_enabled()) in_parts.push_back(spk);
    st.lstm1 = lstm1_.step(ad::concat(in_parts, 1), st.lstm1);
    st.lstm2 = lstm2_.step(st.lstm1.h, st.lstm2);

    // Gaussian attention window over encoder positions.
    st.mu = ad::add(st.mu, ad::exp(att_delta_.forward(st.lstm2.h)));
    int64_t t_len = enc.dim(0);
    std::vector<double> pos(static_cast<size_t>(t_len));
    for (int64_t j = 0; j < t_len; ++j) pos[static_cast<size_t>(j)] = double(j);
    Tensor d = ad::sub(Tensor::from_vector({1, t_len}, std::move(pos)),
                       st.mu);
    Tensor scores = ad::scale(
        ad::mul(d, d),
        -1.0 / (2.0 * cfg_.attention_sigma * cfg_.attention_sigma));
    DecodeStepResult out;
    out.att_weights = ad::softmax(scores, 1);
    st.context = ad::matmul(out.att_weights, enc);
    out.context = st.context;

    std::vector<Tensor> mel_in = {st.lstm2.h, st.context};
    if (cfg_.speakers_enabled()) mel_in.push_back(spk);
    Tensor group = ad::reshape(mel_head_.forward(ad::concat(mel_in, 1)),
                               {cfg_.r, cfg_.mel_dim});
    out.mel_frames = group;
    // End flag per frame: logit = frame . w_mel + context . w_ctx + bias.
    Tensor logits =
        ad::add(ad::add(ad::matmul(group, flag_w_mel_),
                        ad::matmul(st.context, flag_w_ctx_)),
                flag_b_);
    out.flag_probs = ad::sigmoid(logits);
    return out;
  }

  // Linear-spectrogram head over a complete (S, mel_dim) sequence.
  Tensor linear_head(const Tensor& mel_seq, const Tensor& spk) const {
    if (mel_seq.dim(0) == 0)
      throw DataError("synthesizer linear head: empty mel sequence");
    Tensor h = post_cbhg_.forward(mel_seq);
    Tensor out = lin_out_.forward(h);
    if (cfg_.speakers_enabled())
      out = ad::add(out, ad::matmul(spk, lin_spk_w_));
    return out;
  }

  // Teacher forcing: each group is conditioned on the gold last frame of the
  // previous group. Gold features shorter than a multiple of r are padded by
  // replicating the final frame; outputs cover the padded length.
  TTSOutput forward_teacher_forced(
      const text::TokenSequence& y, const Tensor& gold_mel,
      const Tensor* gold_linear = nullptr,
      std::optional<int64_t> speaker = std::nullopt) const {
    if (gold_mel.dim(1) != cfg_.mel_dim)
      throw ShapeError("synthesizer: gold mel must have " +
                       std::to_string(cfg_.mel_dim) + " bands");
    if (gold_linear && gold_linear->dim(0) != gold_mel.dim(0))
      throw ShapeError(
          "synthesizer: gold mel and gold linear lengths differ (" +
          std::to_string(gold_mel.dim(0)) + " vs " +
          std::to_string(gold_linear->dim(0)) + ")");
    Tensor enc = encode_text(y);
    Tensor spk = speaker_vector(speaker);
    TTSOutput out;
    Tensor padded = pad_frames_to_multiple(gold_mel, cfg_.r,
                                           &out.padded_frames);
    int64_t groups = padded.dim(0) / cfg_.r;
    DecoderState st = initial_state();
    std::vector<Tensor> mel_parts, flag_parts;
    for (int64_t g = 0; g < groups; ++g) {
      Tensor prev = g == 0 ? Tensor::zeros({1, cfg_.mel_dim})
                           : ad::slice(padded, 0, g * cfg_.r - 1, 1);
      DecodeStepResult step = decode_step(prev, st, enc, spk);
      mel_parts.push_back(step.mel_frames);
      flag_parts.push_back(step.flag_probs);
      out.alignments.push_back(step.att_weights.values());
    }
    out.mel = ad::concat(mel_parts, 0);
    out.flags = ad::concat(flag_parts, 0);
    out.linear = linear_head(out.mel, spk);
    return out;
  }

  // Free running: each group is conditioned on the model's own previous
  // output frame. Stops at the first frame whose end flag exceeds 0.5, or
  // after max_frames.
  TTSOutput synthesize(const text::TokenSequence& y,
                       std::optional<int64_t> speaker,
                       int64_t max_frames) const {
    if (max_frames < cfg_.r || max_frames % cfg_.r != 0)
      throw ConfigError("synthesizer: max_frames must be a positive multiple "
                        "of r=" +
                        std::to_string(cfg_.r) + ", got " +
                        std::to_string(max_frames));
    ad::NoGradGuard guard;
    Tensor enc = encode_text(y);
    Tensor spk = speaker_vector(speaker);
    TTSOutput out;
    DecoderState st = initial_state();
    Tensor prev = Tensor::zeros({1, cfg_.mel_dim});
    std::vector<Tensor> mel_parts, flag_parts;
    int64_t emitted = 0;
    int64_t stop_at = -1;  // absolute frame index of the first raised flag
    while (emitted < max_frames) {
      DecodeStepResult step = decode_step(prev, st, enc, spk);
      mel_parts.push_back(step.mel_frames);
      flag_parts.push_back(step.flag_probs);
      out.alignments.push_back(step.att_weights.values());
      int64_t local = first_stop_index(step.flag_probs);
      if (local >= 0) {
        stop_at = emitted + local;
        emitted += cfg_.r;
        break;
      }
      emitted += cfg_.r;
      prev = ad::slice(step.mel_frames, 0, cfg_.r - 1, 1);
    }
    Tensor mel_all = ad::concat(mel_parts, 0);
    Tensor flags_all = ad::concat(flag_parts, 0);
    int64_t keep = stop_at >= 0 ? stop_at + 1 : emitted;
    out.padded_frames = emitted - keep;
    out.mel = ad::slice(mel_all, 0, 0, keep);
    out.flags = ad::slice(flags_all, 0, 0, keep);
    out.linear = linear_head(out.mel, spk);
    return out;
  }

 private:
  TTSConfig cfg_;
  nn::Embedding embed_;
  nn::PreNet enc_prenet_;
  nn::Cbhg enc_cbhg_;
  nn::PreNet dec_prenet_;
  nn::LstmCell lstm1_, lstm2_;
  nn::Linear att_delta_;
  nn::Linear mel_head_;
  Tensor flag_w_mel_, flag_w_ctx_, flag_b_;
  nn::Cbhg post_cbhg_;
  nn::Linear lin_out_;
  nn::Embedding spk_table_;
  nn::Linear spk_proj_;
  Tensor lin_spk_w_;
};

}  // namespace tts
}  // namespace speechchain

#endif  // SPEECHCHAIN_TTS_HPP
