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

// Closed-loop trainer coupling the recognizer and the synthesizer. Each
// outer step combines a supervised phase on paired data with two
// unsupervised phases: the synthesizer reads unpaired text and the
// recognizer trains on the synthetic speech, while the recognizer
// transcribes unpaired speech and the synthesizer trains on the decoded
// text. Generated intermediates are constants: the generating model gets no
// gradient from the consuming model's loss.

#ifndef SPEECHCHAIN_CHAIN_HPP_
#define SPEECHCHAIN_CHAIN_HPP_

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "speechchain/asr.hpp"
#include "speechchain/data.hpp"
#include "speechchain/errors.hpp"
#include "speechchain/eval.hpp"
#include "speechchain/optim.hpp"
#include "speechchain/params.hpp"
#include "speechchain/rng.hpp"
#include "speechchain/search.hpp"
#include "speechchain/tensor.hpp"
#include "speechchain/text.hpp"
#include "speechchain/tts.hpp"

namespace speechchain {
namespace chain {

struct ChainConfig {
  double alpha = 0.5;  // supervised loss coefficient
  double beta = 1.0;   // unsupervised loss coefficient
  std::string generation_mode = "greedy";  // "greedy" or "beam"
  int64_t beam_size = 5;
  int64_t batch_size = 8;           // paired batches
  int64_t unpaired_batch_size = 8;  // text-only and speech-only batches
  int64_t max_decode_len = 120;     // token cap for generated transcripts
  int64_t max_synth_frames = 200;   // frame cap for generated speech
  int64_t max_epochs = 20;
  int64_t patience = 10;     // epochs without dev improvement before stopping
  int64_t warmup_epochs = 0; // supervised-only epochs before the loop closes
  double learning_rate = 1e-3;
  std::string optimizer = "adam";  // "adam", "sgd", or "momentum"
  double momentum = 0.9;
  double grad_clip = 5.0;
  uint64_t seed = 1;

  void validate() const {
    std::string problems;
    if (alpha < 0) problems += "alpha must be >= 0; ";
    if (beta < 0) problems += "beta must be >= 0; ";
    if (alpha == 0 && beta == 0) problems += "alpha and beta cannot both be 0; ";
    if (generation_mode != "greedy" && generation_mode != "beam")
      problems += "generation_mode must be greedy or beam; ";
    if (generation_mode == "beam" && beam_size < 1)
      problems += "beam_size must be >= 1; ";
    if (batch_size < 1) problems += "batch_size must be >= 1; ";
    if (unpaired_batch_size < 1)
      problems += "unpaired_batch_size must be >= 1; ";
    if (max_decode_len < 2) problems += "max_decode_len must be >= 2; ";
    if (max_synth_frames < 1) problems += "max_synth_frames must be >= 1; ";
    if (max_epochs < 1) problems += "max_epochs must be >= 1; ";
    if (patience < 1) problems += "patience must be >= 1; ";
    if (warmup_epochs < 0) problems += "warmup_epochs must be >= 0; ";
    if (alpha == 0 && warmup_epochs > 0)
      problems += "warmup_epochs requires alpha > 0; ";
    if (learning_rate <= 0) problems += "learning_rate must be positive; ";
    if (optimizer != "adam" && optimizer != "sgd" && optimizer != "momentum")
      problems += "optimizer must be adam, sgd, or momentum; ";
    if (grad_clip < 0) problems += "grad_clip must be >= 0; ";
    if (!problems.empty()) throw ConfigError("chain config: " + problems);
  }
};

struct LossReport {
  double supervised_asr = 0.0;
  double supervised_tts = 0.0;
  double unsupervised_asr = 0.0;
  double unsupervised_tts = 0.0;
  double combined = 0.0;
  int64_t step = 0;
  bool applied = true;  // false when the update was skipped as non-finite
};

struct DevMetrics {
  double cer_percent = 0.0;
  double mel_mse = 0.0;
  double raw_mse = 0.0;
  double flag_accuracy_percent = 0.0;
};

struct TrainingData {
  const data::Manifest* paired = nullptr;
  const data::Manifest* text_only = nullptr;    // optional
  const data::Manifest* speech_only = nullptr;  // optional
  const data::Manifest* dev = nullptr;
  const data::FeatureStore* store = nullptr;
  const dsp::NormalizationStats* mel_stats = nullptr;
  const dsp::NormalizationStats* magnitude_stats = nullptr;
  const std::map<std::string, int64_t>* speaker_table = nullptr;
};

struct TrainResult {
  int64_t steps = 0;
  int64_t epochs = 0;
  double best_dev_cer_percent = std::numeric_limits<double>::infinity();
  int64_t best_epoch = 0;
  DevMetrics best_metrics;
  std::vector<DevMetrics> dev_history;  // one entry per completed epoch
  int64_t skipped_nonfinite = 0;
  int64_t skipped_empty_decodes = 0;
  int64_t synthesis_hit_cap = 0;
  std::string metric_log_path;
  std::string best_asr_checkpoint;
  std::string best_tts_checkpoint;
};

inline const char* kMetricHeader =
    "step,epoch,loss_sup_asr,loss_sup_tts,loss_unsup_asr,loss_unsup_tts,"
    "loss_total,dev_cer_percent,dev_mel_mse,dev_raw_mse,"
    "dev_flag_accuracy_percent";

class ChainTrainer {
 public:
  ChainTrainer(const ChainConfig& cfg, asr::AsrModel& recognizer,
               ModelParameters& asr_params, tts::TtsModel& synthesizer,
               ModelParameters& tts_params)
      : cfg_(cfg),
        asr_(recognizer),
        asr_params_(asr_params),
        tts_(synthesizer),
        tts_params_(tts_params) {
    cfg_.validate();
    // Generated speech must align with the synthesizer's frame grouping.
    int64_t r = tts_.config().r;
    max_synth_frames_ = ((cfg_.max_synth_frames + r - 1) / r) * r;
    asr_opt_ = make_optimizer();
    tts_opt_ = make_optimizer();
    synthesize_fn = [this](const text::TokenSequence& y,
                           std::optional<int64_t> speaker) {
      tts::TTSOutput out = tts_.synthesize(y, speaker, max_synth_frames_);
      if (out.mel.dim(0) >= max_synth_frames_) ++synthesis_hit_cap_;
      return out.mel;
    };
    decode_fn = [this](const ad::Tensor& mel) {
      ad::NoGradGuard guard;
      search::DecodeResult r =
          cfg_.generation_mode == "beam"
              ? asr_.beam_search_decode(mel, static_cast<int>(cfg_.beam_size),
                                        cfg_.max_decode_len)
              : asr_.greedy_decode(mel, cfg_.max_decode_len);
      text::TokenSequence seq;
      seq.ids = r.ids;
      return seq;
    };
  }

  // Generation hooks. The defaults run the real models in inference mode;
  // tests substitute stubs to pin down the phase semantics. Either way the
  // returned values carry no gradient history.
  std::function<ad::Tensor(const text::TokenSequence&, std::optional<int64_t>)>
      synthesize_fn;
  std::function<text::TokenSequence(const ad::Tensor&)> decode_fn;

  const ChainConfig& config() const { return cfg_; }
  int64_t synthesis_hit_cap() const { return synthesis_hit_cap_; }
  int64_t skipped_empty_decodes() const { return skipped_empty_decodes_; }
  int64_t skipped_nonfinite() const { return skipped_nonfinite_; }

  // Phase A: teacher-forced losses for both models on one paired batch.
  std::pair<ad::Tensor, ad::Tensor> supervised_losses(
      const data::Batch& batch) const {
    if (batch.size() < 1) throw DataError("supervised step: empty batch");
    if (!batch.has_features() || !batch.has_tokens())
      throw DataError("supervised step: batch must carry speech and text");
    ad::Tensor asr_sum, tts_sum;
    for (int64_t b = 0; b < batch.size(); ++b) {
      ad::Tensor mel = batch.utterance_mel(b);
      ad::Tensor linear = batch.utterance_linear(b);
      text::TokenSequence y = batch.utterance_tokens(b);
      asr::TeacherForcedResult tf = asr_.forward_teacher_forced(mel, y);
      ad::Tensor asr_loss = asr::loss_asr(y, tf.log_probs);
      ad::Tensor tts_loss =
          synthesizer_loss(y, mel, linear, batch.speakers[b]);
      asr_sum = b == 0 ? asr_loss : ad::add(asr_sum, asr_loss);
      tts_sum = b == 0 ? tts_loss : ad::add(tts_sum, tts_loss);
    }
    double inv = 1.0 / static_cast<double>(batch.size());
    return {ad::scale(asr_sum, inv), ad::scale(tts_sum, inv)};
  }

  // Phase B, text direction: synthesize speech for unpaired text, then train
  // the recognizer on the (synthetic speech, text) pair. The synthetic
  // features are constants; only recognizer parameters receive gradient.
  ad::Tensor unsupervised_text_loss(const data::Batch& batch) {
    if (batch.size() < 1) throw DataError("unsupervised text step: empty batch");
    if (!batch.has_tokens())
      throw DataError("unsupervised text step: batch must carry text");
    ad::Tensor sum;
    for (int64_t b = 0; b < batch.size(); ++b) {
      text::TokenSequence y = batch.utterance_tokens(b);
      ad::Tensor synthetic = synthesize_fn(y, batch.speakers[b]);
      asr::TeacherForcedResult tf = asr_.forward_teacher_forced(synthetic, y);
      ad::Tensor loss = asr::loss_asr(y, tf.log_probs);
      sum = b == 0 ? loss : ad::add(sum, loss);
    }
    return ad::scale(sum, 1.0 / static_cast<double>(batch.size()));
  }

  // Phase B, speech direction: transcribe unpaired speech, then train the
  // synthesizer to reconstruct that speech from the decoded text. Decoded
  // token ids are constants; only synthesizer parameters receive gradient.
  // Decodes that produce no characters are skipped and counted. Returns an
  // undefined tensor when every utterance of the batch was skipped.
  ad::Tensor unsupervised_speech_loss(const data::Batch& batch) {
    if (batch.size() < 1)
      throw DataError("unsupervised speech step: empty batch");
    if (!batch.has_features())
      throw DataError("unsupervised speech step: batch must carry speech");
    ad::Tensor sum;
    int64_t used = 0;
    for (int64_t b = 0; b < batch.size(); ++b) {
      ad::Tensor mel = batch.utterance_mel(b);
      ad::Tensor linear = batch.utterance_linear(b);
      text::TokenSequence y_hat = decode_fn(mel);
      if (y_hat.ids.size() < 3) {  // start + end sentinel only: no characters
        ++skipped_empty_decodes_;
        continue;
      }
      ad::Tensor loss =
          synthesizer_loss(y_hat, mel, linear, batch.speakers[b]);
      sum = used == 0 ? loss : ad::add(sum, loss);
      ++used;
    }
    if (used == 0) return ad::Tensor();
    return ad::scale(sum, 1.0 / static_cast<double>(used));
  }

  // Combines whatever loss terms the step produced, backpropagates once, and
  // updates each model that actually received gradient. A non-finite loss or
  // gradient aborts the update with parameters untouched.
  LossReport combine_and_update(const std::optional<ad::Tensor>& sup_asr,
                                const std::optional<ad::Tensor>& sup_tts,
                                const std::optional<ad::Tensor>& unsup_asr,
                                const std::optional<ad::Tensor>& unsup_tts) {
    LossReport report;
    report.step = ++step_counter_;
    report.supervised_asr = term_value(sup_asr);
    report.supervised_tts = term_value(sup_tts);
    report.unsupervised_asr = term_value(unsup_asr);
    report.unsupervised_tts = term_value(unsup_tts);

    std::optional<ad::Tensor> supervised = sum_terms(sup_tts, sup_asr);
    std::optional<ad::Tensor> unsupervised = sum_terms(unsup_tts, unsup_asr);
    std::optional<ad::Tensor> combined;
    if (supervised && cfg_.alpha != 0.0)
      combined = ad::scale(*supervised, cfg_.alpha);
    if (unsupervised && cfg_.beta != 0.0) {
      ad::Tensor scaled = ad::scale(*unsupervised, cfg_.beta);
      combined = combined ? ad::add(*combined, scaled) : scaled;
    }
    if (!combined)
      throw DataError("combine_and_update: no active loss terms");
    report.combined = combined->values()[0];

    if (!std::isfinite(report.combined)) {
      asr_params_.clear_grads();
      tts_params_.clear_grads();
      ++skipped_nonfinite_;
      report.applied = false;
      return report;
    }
    combined->backward();
    if (!grads_finite(asr_params_) || !grads_finite(tts_params_)) {
      asr_params_.clear_grads();
      tts_params_.clear_grads();
      ++skipped_nonfinite_;
      report.applied = false;
      return report;
    }
    step_model(asr_params_, *asr_opt_);
    step_model(tts_params_, *tts_opt_);
    return report;
  }

  // Dev-set metrics: recognizer error rate through the configured decoder,
  // plus teacher-forced synthesizer reconstruction quality.
  DevMetrics evaluate(const data::BatchStream& dev) const {
    ad::NoGradGuard guard;
    eval::CerAccumulator cer;
    eval::MseAccumulator mel_mse, raw_mse;
    eval::FlagAccumulator flags;
    for (const data::Batch& batch : dev.batches)
      for (int64_t b = 0; b < batch.size(); ++b) {
        ad::Tensor mel = batch.utterance_mel(b);
        ad::Tensor linear = batch.utterance_linear(b);
        text::TokenSequence y = batch.utterance_tokens(b);
        std::string reference = text::decode(y);
        std::string hypothesis = text::decode(decode_fn(mel));
        cer.add(hypothesis, reference);

        int64_t r = tts_.config().r;
        int64_t ignored = 0;
        ad::Tensor gold_mel = tts::pad_frames_to_multiple(mel, r, &ignored);
        ad::Tensor gold_linear =
            tts::pad_frames_to_multiple(linear, r, &ignored);
        tts::TTSOutput out =
            tts_.forward_teacher_forced(y, mel, &linear, batch.speakers[b]);
        mel_mse.add(out.mel, gold_mel);
        raw_mse.add(out.linear, gold_linear);
        ad::Tensor gold_b = tts::gold_end_flags(gold_mel.shape()[0], r);
        flags.add(out.flags.values(), gold_b.values());
      }
    DevMetrics m;
    m.cer_percent = 100.0 * cer.micro();
    m.mel_mse = mel_mse.macro();
    m.raw_mse = raw_mse.macro();
    m.flag_accuracy_percent = flags.percent();
    return m;
  }

  // Full training driver: alternates the supervised phase and (once past
  // warmup, when enabled) both unsupervised phases every step, evaluates on
  // dev each epoch, keeps the best-by-dev-CER checkpoint, and stops early
  // after `patience` epochs without improvement. Deterministic under
  // (config, seed, data).
  TrainResult train(const TrainingData& td, const std::string& out_dir) {
    validate_training_data(td);
    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    TrainResult result;
    result.metric_log_path = (fs::path(out_dir) / "metrics.csv").string();
    std::ofstream log(result.metric_log_path, std::ios::trunc);
    if (!log)
      throw DataError("cannot write metric log: " + result.metric_log_path);
    log << kMetricHeader << "\n";
    log.precision(17);

    bool supervised_enabled = cfg_.alpha > 0.0;
    bool chain_enabled = cfg_.beta > 0.0;
    std::string dev_cells = ",,,";  // last known dev metrics, empty at first
    for (int64_t epoch = 1; epoch <= cfg_.max_epochs; ++epoch) {
      bool chain_active = chain_enabled && epoch > cfg_.warmup_epochs;
      data::BatchStream paired, text_stream, speech_stream;
      if (supervised_enabled)
        paired = epoch_batches(*td.paired, td, cfg_.batch_size, epoch,
                               "paired");
      if (chain_active) {
        text_stream = epoch_batches(*td.text_only, td,
                                    cfg_.unpaired_batch_size, epoch, "text");
        speech_stream = epoch_batches(
            *td.speech_only, td, cfg_.unpaired_batch_size, epoch, "speech");
        if (text_stream.batches.empty() || speech_stream.batches.empty())
          throw DataError("chain training: an unpaired set produced no "
                          "batches");
      }
      size_t steps_this_epoch = supervised_enabled ? paired.batches.size()
                                                   : text_stream.batches.size();
      for (size_t i = 0; i < steps_this_epoch; ++i) {
        std::optional<ad::Tensor> sup_asr, sup_tts, unsup_asr, unsup_tts;
        if (supervised_enabled) {
          auto [a, t] = supervised_losses(paired.batches[i]);
          sup_asr = a;
          sup_tts = t;
        }
        if (chain_active) {
          unsup_asr = unsupervised_text_loss(
              text_stream.batches[i % text_stream.batches.size()]);
          ad::Tensor speech_term = unsupervised_speech_loss(
              speech_stream.batches[i % speech_stream.batches.size()]);
          if (speech_term.defined()) unsup_tts = speech_term;
        }
        LossReport report =
            combine_and_update(sup_asr, sup_tts, unsup_asr, unsup_tts);
        ++result.steps;
        log << report.step << "," << epoch << "," << report.supervised_asr
            << "," << report.supervised_tts << ","
            << report.unsupervised_asr << "," << report.unsupervised_tts
            << "," << report.combined << "," << dev_cells << "\n";
      }

      data::BatchStream dev =
          epoch_batches(*td.dev, td, cfg_.batch_size, 0, "dev");
      DevMetrics metrics = evaluate(dev);
      result.dev_history.push_back(metrics);
      result.epochs = epoch;
      {
        std::ostringstream dev_cell;
        dev_cell.precision(17);
        dev_cell << metrics.cer_percent << "," << metrics.mel_mse << ","
                 << metrics.raw_mse << "," << metrics.flag_accuracy_percent;
        dev_cells = dev_cell.str();
      }
      if (metrics.cer_percent < result.best_dev_cer_percent) {
        result.best_dev_cer_percent = metrics.cer_percent;
        result.best_epoch = epoch;
        result.best_metrics = metrics;
        result.best_asr_checkpoint =
            (fs::path(out_dir) / "best_asr.ckpt").string();
        result.best_tts_checkpoint =
            (fs::path(out_dir) / "best_tts.ckpt").string();
        ckpt::save(asr_params_, result.best_asr_checkpoint);
        ckpt::save(tts_params_, result.best_tts_checkpoint);
      } else if (epoch - result.best_epoch >= cfg_.patience) {
        break;
      }
    }
    result.skipped_nonfinite = skipped_nonfinite_;
    result.skipped_empty_decodes = skipped_empty_decodes_;
    result.synthesis_hit_cap = synthesis_hit_cap_;
    return result;
  }

 private:
  std::unique_ptr<Optimizer> make_optimizer() const {
    if (cfg_.optimizer == "adam")
      return std::make_unique<AdamOptimizer>(cfg_.learning_rate, 0.9, 0.999,
                                             1e-8, cfg_.grad_clip);
    if (cfg_.optimizer == "momentum")
      return std::make_unique<SgdOptimizer>(cfg_.learning_rate, cfg_.momentum,
                                            cfg_.grad_clip);
    return std::make_unique<SgdOptimizer>(cfg_.learning_rate, 0.0,
                                          cfg_.grad_clip);
  }

  ad::Tensor synthesizer_loss(const text::TokenSequence& y,
                              const ad::Tensor& gold_mel,
                              const ad::Tensor& gold_linear,
                              std::optional<int64_t> speaker) const {
    int64_t r = tts_.config().r;
    int64_t ignored = 0;
    ad::Tensor mel_padded = tts::pad_frames_to_multiple(gold_mel, r, &ignored);
    ad::Tensor linear_padded =
        tts::pad_frames_to_multiple(gold_linear, r, &ignored);
    tts::TTSOutput out =
        tts_.forward_teacher_forced(y, gold_mel, &gold_linear, speaker);
    ad::Tensor gold_b = tts::gold_end_flags(mel_padded.shape()[0], r);
    return tts::loss_tts(mel_padded, out.mel, linear_padded, out.linear,
                         gold_b, out.flags)
        .total;
  }

  static double term_value(const std::optional<ad::Tensor>& t) {
    return t ? t->values()[0] : 0.0;
  }

  static std::optional<ad::Tensor> sum_terms(
      const std::optional<ad::Tensor>& a, const std::optional<ad::Tensor>& b) {
    if (a && b) return ad::add(*a, *b);
    if (a) return a;
    if (b) return b;
    return std::nullopt;
  }

  static bool grads_finite(const ModelParameters& params) {
    for (const auto& [name, t] : params.entries())
      if (t.has_grad())
        for (double g : t.grad())
          if (!std::isfinite(g)) return false;
    return true;
  }

  // Updates one model if this step's graph reached it; models with no loss
  // term this step keep their state (including optimizer moments) untouched.
  static void step_model(ModelParameters& params, Optimizer& opt) {
    bool any = false;
    for (const auto& [name, t] : params.entries())
      if (t.has_grad()) {
        any = true;
        break;
      }
    if (any) opt.step(params);
  }

  data::BatchStream epoch_batches(const data::Manifest& manifest,
                                  const TrainingData& td, int64_t batch_size,
                                  int64_t epoch,
                                  const std::string& stream_name) const {
    data::BatchingConfig bc;
    bc.batch_size = batch_size;
    bc.sort_by_length = true;
    // A named sub-stream per (seed, set, epoch) keeps every shuffle
    // independent and reproducible.
    Rng derive(cfg_.seed, "batches-" + stream_name + "-epoch-" +
                              std::to_string(epoch));
    bc.seed = derive.uniform_int(uint64_t{1} << 62);
    bc.pad_frames_to = tts_.config().r;
    bc.mel_stats = td.mel_stats;
    bc.magnitude_stats = td.magnitude_stats;
    bc.speaker_table = td.speaker_table;
    const data::FeatureStore* store =
        manifest.kind == data::Manifest::Kind::kTextOnly ? nullptr : td.store;
    return data::make_batches(manifest, store, bc);
  }

  // A dataset is required exactly when the coefficient of the phase that
  // reads it is nonzero.
  void validate_training_data(const TrainingData& td) const {
    std::string problems;
    if (cfg_.alpha > 0.0 &&
        (td.paired == nullptr || td.paired->rows.empty()))
      problems += "alpha > 0 requires a non-empty paired set; ";
    if (cfg_.beta > 0.0) {
      if (td.text_only == nullptr || td.text_only->rows.empty())
        problems += "beta > 0 requires a non-empty text-only set; ";
      if (td.speech_only == nullptr || td.speech_only->rows.empty())
        problems += "beta > 0 requires a non-empty speech-only set; ";
    }
    if (td.dev == nullptr || td.dev->rows.empty())
      problems += "dev set is required and must be non-empty; ";
    if (td.store == nullptr) problems += "feature store is required; ";
    if (!problems.empty()) throw ConfigError("chain training: " + problems);
  }

  ChainConfig cfg_;
  asr::AsrModel& asr_;
  ModelParameters& asr_params_;
  tts::TtsModel& tts_;
  ModelParameters& tts_params_;
  std::unique_ptr<Optimizer> asr_opt_;
  std::unique_ptr<Optimizer> tts_opt_;
  int64_t max_synth_frames_ = 0;
  int64_t step_counter_ = 0;
  int64_t skipped_nonfinite_ = 0;
  int64_t skipped_empty_decodes_ = 0;
  int64_t synthesis_hit_cap_ = 0;
};

}  // namespace chain
}  // namespace speechchain

#endif  // SPEECHCHAIN_CHAIN_HPP_
