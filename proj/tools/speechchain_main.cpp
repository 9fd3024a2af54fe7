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

// Command-line front end. One binary, one flat run-configuration format,
// subcommands for every stage of an experiment: corpus generation, feature
// extraction, supervised and closed-loop training, transcription, synthesis,
// evaluation, and the full comparison matrix. Every command is deterministic
// given (configuration, seed, inputs).

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "speechchain/asr.hpp"
#include "speechchain/bench.hpp"
#include "speechchain/chain.hpp"
#include "speechchain/config.hpp"
#include "speechchain/data.hpp"
#include "speechchain/dsp.hpp"
#include "speechchain/errors.hpp"
#include "speechchain/eval.hpp"
#include "speechchain/params.hpp"
#include "speechchain/rng.hpp"
#include "speechchain/search.hpp"
#include "speechchain/text.hpp"
#include "speechchain/toy.hpp"
#include "speechchain/tts.hpp"
#include "speechchain/wav.hpp"

namespace {

namespace fs = std::filesystem;
namespace sc = speechchain;

// --- shared option plumbing -------------------------------------------------------

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  int64_t seed = -1;  // -1 keeps the configuration's seed
  std::vector<std::string> overrides;
  bool force = false;
};

void add_config_opts(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "run configuration file");
  cmd->add_option("--set", o.overrides,
                  "override one configuration key (key=value, repeatable)");
  cmd->add_option("--seed", o.seed,
                  "random seed; overrides the configuration")
      ->check(CLI::NonNegativeNumber);
}

void add_out_opts(CLI::App* cmd, CommonOpts& o, bool required) {
  CLI::Option* out = cmd->add_option("--out", o.out_dir, "output directory");
  if (required) out->required();
  cmd->add_flag("--force", o.force,
                "write into an existing non-empty output directory");
}

// Precedence: configuration file (or the fallback, typically the resolved
// file echoed by a previous run), then --set overrides in order, then the
// dedicated --seed/--out flags.
sc::config::RunConfig resolve_config(const CommonOpts& o,
                                     const std::string& fallback_path = "") {
  sc::config::RunConfig cfg;
  const std::string& path = o.config_path.empty() ? fallback_path
                                                  : o.config_path;
  if (!path.empty()) cfg = sc::config::load_run_config(path);
  for (const std::string& kv : o.overrides) sc::config::apply_override(cfg, kv);
  if (o.seed >= 0) cfg.seed = static_cast<uint64_t>(o.seed);
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  cfg.chain.seed = cfg.seed;
  return cfg;
}

void prepare_out_dir(const std::string& dir, bool force) {
  if (dir.empty())
    throw sc::ConfigError(
        "no output directory: set out_dir in the configuration or pass --out");
  fs::path p(dir);
  if (fs::exists(p)) {
    if (!fs::is_directory(p))
      throw sc::ConfigError("output path exists and is not a directory: " +
                            dir);
    if (!fs::is_empty(p) && !force)
      throw sc::ConfigError("output directory is not empty: " + dir +
                            " (pass --force to write into it)");
  }
  fs::create_directories(p);
}

// --- training artifacts -----------------------------------------------------------

constexpr const char* kMelStatsFile = "stats_mel.txt";
constexpr const char* kMagnitudeStatsFile = "stats_magnitude.txt";
constexpr const char* kSpeakerFile = "speakers.tsv";
constexpr const char* kAsrCheckpoint = "best_asr.ckpt";
constexpr const char* kTtsCheckpoint = "best_tts.ckpt";
constexpr const char* kResolvedConfig = "run_config.resolved";

void save_speaker_table(const std::map<std::string, int64_t>& table,
                        const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw sc::DataError("cannot write speaker table: " + path);
  for (const auto& [tag, index] : table) os << tag << "\t" << index << "\n";
  if (!os) throw sc::DataError("write failed for speaker table: " + path);
}

// An absent file means a single-speaker corpus whose rows carry no tags.
std::map<std::string, int64_t> load_speaker_table(const std::string& path) {
  std::map<std::string, int64_t> table;
  std::ifstream is(path);
  if (!is) return table;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    size_t tab = line.find('\t');
    if (tab == std::string::npos)
      throw sc::DataError("speaker table " + path + ": bad line: " + line);
    table[line.substr(0, tab)] = std::stoll(line.substr(tab + 1));
  }
  return table;
}

struct ModelBundle {
  sc::ModelParameters asr_params{"asr"};
  sc::ModelParameters tts_params{"tts"};
  std::unique_ptr<sc::asr::AsrModel> recognizer;
  std::unique_ptr<sc::tts::TtsModel> synthesizer;
};

std::unique_ptr<ModelBundle> build_models(const sc::config::RunConfig& cfg) {
  auto m = std::make_unique<ModelBundle>();
  sc::Rng asr_rng(cfg.seed, "asr-init");
  m->recognizer = std::make_unique<sc::asr::AsrModel>(m->asr_params, cfg.asr,
                                                      asr_rng);
  sc::Rng tts_rng(cfg.seed, "tts-init");
  m->synthesizer = std::make_unique<sc::tts::TtsModel>(m->tts_params, cfg.tts,
                                                       tts_rng);
  return m;
}

// --- training ---------------------------------------------------------------------

// Runs one training job into cfg.out_dir and leaves behind everything a later
// command needs: the resolved configuration, normalization statistics, the
// speaker table (when any), the metric log, and the best checkpoints.
// Normalization is always fit on the paired training set; the unpaired sets
// are unlabeled and must not influence it.
sc::chain::TrainResult run_training(sc::config::RunConfig cfg, bool force) {
  sc::config::validate(cfg);

  bool needs_unpaired = cfg.chain.beta > 0.0;
  std::string missing;
  auto need = [&missing](const char* key, const std::string& value) {
    if (value.empty()) missing += std::string(key) + " is not set; ";
  };
  need("data.paired_manifest", cfg.paired_manifest);
  need("data.dev_manifest", cfg.dev_manifest);
  if (needs_unpaired) {
    need("data.speech_manifest", cfg.speech_manifest);
    need("data.text_manifest", cfg.text_manifest);
  }
  if (!missing.empty())
    throw sc::ConfigError("training needs manifests: " + missing);

  using sc::data::Manifest;
  Manifest paired =
      sc::data::load_manifest(cfg.paired_manifest, Manifest::Kind::kPaired);
  Manifest dev =
      sc::data::load_manifest(cfg.dev_manifest, Manifest::Kind::kPaired);
  Manifest speech, text;
  std::vector<const Manifest*> all = {&paired, &dev};
  if (needs_unpaired) {
    speech = sc::data::load_manifest(cfg.speech_manifest,
                                     Manifest::Kind::kSpeechOnly);
    text = sc::data::load_manifest(cfg.text_manifest,
                                   Manifest::Kind::kTextOnly);
    all.push_back(&speech);
    all.push_back(&text);
  }
  sc::data::check_disjoint(all);

  sc::data::FeatureStore store(cfg.dsp);
  sc::data::FeatureStats stats = sc::data::fit_feature_stats(paired, store);
  std::map<std::string, int64_t> speakers = sc::data::build_speaker_table(all);

  // Inputs all check out; only now touch the output directory.
  prepare_out_dir(cfg.out_dir, force);
  sc::config::echo_into(cfg, cfg.out_dir);
  fs::path out(cfg.out_dir);
  stats.mel.save((out / kMelStatsFile).string());
  stats.magnitude.save((out / kMagnitudeStatsFile).string());
  if (!speakers.empty())
    save_speaker_table(speakers, (out / kSpeakerFile).string());

  auto models = build_models(cfg);
  sc::chain::ChainTrainer trainer(cfg.chain, *models->recognizer,
                                  models->asr_params, *models->synthesizer,
                                  models->tts_params);
  sc::chain::TrainingData td;
  td.paired = &paired;
  td.dev = &dev;
  if (needs_unpaired) {
    td.speech_only = &speech;
    td.text_only = &text;
  }
  td.store = &store;
  td.mel_stats = &stats.mel;
  td.magnitude_stats = &stats.magnitude;
  td.speaker_table = &speakers;
  return trainer.train(td, cfg.out_dir);
}

void print_train_summary(const sc::chain::TrainResult& r) {
  std::cout.precision(6);
  std::cout << "training finished: " << r.epochs << " epoch(s), " << r.steps
            << " step(s)\n"
            << "  best dev CER : " << r.best_dev_cer_percent << "% (epoch "
            << r.best_epoch << ")\n"
            << "  best dev mel MSE " << r.best_metrics.mel_mse << ", raw MSE "
            << r.best_metrics.raw_mse << ", flag accuracy "
            << r.best_metrics.flag_accuracy_percent << "%\n"
            << "  metric log   : " << r.metric_log_path << "\n"
            << "  checkpoints  : " << r.best_asr_checkpoint << ", "
            << r.best_tts_checkpoint << "\n";
  if (r.skipped_nonfinite > 0)
    std::cout << "  skipped " << r.skipped_nonfinite
              << " non-finite update(s)\n";
  if (r.skipped_empty_decodes > 0)
    std::cout << "  skipped " << r.skipped_empty_decodes
              << " empty decode(s)\n";
  if (r.synthesis_hit_cap > 0)
    std::cout << "  " << r.synthesis_hit_cap
              << " synthesis call(s) hit the frame cap\n";
}

// --- inference context ------------------------------------------------------------

// Everything transcription, synthesis, and evaluation need from a finished
// training directory. The configuration falls back to the resolved file the
// training run echoed, so the architecture always matches the checkpoints.
struct InferenceContext {
  sc::config::RunConfig cfg;
  std::unique_ptr<ModelBundle> models;
  std::optional<sc::data::FeatureStore> store;
  sc::dsp::NormalizationStats mel_stats;
  sc::dsp::NormalizationStats magnitude_stats;
  std::map<std::string, int64_t> speakers;
};

InferenceContext load_inference_context(const CommonOpts& opts,
                                        const std::string& model_dir,
                                        bool want_asr, bool want_tts) {
  fs::path dir(model_dir);
  if (!fs::is_directory(dir))
    throw sc::ConfigError("model directory does not exist: " + model_dir);

  InferenceContext ctx;
  ctx.cfg = resolve_config(opts, (dir / kResolvedConfig).string());
  sc::config::validate(ctx.cfg);
  ctx.models = build_models(ctx.cfg);
  if (want_asr)
    sc::ckpt::restore(ctx.models->asr_params,
                      (dir / kAsrCheckpoint).string());
  if (want_tts)
    sc::ckpt::restore(ctx.models->tts_params,
                      (dir / kTtsCheckpoint).string());
  ctx.store.emplace(ctx.cfg.dsp);
  ctx.mel_stats =
      sc::dsp::NormalizationStats::load((dir / kMelStatsFile).string());
  ctx.magnitude_stats =
      sc::dsp::NormalizationStats::load((dir / kMagnitudeStatsFile).string());
  ctx.speakers = load_speaker_table((dir / kSpeakerFile).string());
  return ctx;
}

// Single-utterance batches; callers key results by utterance id, so the
// stream order does not matter.
sc::data::BatchStream inference_batches(const InferenceContext& ctx,
                                        const sc::data::Manifest& manifest,
                                        const std::string& stream_name) {
  sc::data::BatchingConfig bc;
  bc.batch_size = 1;
  bc.sort_by_length = false;
  sc::Rng derive(ctx.cfg.seed, stream_name);
  bc.seed = derive.uniform_int(uint64_t{1} << 62);
  bc.pad_frames_to = ctx.cfg.tts.r;
  bc.mel_stats = &ctx.mel_stats;
  bc.magnitude_stats = &ctx.magnitude_stats;
  bc.speaker_table = &ctx.speakers;
  return sc::data::make_batches(manifest, &*ctx.store, bc);
}

sc::search::DecodeResult decode_utterance(const InferenceContext& ctx,
                                          const sc::ad::Tensor& mel) {
  sc::ad::NoGradGuard guard;
  if (ctx.cfg.chain.generation_mode == "beam")
    return ctx.models->recognizer->beam_search_decode(
        mel, static_cast<int>(ctx.cfg.chain.beam_size),
        ctx.cfg.chain.max_decode_len);
  return ctx.models->recognizer->greedy_decode(mel,
                                               ctx.cfg.chain.max_decode_len);
}

void write_hypotheses(const std::map<std::string, std::string>& hyps,
                      const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw sc::DataError("cannot write hypotheses: " + path);
  for (const auto& [id, hyp] : hyps) os << id << "\t" << hyp << "\n";
  if (!os) throw sc::DataError("write failed for hypotheses: " + path);
}

sc::dsp::FeatureSequence tensor_to_sequence(const sc::ad::Tensor& t,
                                            sc::dsp::FeatureSequence::Kind kind,
                                            bool normalized) {
  sc::dsp::FeatureSequence f;
  f.kind = kind;
  f.s = t.shape()[0];
  f.d = t.shape()[1];
  f.frames = t.values();
  f.normalized = normalized;
  return f;
}

// --- subcommand bodies ------------------------------------------------------------

int cmd_make_toy_corpus(const sc::toy::ToyCorpusConfig& cfg,
                        const std::string& out_dir, bool force) {
  prepare_out_dir(out_dir, force);
  sc::toy::ToyCorpusSummary s = sc::toy::generate_corpus(cfg, out_dir);
  std::cout << "toy corpus in " << out_dir << ": " << s.waveforms_written
            << " waveform(s)\n"
            << "  paired : " << s.paired_manifest << "\n"
            << "  speech : " << s.speech_manifest << "\n"
            << "  text   : " << s.text_manifest << "\n"
            << "  dev    : " << s.dev_manifest << "\n"
            << "  test   : " << s.test_manifest << "\n";
  return 0;
}

int cmd_extract_features(const CommonOpts& opts,
                         const std::string& manifest_path,
                         const std::string& kind_name) {
  sc::config::RunConfig cfg = resolve_config(opts);
  cfg.dsp.validate();
  sc::data::Manifest::Kind kind = sc::data::kind_from_string(kind_name);
  if (kind == sc::data::Manifest::Kind::kTextOnly)
    throw sc::ConfigError("text-only manifests carry no audio to extract");
  sc::data::Manifest m = sc::data::load_manifest(manifest_path, kind);

  prepare_out_dir(cfg.out_dir, opts.force);
  sc::config::echo_into(cfg, cfg.out_dir);
  sc::data::FeatureStore store(cfg.dsp);
  fs::path out(cfg.out_dir);
  std::string list_path = (out / "features.tsv").string();
  std::ofstream os(list_path, std::ios::trunc);
  if (!os) throw sc::DataError("cannot write manifest: " + list_path);
  for (const sc::data::ManifestRow& row : m.rows) {
    sc::dsp::ExtractedFeatures f = store.get(row.path);
    sc::data::save_feature_pair(f, (out / row.id).string(), cfg.dsp);
    // Feature base paths are relative, so the manifest stays valid if the
    // directory moves.
    os << row.id << "\t" << row.id << "\t" << row.transcript << "\t"
       << row.speaker << "\n";
  }
  if (!os) throw sc::DataError("write failed for manifest: " + list_path);
  std::cout << "extracted " << m.rows.size() << " feature pair(s)\n"
            << "  manifest: " << list_path << "\n";
  return 0;
}

int cmd_train(const CommonOpts& opts, bool supervised_only) {
  sc::config::RunConfig cfg = resolve_config(opts);
  if (supervised_only) cfg.chain.beta = 0.0;
  std::cout << (supervised_only || cfg.chain.beta == 0.0
                    ? "training the supervised baseline\n"
                    : "training the closed loop\n");
  sc::chain::TrainResult result = run_training(std::move(cfg), opts.force);
  print_train_summary(result);
  return 0;
}

int cmd_transcribe(const CommonOpts& opts, const std::string& model_dir,
                   std::string manifest_path, const std::string& kind_name) {
  prepare_out_dir(opts.out_dir, opts.force);
  InferenceContext ctx = load_inference_context(opts, model_dir,
                                                /*want_asr=*/true,
                                                /*want_tts=*/false);
  if (manifest_path.empty()) manifest_path = ctx.cfg.test_manifest;
  if (manifest_path.empty())
    throw sc::ConfigError(
        "no input: pass --manifest or set data.test_manifest");
  sc::data::Manifest::Kind kind = sc::data::kind_from_string(kind_name);
  if (kind == sc::data::Manifest::Kind::kTextOnly)
    throw sc::ConfigError("transcription needs audio; got a text-only kind");
  sc::data::Manifest m = sc::data::load_manifest(manifest_path, kind);

  sc::config::echo_into(ctx.cfg, ctx.cfg.out_dir);
  sc::data::BatchStream stream =
      inference_batches(ctx, m, "transcribe-batches");
  std::map<std::string, std::string> hyps;
  for (const sc::data::Batch& batch : stream.batches) {
    sc::search::DecodeResult r = decode_utterance(ctx,
                                                  batch.utterance_mel(0));
    hyps[batch.ids[0]] = sc::text::decode(r.ids);
  }
  std::string hyp_path =
      (fs::path(ctx.cfg.out_dir) / "hypotheses.tsv").string();
  write_hypotheses(hyps, hyp_path);
  std::cout << "wrote " << hyps.size() << " hypothesis(es) to " << hyp_path
            << "\n";
  return 0;
}

int cmd_synthesize(const CommonOpts& opts, const std::string& model_dir,
                   const std::vector<std::string>& texts,
                   const std::string& manifest_path,
                   const std::string& speaker_tag) {
  prepare_out_dir(opts.out_dir, opts.force);
  InferenceContext ctx = load_inference_context(opts, model_dir,
                                                /*want_asr=*/false,
                                                /*want_tts=*/true);
  if (texts.empty() && manifest_path.empty())
    throw sc::ConfigError("nothing to synthesize: pass --text or --manifest");

  std::optional<int64_t> flag_speaker;
  if (!speaker_tag.empty()) {
    auto it = ctx.speakers.find(speaker_tag);
    if (it == ctx.speakers.end())
      throw sc::ConfigError("speaker \"" + speaker_tag +
                            "\" is not in the model's speaker table");
    flag_speaker = it->second;
  }

  struct Item {
    std::string id;
    std::string normalized;
    std::optional<int64_t> speaker;
  };
  std::vector<Item> items;
  int64_t next = 0;
  for (const std::string& raw : texts) {
    std::ostringstream id;
    id << "text-" << std::setw(4) << std::setfill('0') << ++next;
    items.push_back({id.str(), sc::text::normalize_text(raw), flag_speaker});
  }
  if (!manifest_path.empty()) {
    sc::data::Manifest m = sc::data::load_manifest(
        manifest_path, sc::data::Manifest::Kind::kTextOnly);
    for (const sc::data::ManifestRow& row : m.rows) {
      std::optional<int64_t> spk = flag_speaker;
      if (!spk && !row.speaker.empty()) {
        auto it = ctx.speakers.find(row.speaker);
        if (it == ctx.speakers.end())
          throw sc::DataError("speaker \"" + row.speaker +
                              "\" of utterance \"" + row.id +
                              "\" is not in the model's speaker table");
        spk = it->second;
      }
      items.push_back({row.id, row.transcript, spk});
    }
  }

  int64_t r = ctx.cfg.tts.r;
  int64_t max_frames =
      ((ctx.cfg.chain.max_synth_frames + r - 1) / r) * r;
  sc::config::echo_into(ctx.cfg, ctx.cfg.out_dir);
  fs::path out(ctx.cfg.out_dir);
  int64_t capped = 0;
  sc::ad::NoGradGuard guard;
  for (const Item& item : items) {
    sc::text::TokenSequence y = sc::text::encode(item.normalized);
    sc::tts::TTSOutput produced =
        ctx.models->synthesizer->synthesize(y, item.speaker, max_frames);
    if (produced.mel.dim(0) >= max_frames) ++capped;
    sc::dsp::ExtractedFeatures raw;
    raw.log_mel = ctx.mel_stats.invert(tensor_to_sequence(
        produced.mel, sc::dsp::FeatureSequence::Kind::LogMel, true));
    raw.log_magnitude = ctx.magnitude_stats.invert(tensor_to_sequence(
        produced.linear, sc::dsp::FeatureSequence::Kind::LogMagnitude, true));
    sc::Waveform wave = sc::dsp::griffin_lim(
        raw.log_magnitude, ctx.cfg.dsp.griffin_lim_iters, ctx.cfg.dsp);
    sc::write_wav((out / (item.id + ".wav")).string(), wave);
    sc::data::save_feature_pair(raw, (out / item.id).string(), ctx.cfg.dsp);
  }
  std::cout << "synthesized " << items.size() << " utterance(s) into "
            << ctx.cfg.out_dir << "\n";
  if (capped > 0)
    std::cout << "  " << capped << " utterance(s) hit the frame cap of "
              << max_frames << "\n";
  return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& model_dir,
                 std::string manifest_path) {
  prepare_out_dir(opts.out_dir, opts.force);
  InferenceContext ctx = load_inference_context(opts, model_dir,
                                                /*want_asr=*/true,
                                                /*want_tts=*/true);
  if (manifest_path.empty()) manifest_path = ctx.cfg.test_manifest;
  if (manifest_path.empty())
    throw sc::ConfigError(
        "no input: pass --manifest or set data.test_manifest");
  sc::data::Manifest m = sc::data::load_manifest(
      manifest_path, sc::data::Manifest::Kind::kPaired);

  sc::config::echo_into(ctx.cfg, ctx.cfg.out_dir);
  sc::data::BatchStream stream = inference_batches(ctx, m, "evaluate-batches");
  sc::ad::NoGradGuard guard;
  sc::eval::CerAccumulator cer;
  sc::eval::MseAccumulator mel_mse, raw_mse;
  sc::eval::FlagAccumulator flags;
  std::map<std::string, std::string> hyps;
  int64_t r = ctx.cfg.tts.r;
  for (const sc::data::Batch& batch : stream.batches) {
    sc::ad::Tensor mel = batch.utterance_mel(0);
    sc::ad::Tensor linear = batch.utterance_linear(0);
    sc::text::TokenSequence y = batch.utterance_tokens(0);
    std::string hyp = sc::text::decode(decode_utterance(ctx, mel).ids);
    hyps[batch.ids[0]] = hyp;
    cer.add(hyp, sc::text::decode(y));

    int64_t added = 0;
    sc::ad::Tensor gold_mel = sc::tts::pad_frames_to_multiple(mel, r, &added);
    sc::ad::Tensor gold_linear =
        sc::tts::pad_frames_to_multiple(linear, r, &added);
    sc::tts::TTSOutput produced = ctx.models->synthesizer->forward_teacher_forced(
        y, mel, &linear, batch.speakers[0]);
    mel_mse.add(produced.mel, gold_mel);
    raw_mse.add(produced.linear, gold_linear);
    sc::ad::Tensor gold_b = sc::tts::gold_end_flags(gold_mel.shape()[0], r);
    flags.add(produced.flags.values(), gold_b.values());
  }

  sc::eval::EvalReport report;
  report.cer_percent = 100.0 * cer.micro();
  report.cer_percent_macro = 100.0 * cer.macro();
  report.mel_mse = mel_mse.macro();
  report.raw_mse = raw_mse.macro();
  report.flag_accuracy_percent = flags.percent();
  report.utterance_count = static_cast<int64_t>(hyps.size());

  fs::path out(ctx.cfg.out_dir);
  std::string report_path = (out / "eval_report.csv").string();
  std::ofstream os(report_path, std::ios::trunc);
  if (!os) throw sc::DataError("cannot write report: " + report_path);
  os << sc::eval::EvalReport::csv_header() << "\n" << report.csv_row() << "\n";
  if (!os) throw sc::DataError("write failed for report: " + report_path);
  write_hypotheses(hyps, (out / "hypotheses.tsv").string());
  std::cout << report.summary() << "report: " << report_path << "\n";
  return 0;
}

std::vector<uint64_t> parse_seed_list(const std::string& text) {
  std::vector<uint64_t> seeds;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    size_t begin = part.find_first_not_of(" \t");
    if (begin == std::string::npos)
      throw sc::ConfigError("empty entry in seed list: " + text);
    size_t end = part.find_last_not_of(" \t");
    std::string token = part.substr(begin, end - begin + 1);
    try {
      size_t used = 0;
      seeds.push_back(std::stoull(token, &used));
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      throw sc::ConfigError("bad seed \"" + token + "\" in list: " + text);
    }
  }
  if (seeds.empty()) throw sc::ConfigError("no seeds given");
  return seeds;
}

int cmd_run_matrix(const CommonOpts& opts, const std::string& seeds_text,
                   const std::string& experiments_text) {
  sc::config::RunConfig base = resolve_config(opts);
  sc::config::validate(base);
  prepare_out_dir(base.out_dir, opts.force);

  std::vector<uint64_t> seeds = parse_seed_list(seeds_text);
  std::vector<sc::bench::ExperimentSpec> specs = sc::bench::standard_matrix();
  if (!experiments_text.empty()) {
    std::vector<sc::bench::ExperimentSpec> chosen;
    std::stringstream ss(experiments_text);
    std::string name;
    std::vector<std::string> wanted;
    while (std::getline(ss, name, ',')) wanted.push_back(name);
    for (const sc::bench::ExperimentSpec& spec : specs)
      if (std::find(wanted.begin(), wanted.end(), spec.name) != wanted.end())
        chosen.push_back(spec);
    if (chosen.size() != wanted.size()) {
      std::string known;
      for (const sc::bench::ExperimentSpec& spec : specs)
        known += " " + spec.name;
      throw sc::ConfigError("unknown experiment in \"" + experiments_text +
                            "\"; known:" + known);
    }
    specs = std::move(chosen);
  }

  sc::bench::RunFn runner = [&base](const sc::bench::ExperimentSpec& spec,
                                    uint64_t seed,
                                    const std::string& run_dir) {
    sc::config::RunConfig cfg = base;
    cfg.chain.alpha = spec.alpha;
    cfg.chain.beta = spec.beta;
    cfg.chain.generation_mode = spec.generation_mode;
    cfg.chain.beam_size = spec.beam_size;
    cfg.seed = seed;
    cfg.chain.seed = seed;
    cfg.out_dir = run_dir;
    std::cout << "  running " << spec.name << " seed " << seed << "...\n"
              << std::flush;
    sc::chain::TrainResult r = run_training(std::move(cfg), /*force=*/true);
    sc::bench::RunOutcome outcome;
    outcome.ok = true;
    outcome.dev_cer_percent = r.best_dev_cer_percent;
    outcome.dev_mel_mse = r.best_metrics.mel_mse;
    return outcome;
  };

  sc::bench::MatrixResult mr =
      sc::bench::run_matrix(specs, seeds, base.out_dir, runner);
  std::cout << "\n" << mr.markdown << "\n"
            << "table: " << mr.markdown_path << "\n"
            << "csv  : " << mr.csv_path << "\n";
  return mr.runs_ok && mr.directions_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speechchain: closed-loop ASR/TTS training toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  // make-toy-corpus
  sc::toy::ToyCorpusConfig toy_cfg;
  std::string toy_out;
  bool toy_force = false;
  CLI::App* toy = app.add_subcommand(
      "make-toy-corpus", "generate a deterministic synthetic-speech corpus");
  toy->add_option("--out", toy_out, "corpus directory")->required();
  toy->add_flag("--force", toy_force,
                "write into an existing non-empty directory");
  toy->add_option("--seed", toy_cfg.seed, "corpus seed");
  toy->add_option("--paired", toy_cfg.paired_utterances,
                  "paired training utterances");
  toy->add_option("--speech", toy_cfg.speech_only_utterances,
                  "speech-only training utterances");
  toy->add_option("--text", toy_cfg.text_only_utterances,
                  "text-only training utterances");
  toy->add_option("--dev", toy_cfg.dev_utterances, "dev utterances");
  toy->add_option("--test", toy_cfg.test_utterances, "test utterances");
  toy->add_option("--speakers", toy_cfg.num_speakers,
                  "number of synthetic speakers");
  toy->add_option("--words-min", toy_cfg.words_min, "shortest sentence");
  toy->add_option("--words-max", toy_cfg.words_max, "longest sentence");
  toy->add_option("--char-ms", toy_cfg.char_ms,
                  "audio milliseconds per character");
  toy->add_option("--sample-rate", toy_cfg.sample_rate, "waveform sample rate");
  toy->callback(
      [&]() { rc = cmd_make_toy_corpus(toy_cfg, toy_out, toy_force); });

  // extract-features
  CommonOpts extract_opts;
  std::string extract_manifest, extract_kind = "paired";
  CLI::App* extract = app.add_subcommand(
      "extract-features", "precompute feature files for one manifest");
  add_config_opts(extract, extract_opts);
  add_out_opts(extract, extract_opts, /*required=*/true);
  extract->add_option("--manifest", extract_manifest, "input manifest")
      ->required();
  extract->add_option("--kind", extract_kind,
                      "manifest kind (paired or speech-only)");
  extract->callback([&]() {
    rc = cmd_extract_features(extract_opts, extract_manifest, extract_kind);
  });

  // train-supervised / train-chain
  CommonOpts sup_opts;
  CLI::App* sup = app.add_subcommand(
      "train-supervised", "train both models on the paired set only");
  add_config_opts(sup, sup_opts);
  add_out_opts(sup, sup_opts, /*required=*/false);
  sup->callback([&]() { rc = cmd_train(sup_opts, /*supervised_only=*/true); });

  CommonOpts chain_opts;
  CLI::App* chain = app.add_subcommand(
      "train-chain", "train the closed loop on paired plus unpaired sets");
  add_config_opts(chain, chain_opts);
  add_out_opts(chain, chain_opts, /*required=*/false);
  chain->callback(
      [&]() { rc = cmd_train(chain_opts, /*supervised_only=*/false); });

  // transcribe
  CommonOpts tr_opts;
  std::string tr_model_dir, tr_manifest, tr_kind = "paired";
  CLI::App* tr = app.add_subcommand("transcribe",
                                    "decode a manifest with a trained model");
  add_config_opts(tr, tr_opts);
  add_out_opts(tr, tr_opts, /*required=*/true);
  tr->add_option("--model-dir", tr_model_dir, "training output directory")
      ->required();
  tr->add_option("--manifest", tr_manifest,
                 "input manifest (default: the configured test set)");
  tr->add_option("--kind", tr_kind, "manifest kind (paired or speech-only)");
  tr->callback(
      [&]() { rc = cmd_transcribe(tr_opts, tr_model_dir, tr_manifest, tr_kind); });

  // synthesize
  CommonOpts syn_opts;
  std::string syn_model_dir, syn_manifest, syn_speaker;
  std::vector<std::string> syn_texts;
  CLI::App* syn = app.add_subcommand(
      "synthesize", "turn text into waveforms with a trained model");
  add_config_opts(syn, syn_opts);
  add_out_opts(syn, syn_opts, /*required=*/true);
  syn->add_option("--model-dir", syn_model_dir, "training output directory")
      ->required();
  syn->add_option("--text", syn_texts, "sentence to synthesize (repeatable)");
  syn->add_option("--manifest", syn_manifest, "text-only manifest");
  syn->add_option("--speaker", syn_speaker, "speaker tag for every utterance");
  syn->callback([&]() {
    rc = cmd_synthesize(syn_opts, syn_model_dir, syn_texts, syn_manifest,
                        syn_speaker);
  });

  // evaluate
  CommonOpts ev_opts;
  std::string ev_model_dir, ev_manifest;
  CLI::App* ev = app.add_subcommand(
      "evaluate", "score a trained model on a paired manifest");
  add_config_opts(ev, ev_opts);
  add_out_opts(ev, ev_opts, /*required=*/true);
  ev->add_option("--model-dir", ev_model_dir, "training output directory")
      ->required();
  ev->add_option("--manifest", ev_manifest,
                 "paired manifest (default: the configured test set)");
  ev->callback(
      [&]() { rc = cmd_evaluate(ev_opts, ev_model_dir, ev_manifest); });

  // run-matrix
  CommonOpts mx_opts;
  std::string mx_seeds = "1,2,3", mx_experiments;
  CLI::App* mx = app.add_subcommand(
      "run-matrix", "train and compare the standard experiment grid");
  add_config_opts(mx, mx_opts);
  add_out_opts(mx, mx_opts, /*required=*/true);
  mx->add_option("--seeds", mx_seeds, "comma-separated seed list");
  mx->add_option("--experiments", mx_experiments,
                 "comma-separated subset of the standard experiments");
  mx->callback([&]() { rc = cmd_run_matrix(mx_opts, mx_seeds, mx_experiments); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const speechchain::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}
