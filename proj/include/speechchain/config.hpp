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

// Declarative run configuration: one flat `key = value` file describing the
// front end, both models, the training loop, and the dataset paths. Unknown
// keys are rejected, every violation is reported at once, and the fully
// resolved configuration can be echoed back out for reproducibility.

#ifndef SPEECHCHAIN_CONFIG_HPP_
#define SPEECHCHAIN_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include "speechchain/asr.hpp"
#include "speechchain/chain.hpp"
#include "speechchain/dsp.hpp"
#include "speechchain/errors.hpp"
#include "speechchain/tts.hpp"

namespace speechchain {
namespace config {

struct RunConfig {
  dsp::DspConfig dsp;
  asr::ASRConfig asr;
  tts::TTSConfig tts;
  chain::ChainConfig chain;
  std::string paired_manifest;
  std::string speech_manifest;
  std::string text_manifest;
  std::string dev_manifest;
  std::string test_manifest;
  std::string out_dir;
  uint64_t seed = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline int64_t parse_i64(const std::string& raw) {
  size_t used = 0;
  int64_t v = 0;
  try {
    v = std::stoll(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got \"" + raw + "\"");
  }
  if (used != raw.size())
    throw ConfigError("expected an integer, got \"" + raw + "\"");
  return v;
}

inline uint64_t parse_u64(const std::string& raw) {
  int64_t v = parse_i64(raw);
  if (v < 0)
    throw ConfigError("expected a nonnegative integer, got \"" + raw + "\"");
  return static_cast<uint64_t>(v);
}

inline double parse_f64(const std::string& raw) {
  size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(raw, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got \"" + raw + "\"");
  }
  if (used != raw.size())
    throw ConfigError("expected a number, got \"" + raw + "\"");
  return v;
}

inline std::vector<int64_t> parse_i64_list(const std::string& raw) {
  std::vector<int64_t> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty())
      throw ConfigError("expected a comma-separated integer list, got \"" +
                        raw + "\"");
    out.push_back(parse_i64(item));
  }
  if (out.empty())
    throw ConfigError("expected a comma-separated integer list, got \"" +
                      raw + "\"");
  return out;
}

inline std::string format_f64(double v) {
  std::ostringstream os;
  os.precision(17);  // parses back to the identical double
  os << v;
  return os.str();
}

inline std::string format_i64_list(const std::vector<int64_t>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i)
    out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

struct KeyBinding {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Binds one config field by an accessor lambda; the parser and formatter are
// chosen from the field type.
template <class Accessor>
KeyBinding bind(const char* key, Accessor acc) {
  using Field = std::remove_reference_t<decltype(acc(
      std::declval<RunConfig&>()))>;
  KeyBinding kb;
  kb.key = key;
  kb.set = [acc](RunConfig& cfg, const std::string& raw) {
    if constexpr (std::is_same_v<Field, std::string>) {
      acc(cfg) = raw;
    } else if constexpr (std::is_same_v<Field, std::vector<int64_t>>) {
      acc(cfg) = parse_i64_list(raw);
    } else if constexpr (std::is_same_v<Field, double>) {
      acc(cfg) = parse_f64(raw);
    } else if constexpr (std::is_same_v<Field, uint64_t>) {
      acc(cfg) = parse_u64(raw);
    } else {
      static_assert(std::is_integral_v<Field>);
      int64_t v = parse_i64(raw);
      if (v < std::numeric_limits<Field>::min() ||
          v > std::numeric_limits<Field>::max())
        throw ConfigError("value out of range: \"" + raw + "\"");
      acc(cfg) = static_cast<Field>(v);
    }
  };
  kb.get = [acc](const RunConfig& cfg) -> std::string {
    Field& f = acc(const_cast<RunConfig&>(cfg));
    if constexpr (std::is_same_v<Field, std::string>) {
      return f;
    } else if constexpr (std::is_same_v<Field, std::vector<int64_t>>) {
      return format_i64_list(f);
    } else if constexpr (std::is_same_v<Field, double>) {
      return format_f64(f);
    } else {
      return std::to_string(f);
    }
  };
  return kb;
}

inline KeyBinding bind_scorer(const char* key) {
  KeyBinding kb;
  kb.key = key;
  kb.set = [](RunConfig& cfg, const std::string& raw) {
    cfg.asr.scorer = asr::scorer_from_string(raw);
  };
  kb.get = [](const RunConfig& cfg) {
    return asr::scorer_to_string(cfg.asr.scorer);
  };
  return kb;
}

inline const std::vector<KeyBinding>& key_bindings() {
  static const std::vector<KeyBinding> kBindings = [] {
    std::vector<KeyBinding> b;
    auto f = [&b](KeyBinding kb) { b.push_back(std::move(kb)); };
    f(bind("seed", [](RunConfig& c) -> uint64_t& { return c.seed; }));
    f(bind("out_dir", [](RunConfig& c) -> std::string& { return c.out_dir; }));

    f(bind("data.paired_manifest",
           [](RunConfig& c) -> std::string& { return c.paired_manifest; }));
    f(bind("data.speech_manifest",
           [](RunConfig& c) -> std::string& { return c.speech_manifest; }));
    f(bind("data.text_manifest",
           [](RunConfig& c) -> std::string& { return c.text_manifest; }));
    f(bind("data.dev_manifest",
           [](RunConfig& c) -> std::string& { return c.dev_manifest; }));
    f(bind("data.test_manifest",
           [](RunConfig& c) -> std::string& { return c.test_manifest; }));

    f(bind("dsp.sample_rate",
           [](RunConfig& c) -> int& { return c.dsp.sample_rate; }));
    f(bind("dsp.frame_ms",
           [](RunConfig& c) -> double& { return c.dsp.frame_ms; }));
    f(bind("dsp.shift_ms",
           [](RunConfig& c) -> double& { return c.dsp.shift_ms; }));
    f(bind("dsp.fft_size",
           [](RunConfig& c) -> int& { return c.dsp.fft_size; }));
    f(bind("dsp.preemphasis",
           [](RunConfig& c) -> double& { return c.dsp.preemphasis; }));
    f(bind("dsp.n_mels", [](RunConfig& c) -> int& { return c.dsp.n_mels; }));
    f(bind("dsp.log_eps",
           [](RunConfig& c) -> double& { return c.dsp.log_eps; }));
    f(bind("dsp.griffin_lim_iters",
           [](RunConfig& c) -> int& { return c.dsp.griffin_lim_iters; }));
    f(bind("dsp.magnitude_power",
           [](RunConfig& c) -> double& { return c.dsp.magnitude_power; }));

    f(bind("asr.input_dim",
           [](RunConfig& c) -> int64_t& { return c.asr.input_dim; }));
    f(bind("asr.proj_dim",
           [](RunConfig& c) -> int64_t& { return c.asr.proj_dim; }));
    f(bind("asr.enc_layers",
           [](RunConfig& c) -> int& { return c.asr.enc_layers; }));
    f(bind("asr.enc_units",
           [](RunConfig& c) -> int64_t& { return c.asr.enc_units; }));
    f(bind("asr.embed_dim",
           [](RunConfig& c) -> int64_t& { return c.asr.embed_dim; }));
    f(bind("asr.dec_units",
           [](RunConfig& c) -> int64_t& { return c.asr.dec_units; }));
    f(bind("asr.mlp_hidden",
           [](RunConfig& c) -> int64_t& { return c.asr.mlp_hidden; }));
    f(bind_scorer("asr.scorer"));
    f(bind("asr.classes",
           [](RunConfig& c) -> int64_t& { return c.asr.classes; }));

    f(bind("tts.vocab", [](RunConfig& c) -> int64_t& { return c.tts.vocab; }));
    f(bind("tts.embed_dim",
           [](RunConfig& c) -> int64_t& { return c.tts.embed_dim; }));
    f(bind("tts.enc_prenet", [](RunConfig& c) -> std::vector<int64_t>& {
      return c.tts.enc_prenet;
    }));
    f(bind("tts.dec_prenet", [](RunConfig& c) -> std::vector<int64_t>& {
      return c.tts.dec_prenet;
    }));
    f(bind("tts.bank_k", [](RunConfig& c) -> int& { return c.tts.bank_k; }));
    f(bind("tts.bank_channels",
           [](RunConfig& c) -> int64_t& { return c.tts.bank_channels; }));
    f(bind("tts.proj_channels",
           [](RunConfig& c) -> int64_t& { return c.tts.proj_channels; }));
    f(bind("tts.highway_layers",
           [](RunConfig& c) -> int& { return c.tts.highway_layers; }));
    f(bind("tts.gru_units",
           [](RunConfig& c) -> int64_t& { return c.tts.gru_units; }));
    f(bind("tts.dec_units",
           [](RunConfig& c) -> int64_t& { return c.tts.dec_units; }));
    f(bind("tts.r", [](RunConfig& c) -> int64_t& { return c.tts.r; }));
    f(bind("tts.mel_dim",
           [](RunConfig& c) -> int64_t& { return c.tts.mel_dim; }));
    f(bind("tts.linear_dim",
           [](RunConfig& c) -> int64_t& { return c.tts.linear_dim; }));
    f(bind("tts.attention_sigma",
           [](RunConfig& c) -> double& { return c.tts.attention_sigma; }));
    f(bind("tts.num_speakers",
           [](RunConfig& c) -> int64_t& { return c.tts.num_speakers; }));
    f(bind("tts.speaker_dim",
           [](RunConfig& c) -> int64_t& { return c.tts.speaker_dim; }));
    f(bind("tts.speaker_proj",
           [](RunConfig& c) -> int64_t& { return c.tts.speaker_proj; }));

    f(bind("chain.alpha",
           [](RunConfig& c) -> double& { return c.chain.alpha; }));
    f(bind("chain.beta", [](RunConfig& c) -> double& { return c.chain.beta; }));
    f(bind("chain.generation_mode", [](RunConfig& c) -> std::string& {
      return c.chain.generation_mode;
    }));
    f(bind("chain.beam_size",
           [](RunConfig& c) -> int64_t& { return c.chain.beam_size; }));
    f(bind("chain.batch_size",
           [](RunConfig& c) -> int64_t& { return c.chain.batch_size; }));
    f(bind("chain.unpaired_batch_size", [](RunConfig& c) -> int64_t& {
      return c.chain.unpaired_batch_size;
    }));
    f(bind("chain.max_decode_len",
           [](RunConfig& c) -> int64_t& { return c.chain.max_decode_len; }));
    f(bind("chain.max_synth_frames",
           [](RunConfig& c) -> int64_t& { return c.chain.max_synth_frames; }));
    f(bind("chain.max_epochs",
           [](RunConfig& c) -> int64_t& { return c.chain.max_epochs; }));
    f(bind("chain.patience",
           [](RunConfig& c) -> int64_t& { return c.chain.patience; }));
    f(bind("chain.warmup_epochs",
           [](RunConfig& c) -> int64_t& { return c.chain.warmup_epochs; }));
    f(bind("chain.learning_rate",
           [](RunConfig& c) -> double& { return c.chain.learning_rate; }));
    f(bind("chain.optimizer",
           [](RunConfig& c) -> std::string& { return c.chain.optimizer; }));
    f(bind("chain.momentum",
           [](RunConfig& c) -> double& { return c.chain.momentum; }));
    f(bind("chain.grad_clip",
           [](RunConfig& c) -> double& { return c.chain.grad_clip; }));
    return b;
  }();
  return kBindings;
}

inline const KeyBinding* find_binding(const std::string& key) {
  for (const KeyBinding& kb : key_bindings())
    if (kb.key == key) return &kb;
  return nullptr;
}

}  // namespace detail

// Applies one `key=value` override (the CLI's --set flag).
inline void apply_override(RunConfig& cfg, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("override must look like key=value, got \"" +
                      assignment + "\"");
  std::string key = detail::trim(assignment.substr(0, eq));
  std::string value = detail::trim(assignment.substr(eq + 1));
  const detail::KeyBinding* kb = detail::find_binding(key);
  if (kb == nullptr) throw ConfigError("unknown config key \"" + key + "\"");
  kb->set(cfg, value);
}

// Parses a run-configuration file. Lines are `key = value`; `#` starts a
// comment; blank lines are skipped. Every problem in the file — unknown
// keys, malformed lines, unparsable values — is reported in one error.
inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  RunConfig cfg;
  std::vector<std::string> problems;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) +
                         ": expected key = value");
      continue;
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    const detail::KeyBinding* kb = detail::find_binding(key);
    if (kb == nullptr) {
      problems.push_back("line " + std::to_string(lineno) +
                         ": unknown key \"" + key + "\"");
      continue;
    }
    try {
      kb->set(cfg, value);
    } catch (const ConfigError& e) {
      problems.push_back("line " + std::to_string(lineno) + ": " + key +
                         ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid config file " + path + ":";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
  cfg.chain.seed = cfg.seed;
  return cfg;
}

// Validates every sub-configuration plus the couplings between them,
// reporting all violations together.
inline void validate(const RunConfig& cfg) {
  std::vector<std::string> problems;
  auto collect = [&problems](const std::function<void()>& check) {
    try {
      check();
    } catch (const ConfigError& e) {
      problems.push_back(e.what());
    }
  };
  collect([&] { cfg.dsp.validate(); });
  collect([&] { cfg.asr.validate(); });
  collect([&] { cfg.tts.validate(); });
  collect([&] { cfg.chain.validate(); });
  if (cfg.asr.input_dim != cfg.dsp.n_mels)
    problems.push_back("asr.input_dim (" + std::to_string(cfg.asr.input_dim) +
                       ") must equal dsp.n_mels (" +
                       std::to_string(cfg.dsp.n_mels) + ")");
  if (cfg.tts.mel_dim != cfg.dsp.n_mels)
    problems.push_back("tts.mel_dim (" + std::to_string(cfg.tts.mel_dim) +
                       ") must equal dsp.n_mels (" +
                       std::to_string(cfg.dsp.n_mels) + ")");
  if (cfg.tts.linear_dim != cfg.dsp.n_bins())
    problems.push_back("tts.linear_dim (" +
                       std::to_string(cfg.tts.linear_dim) +
                       ") must equal the spectrum bin count (" +
                       std::to_string(cfg.dsp.n_bins()) + ")");
  if (cfg.asr.classes != cfg.tts.vocab)
    problems.push_back("asr.classes (" + std::to_string(cfg.asr.classes) +
                       ") must equal tts.vocab (" +
                       std::to_string(cfg.tts.vocab) +
                       "); both models share one alphabet");
  if (!problems.empty()) {
    std::string msg = "invalid run configuration:";
    for (const std::string& p : problems) msg += "\n  - " + p;
    throw ConfigError(msg);
  }
}

// The fully resolved configuration as a loadable `key = value` document.
inline std::string render(const RunConfig& cfg) {
  std::string out = "# resolved run configuration\n";
  for (const detail::KeyBinding& kb : detail::key_bindings())
    out += kb.key + " = " + kb.get(cfg) + "\n";
  return out;
}

// Echoes the resolved configuration into the output directory.
inline std::string echo_into(const RunConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::string path =
      (std::filesystem::path(dir) / "run_config.resolved").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out << render(cfg);
  return path;
}

}  // namespace config
}  // namespace speechchain

#endif  // SPEECHCHAIN_CONFIG_HPP_
