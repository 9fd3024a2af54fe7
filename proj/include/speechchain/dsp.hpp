// speechchain/dsp.hpp
//
// Speech feature pipeline: wave normalization, pre-emphasis, STFT/ISTFT,
// mel filterbank, log features, per-dimension normalization stats, and
// Griffin-Lim phase reconstruction. Feature matrices are stored to disk as a
// small versioned binary container (see feature save/load at the bottom):
//
//   magic            8 bytes  "SPCHFEAT"
//   format version   u32      currently 1
//   kind             u32      0 = log-mel, 1 = log-magnitude
//   frames S         u64
//   dims D           u64
//   values           S*D x f32 row-major little-endian
//
// plus a one-line-per-key textual sidecar (<path>.meta) recording the
// extraction configuration.

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

#ifndef SPEECHCHAIN_DSP_HPP
#define SPEECHCHAIN_DSP_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "speechchain/errors.hpp"
#include "speechchain/wav.hpp"

namespace speechchain {
namespace dsp {

struct DspConfig {
  int sample_rate = 16000;
  double frame_ms = 50.0;
  double shift_ms = 12.5;
  int fft_size = 2048;
  double preemphasis = 0.97;
  int n_mels = 40;
  double log_eps = 1e-10;
  int griffin_lim_iters = 60;
  double magnitude_power = 1.0;  // optional sharpening exponent before GL

  int win_length() const {
    return static_cast<int>(std::lround(frame_ms * sample_rate / 1000.0));
  }
  int hop_length() const {
    return static_cast<int>(std::lround(shift_ms * sample_rate / 1000.0));
  }
  int n_bins() const { return fft_size / 2 + 1; }

  void validate() const {
    std::string problems;
    auto bad = [&](const std::string& p) {
      problems += problems.empty() ? p : "; " + p;
    };
    if (sample_rate <= 0) bad("sample_rate must be positive");
    if (fft_size < 2 || (fft_size & (fft_size - 1)) != 0)
      bad("fft_size must be a power of two");
    if (win_length() <= 0) bad("frame length must be positive");
    if (win_length() > fft_size) bad("frame samples exceed fft_size");
    if (hop_length() <= 0) bad("frame shift must be positive");
    if (preemphasis < 0.0 || preemphasis >= 1.0)
      bad("preemphasis must be in [0, 1)");
    if (n_mels < 1) bad("n_mels must be at least 1");
    if (n_mels > n_bins()) bad("n_mels exceeds spectrum bin count");
    if (!problems.empty()) throw ConfigError("dsp config: " + problems);
  }
};

struct FeatureSequence {
  enum class Kind { LogMel, LogMagnitude };
  int64_t s = 0;  // frames
  int64_t d = 0;  // dims per frame
  std::vector<double> frames;  // row-major S x D
  Kind kind = Kind::LogMel;
  bool normalized = false;

  double at(int64_t frame, int64_t dim) const {
    return frames[static_cast<size_t>(frame * d + dim)];
  }
  double& at(int64_t frame, int64_t dim) {
    return frames[static_cast<size_t>(frame * d + dim)];
  }
};

// --- Waveform-domain transforms ----------------------------------------------

// Scale so that max |sample| is 1; silence is returned unchanged.
inline Waveform wave_normalize(const Waveform& w) {
  double peak = 0.0;
  for (double s : w.samples) peak = std::max(peak, std::fabs(s));
  Waveform out = w;
  if (peak > 0.0)
    for (double& s : out.samples) s /= peak;
  return out;
}

inline Waveform preemphasis(const Waveform& w, double coef) {
  if (w.samples.empty()) throw DataError("preemphasis: empty waveform");
  if (coef < 0.0 || coef >= 1.0)
    throw ConfigError("preemphasis coefficient must be in [0, 1)");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  out.samples[0] = w.samples[0];
  for (size_t n = 1; n < w.samples.size(); ++n)
    out.samples[n] = w.samples[n] - coef * w.samples[n - 1];
  return out;
}

inline Waveform deemphasis(const Waveform& w, double coef) {
  if (w.samples.empty()) throw DataError("deemphasis: empty waveform");
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  out.samples[0] = w.samples[0];
  for (size_t n = 1; n < w.samples.size(); ++n)
    out.samples[n] = w.samples[n] + coef * out.samples[n - 1];
  return out;
}

// --- FFT ----------------------------------------------------------------------

// In-place iterative radix-2 FFT; size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0)
    throw NumericError("fft: size must be a power of two, got " +
                       std::to_string(n));
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    double ang = 2.0 * std::numbers::pi / static_cast<double>(len) *
                 (inverse ? 1.0 : -1.0);
    std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse) {
    double inv_n = 1.0 / static_cast<double>(n);
    for (auto& x : a) x *= inv_n;
  }
}

// --- STFT / ISTFT --------------------------------------------------------------

namespace detail {

// Reflect (mirror without edge repetition) an out-of-range index into [0, n).
inline int64_t reflect_index(int64_t i, int64_t n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace detail

// Frames are centered every hop samples on a reflect-padded signal; the
// periodic Hann window of win_length samples sits centered in the FFT buffer.
class Stft {
 public:
  explicit Stft(const DspConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    win_ = cfg.win_length();
    hop_ = cfg.hop_length();
    fft_ = cfg.fft_size;
    offset_ = (fft_ - win_) / 2;
    window_.assign(static_cast<size_t>(fft_), 0.0);
    for (int n = 0; n < win_; ++n)
      window_[static_cast<size_t>(offset_ + n)] =
          0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / win_));
  }

  int64_t num_frames(int64_t n_samples) const {
    return 1 + n_samples / hop_;
  }

  // Complex one-sided spectra: frames x (fft/2 + 1).
  std::vector<std::vector<std::complex<double>>> forward(
      const std::vector<double>& x) const {
    if (x.empty()) throw DataError("stft: empty signal");
    int64_t n = static_cast<int64_t>(x.size());
    int64_t pad = fft_ / 2;
    if (n + 2 * pad < hop_)
      throw DataError("stft: signal shorter than one hop after padding");
    int64_t frames = num_frames(n);
    std::vector<std::vector<std::complex<double>>> out(
        static_cast<size_t>(frames));
    std::vector<std::complex<double>> buf(static_cast<size_t>(fft_));
    int bins = cfg_.n_bins();
    for (int64_t t = 0; t < frames; ++t) {
      int64_t start = t * hop_ - pad;  // frame centered at t*hop
      for (int64_t k = 0; k < fft_; ++k) {
        int64_t src = detail::reflect_index(start + k, n);
        buf[static_cast<size_t>(k)] = x[static_cast<size_t>(src)] *
                                      window_[static_cast<size_t>(k)];
      }
      fft_inplace(buf, false);
      out[static_cast<size_t>(t)].assign(buf.begin(), buf.begin() + bins);
    }
    return out;
  }

  // Overlap-add inverse with window-square normalization, trimmed to
  // n_samples.
  std::vector<double> inverse(
      const std::vector<std::vector<std::complex<double>>>& spectra,
      int64_t n_samples) const {
    if (spectra.empty()) throw DataError("istft: no frames");
    int bins = cfg_.n_bins();
    int64_t frames = static_cast<int64_t>(spectra.size());
    int64_t pad = fft_ / 2;
    int64_t total = (frames - 1) * hop_ + fft_;
    std::vector<double> acc(static_cast<size_t>(total), 0.0);
    std::vector<double> wsum(static_cast<size_t>(total), 0.0);
    std::vector<std::complex<double>> buf(static_cast<size_t>(fft_));
    for (int64_t t = 0; t < frames; ++t) {
      const auto& half = spectra[static_cast<size_t>(t)];
      if (static_cast<int>(half.size()) != bins)
        throw ShapeError("istft: frame " + std::to_string(t) + " has " +
                         std::to_string(half.size()) + " bins, expected " +
                         std::to_string(bins));
      for (int k = 0; k < bins; ++k) buf[static_cast<size_t>(k)] = half[k];
      for (int k = bins; k < fft_; ++k)
        buf[static_cast<size_t>(k)] =
            std::conj(half[static_cast<size_t>(fft_ - k)]);
      fft_inplace(buf, true);
      int64_t start = t * hop_;  // in padded coordinates (offset by pad)
      for (int64_t k = 0; k < fft_; ++k) {
        double w = window_[static_cast<size_t>(k)];
        acc[static_cast<size_t>(start + k)] +=
            buf[static_cast<size_t>(k)].real() * w;
        wsum[static_cast<size_t>(start + k)] += w * w;
      }
    }
    std::vector<double> out(static_cast<size_t>(n_samples), 0.0);
    for (int64_t i = 0; i < n_samples; ++i) {
      size_t j = static_cast<size_t>(i + pad);
      if (j < acc.size() && wsum[j] > 1e-11) out[static_cast<size_t>(i)] =
          acc[j] / wsum[j];
    }
    return out;
  }

  int win_length() const { return win_; }
  int hop_length() const { return hop_; }
  int fft_size() const { return fft_; }

 private:
  DspConfig cfg_;
  int win_, hop_, fft_, offset_;
  std::vector<double> window_;
};

// Magnitude and power spectra, each frames x (fft/2 + 1), row-major.
inline void stft_spectra(const Waveform& w, const DspConfig& cfg,
                         FeatureSequence* magnitude, FeatureSequence* power) {
  Stft stft(cfg);
  auto spectra = stft.forward(w.samples);
  int64_t s = static_cast<int64_t>(spectra.size());
  int64_t d = cfg.n_bins();
  if (magnitude) {
    magnitude->s = s;
    magnitude->d = d;
    magnitude->kind = FeatureSequence::Kind::LogMagnitude;
    magnitude->normalized = false;
    magnitude->frames.resize(static_cast<size_t>(s * d));
  }
  if (power) {
    power->s = s;
    power->d = d;
    power->kind = FeatureSequence::Kind::LogMagnitude;
    power->normalized = false;
    power->frames.resize(static_cast<size_t>(s * d));
  }
  for (int64_t t = 0; t < s; ++t)
    for (int64_t k = 0; k < d; ++k) {
      double m = std::abs(spectra[static_cast<size_t>(t)]
                                 [static_cast<size_t>(k)]);
      if (magnitude) magnitude->at(t, k) = m;
      if (power) power->at(t, k) = m * m;
    }
}

// --- Mel filterbank -------------------------------------------------------------

namespace detail {

// Slaney mel curve: linear below 1 kHz, logarithmic above.
inline double hz_to_mel(double hz) {
  constexpr double kBreak = 1000.0;
  constexpr double kLinear = 3.0 / 200.0;
  if (hz < kBreak) return hz * kLinear;
  return 15.0 + 27.0 * std::log(hz / kBreak) / std::log(6.4);
}

inline double mel_to_hz(double mel) {
  constexpr double kBreak = 15.0;
  if (mel < kBreak) return mel * 200.0 / 3.0;
  return 1000.0 * std::exp(std::log(6.4) * (mel - kBreak) / 27.0);
}

}  // namespace detail

// Area-normalized triangular filters, n_mels x (fft/2 + 1) row-major.
inline std::vector<double> mel_filterbank(int n_mels, int fft_size,
                                          int sample_rate) {
  if (n_mels < 1) throw ConfigError("mel_filterbank: n_mels must be >= 1");
  int bins = fft_size / 2 + 1;
  if (n_mels > bins)
    throw ConfigError("mel_filterbank: " + std::to_string(n_mels) +
                      " filters exceed " + std::to_string(bins) + " bins");
  double mel_lo = detail::hz_to_mel(0.0);
  double mel_hi = detail::hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int m = 0; m < n_mels + 2; ++m)
    edges[static_cast<size_t>(m)] = detail::mel_to_hz(
        mel_lo + (mel_hi - mel_lo) * m / (n_mels + 1));

  std::vector<double> fb(static_cast<size_t>(n_mels) * bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    double f_lo = edges[static_cast<size_t>(m)];
    double f_mid = edges[static_cast<size_t>(m) + 1];
    double f_hi = edges[static_cast<size_t>(m) + 2];
    double norm = 2.0 / (f_hi - f_lo);  // Slaney area normalization
    for (int k = 0; k < bins; ++k) {
      double f = static_cast<double>(k) * sample_rate / fft_size;
      double up = (f - f_lo) / (f_mid - f_lo);
      double down = (f_hi - f) / (f_hi - f_mid);
      double w = std::max(0.0, std::min(up, down));
      fb[static_cast<size_t>(m) * bins + k] = w * norm;
    }
  }
  return fb;
}

// --- Feature extraction -----------------------------------------------------------

struct ExtractedFeatures {
  FeatureSequence log_mel;        // S x n_mels
  FeatureSequence log_magnitude;  // S x (fft/2 + 1)
};

// normalize -> pre-emphasis -> STFT; power spectrum -> mel -> log for the mel
// branch, magnitude -> log for the linear branch.
inline ExtractedFeatures extract_features(const Waveform& w,
                                          const DspConfig& cfg) {
  cfg.validate();
  Waveform prepared = preemphasis(wave_normalize(w), cfg.preemphasis);
  FeatureSequence magnitude, power;
  stft_spectra(prepared, cfg, &magnitude, &power);

  std::vector<double> fb =
      mel_filterbank(cfg.n_mels, cfg.fft_size, cfg.sample_rate);
  int bins = cfg.n_bins();

  ExtractedFeatures out;
  out.log_mel.s = power.s;
  out.log_mel.d = cfg.n_mels;
  out.log_mel.kind = FeatureSequence::Kind::LogMel;
  out.log_mel.frames.resize(static_cast<size_t>(power.s * cfg.n_mels));
  for (int64_t t = 0; t < power.s; ++t)
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      for (int k = 0; k < bins; ++k)
        acc += fb[static_cast<size_t>(m) * bins + k] * power.at(t, k);
      out.log_mel.at(t, m) = std::log(acc + cfg.log_eps);
    }

  out.log_magnitude = std::move(magnitude);
  for (auto& v : out.log_magnitude.frames) v = std::log(v + cfg.log_eps);
  return out;
}

// --- Normalization stats ------------------------------------------------------------

struct NormalizationStats {
  std::vector<double> mean;
  std::vector<double> stddev;
  std::string corpus_id;
  int64_t frame_count = 0;
  int floored_dims = 0;

  static constexpr double kStdFloor = 1e-5;

  static NormalizationStats fit(const std::vector<const FeatureSequence*>& corpus,
                                const std::string& corpus_id) {
    if (corpus.empty()) throw DataError("normalization fit: empty corpus");
    int64_t d = corpus.front()->d;
    int64_t n = 0;
    std::vector<double> sum(static_cast<size_t>(d), 0.0);
    std::vector<double> sumsq(static_cast<size_t>(d), 0.0);
    for (const auto* f : corpus) {
      if (f->d != d)
        throw ShapeError("normalization fit: dim mismatch in corpus");
      for (int64_t t = 0; t < f->s; ++t)
        for (int64_t k = 0; k < d; ++k) {
          double v = f->at(t, k);
          sum[static_cast<size_t>(k)] += v;
          sumsq[static_cast<size_t>(k)] += v * v;
        }
      n += f->s;
    }
    if (n < 2) throw DataError("normalization fit: needs at least 2 frames");
    NormalizationStats stats;
    stats.corpus_id = corpus_id;
    stats.frame_count = n;
    stats.mean.resize(static_cast<size_t>(d));
    stats.stddev.resize(static_cast<size_t>(d));
    for (int64_t k = 0; k < d; ++k) {
      double mu = sum[static_cast<size_t>(k)] / static_cast<double>(n);
      double var =
          sumsq[static_cast<size_t>(k)] / static_cast<double>(n) - mu * mu;
      double sd = std::sqrt(std::max(var, 0.0));
      if (sd < kStdFloor) {
        sd = kStdFloor;
        ++stats.floored_dims;
      }
      stats.mean[static_cast<size_t>(k)] = mu;
      stats.stddev[static_cast<size_t>(k)] = sd;
    }
    if (stats.floored_dims > 0)
      std::cerr << "warning: normalization floored " << stats.floored_dims
                << " constant dimension(s) at " << kStdFloor << "\n";
    return stats;
  }

  FeatureSequence apply(const FeatureSequence& f) const {
    check_dims(f);
    if (f.normalized)
      throw DataError("normalization apply: sequence already normalized");
    FeatureSequence out = f;
    for (int64_t t = 0; t < f.s; ++t)
      for (int64_t k = 0; k < f.d; ++k)
        out.at(t, k) = (f.at(t, k) - mean[static_cast<size_t>(k)]) /
                       stddev[static_cast<size_t>(k)];
    out.normalized = true;
    return out;
  }

  FeatureSequence invert(const FeatureSequence& f) const {
    check_dims(f);
    FeatureSequence out = f;
    for (int64_t t = 0; t < f.s; ++t)
      for (int64_t k = 0; k < f.d; ++k)
        out.at(t, k) = f.at(t, k) * stddev[static_cast<size_t>(k)] +
                       mean[static_cast<size_t>(k)];
    out.normalized = false;
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write normalization stats: " + path);
    os << "speechchain-norm-stats v1\n";
    os << "corpus " << corpus_id << "\n";
    os << "frames " << frame_count << "\n";
    os << "dims " << mean.size() << "\n";
    os.precision(17);
    os << "mean";
    for (double v : mean) os << " " << v;
    os << "\nstd";
    for (double v : stddev) os << " " << v;
    os << "\n";
    if (!os) throw DataError("write failed for stats: " + path);
  }

  static NormalizationStats load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open normalization stats: " + path);
    std::string line;
    std::getline(is, line);
    if (line != "speechchain-norm-stats v1")
      throw DataError("bad stats header in " + path);
    NormalizationStats stats;
    std::string key;
    is >> key >> stats.corpus_id;
    is >> key >> stats.frame_count;
    size_t dims = 0;
    is >> key >> dims;
    stats.mean.resize(dims);
    stats.stddev.resize(dims);
    is >> key;
    for (auto& v : stats.mean) is >> v;
    is >> key;
    for (auto& v : stats.stddev) is >> v;
    if (!is) throw DataError("truncated stats file: " + path);
    return stats;
  }

 private:
  void check_dims(const FeatureSequence& f) const {
    if (static_cast<size_t>(f.d) != mean.size())
      throw ShapeError("normalization: stats have " +
                       std::to_string(mean.size()) + " dims, sequence has " +
                       std::to_string(f.d));
  }
};

// --- Griffin-Lim ------------------------------------------------------------------

// Iterative phase reconstruction from a (denormalized) log-magnitude
// spectrogram; starts from zero phase, de-emphasizes at the end. When
// convergence_trace is given it receives, per iteration, the relative
// Frobenius distance between the estimate's magnitude and the target.
inline Waveform griffin_lim(const FeatureSequence& log_magnitude,
                            int iterations, const DspConfig& cfg,
                            std::vector<double>* convergence_trace = nullptr) {
  if (log_magnitude.kind != FeatureSequence::Kind::LogMagnitude)
    throw DataError("griffin_lim: expects a log-magnitude sequence");
  if (log_magnitude.normalized)
    throw DataError("griffin_lim: sequence must be denormalized first");
  if (iterations < 0) throw ConfigError("griffin_lim: negative iterations");
  cfg.validate();
  for (double v : log_magnitude.frames)
    if (!std::isfinite(v))
      throw NumericError("griffin_lim: non-finite input value");

  Stft stft(cfg);
  int64_t s = log_magnitude.s;
  int bins = cfg.n_bins();
  if (log_magnitude.d != bins)
    throw ShapeError("griffin_lim: expected " + std::to_string(bins) +
                     " bins, got " + std::to_string(log_magnitude.d));

  // Undo the log (and optional sharpening) to linear magnitude.
  std::vector<std::vector<std::complex<double>>> spec(
      static_cast<size_t>(s));
  std::vector<std::vector<double>> target(static_cast<size_t>(s));
  for (int64_t t = 0; t < s; ++t) {
    target[static_cast<size_t>(t)].resize(static_cast<size_t>(bins));
    spec[static_cast<size_t>(t)].resize(static_cast<size_t>(bins));
    for (int k = 0; k < bins; ++k) {
      double m = std::exp(log_magnitude.at(t, k)) - cfg.log_eps;
      m = std::max(m, 0.0);
      if (cfg.magnitude_power != 1.0) m = std::pow(m, cfg.magnitude_power);
      target[static_cast<size_t>(t)][static_cast<size_t>(k)] = m;
      spec[static_cast<size_t>(t)][static_cast<size_t>(k)] = m;  // zero phase
    }
  }

  int64_t n_samples = (s - 1) * stft.hop_length();
  if (n_samples <= 0) n_samples = stft.hop_length();
  std::vector<double> y;
  if (convergence_trace) convergence_trace->clear();
  for (int it = 0; it < iterations; ++it) {
    y = stft.inverse(spec, n_samples);
    auto est = stft.forward(y);
    double num = 0.0, den = 0.0;
    for (int64_t t = 0; t < s && t < static_cast<int64_t>(est.size()); ++t)
      for (int k = 0; k < bins; ++k) {
        std::complex<double> e =
            est[static_cast<size_t>(t)][static_cast<size_t>(k)];
        double mag = std::abs(e);
        double want = target[static_cast<size_t>(t)][static_cast<size_t>(k)];
        if (convergence_trace) {
          num += (mag - want) * (mag - want);
          den += want * want;
        }
        std::complex<double> phase =
            mag > 1e-12 ? e / mag : std::complex<double>(1.0, 0.0);
        spec[static_cast<size_t>(t)][static_cast<size_t>(k)] = want * phase;
      }
    if (convergence_trace)
      convergence_trace->push_back(den > 0.0 ? std::sqrt(num / den) : 0.0);
  }
  y = stft.inverse(spec, n_samples);

  Waveform out;
  out.sample_rate = cfg.sample_rate;
  out.samples = std::move(y);
  return deemphasis(out, cfg.preemphasis);
}

// Relative Frobenius distance between |STFT(y)| and a target magnitude.
inline double spectral_convergence(const std::vector<double>& y,
                                   const FeatureSequence& log_magnitude,
                                   const DspConfig& cfg) {
  Stft stft(cfg);
  auto est = stft.forward(y);
  double num = 0.0, den = 0.0;
  int bins = cfg.n_bins();
  for (int64_t t = 0; t < log_magnitude.s; ++t)
    for (int k = 0; k < bins; ++k) {
      double m = std::max(std::exp(log_magnitude.at(t, k)) - cfg.log_eps, 0.0);
      double e = t < static_cast<int64_t>(est.size())
                     ? std::abs(est[static_cast<size_t>(t)]
                                   [static_cast<size_t>(k)])
                     : 0.0;
      num += (e - m) * (e - m);
      den += m * m;
    }
  return den > 0.0 ? std::sqrt(num / den) : 0.0;
}

// --- Feature file I/O ----------------------------------------------------------------

constexpr char kFeatureMagic[8] = {'S', 'P', 'C', 'H', 'F', 'E', 'A', 'T'};
constexpr uint32_t kFeatureVersion = 1;

namespace detail {

inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

inline uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError("feature file truncated at " + what);
  uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

inline uint64_t get_u64(std::istream& is, const std::string& what) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8))
    throw DataError("feature file truncated at " + what);
  uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

}  // namespace detail

inline void save_features(const FeatureSequence& f, const std::string& path,
                          const DspConfig& cfg) {
  if (f.normalized)
    throw DataError("feature files store raw features; denormalize first");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write feature file: " + path);
  os.write(kFeatureMagic, sizeof(kFeatureMagic));
  detail::put_u32(os, kFeatureVersion);
  detail::put_u32(os, f.kind == FeatureSequence::Kind::LogMel ? 0u : 1u);
  detail::put_u64(os, static_cast<uint64_t>(f.s));
  detail::put_u64(os, static_cast<uint64_t>(f.d));
  for (double v : f.frames) {
    uint32_t bits = std::bit_cast<uint32_t>(static_cast<float>(v));
    detail::put_u32(os, bits);
  }
  if (!os) throw DataError("write failed for feature file: " + path);

  std::ofstream meta(path + ".meta");
  meta << "sample_rate " << cfg.sample_rate << "\n"
       << "frame_ms " << cfg.frame_ms << "\n"
       << "shift_ms " << cfg.shift_ms << "\n"
       << "fft_size " << cfg.fft_size << "\n"
       << "preemphasis " << cfg.preemphasis << "\n"
       << "n_mels " << cfg.n_mels << "\n"
       << "log_eps " << cfg.log_eps << "\n";
}

inline FeatureSequence load_features(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open feature file: " + path);
  char magic[8];
  if (!is.read(magic, 8) ||
      !std::equal(magic, magic + 8, kFeatureMagic))
    throw DataError("not a feature file (bad magic): " + path);
  uint32_t version = detail::get_u32(is, "version");
  if (version != kFeatureVersion)
    throw DataError("unsupported feature file version " +
                    std::to_string(version) + ": " + path);
  uint32_t kind = detail::get_u32(is, "kind");
  FeatureSequence f;
  f.kind = kind == 0 ? FeatureSequence::Kind::LogMel
                     : FeatureSequence::Kind::LogMagnitude;
  f.s = static_cast<int64_t>(detail::get_u64(is, "frames"));
  f.d = static_cast<int64_t>(detail::get_u64(is, "dims"));
  f.normalized = false;
  f.frames.resize(static_cast<size_t>(f.s * f.d));
  for (auto& v : f.frames)
    v = static_cast<double>(
        std::bit_cast<float>(detail::get_u32(is, "value")));
  return f;
}

}  // namespace dsp
}  // namespace speechchain

#endif  // SPEECHCHAIN_DSP_HPP
