// speechchain/wav.hpp
//
// Minimal 16-bit PCM mono WAV reader/writer.

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

#ifndef SPEECHCHAIN_WAV_HPP
#define SPEECHCHAIN_WAV_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "speechchain/errors.hpp"

namespace speechchain {

struct Waveform {
  std::vector<double> samples;  // nominally in [-1, 1]
  int sample_rate = 16000;
};

namespace wav_detail {

inline void put_u16(std::ostream& os, uint16_t v) {
  char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

inline uint32_t get_u32(std::istream& is, const std::string& what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4))
    throw DataError("wav: truncated while reading " + what);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

inline uint16_t get_u16(std::istream& is, const std::string& what) {
  unsigned char b[2];
  if (!is.read(reinterpret_cast<char*>(b), 2))
    throw DataError("wav: truncated while reading " + what);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

}  // namespace wav_detail

inline void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("wav: cannot open for writing: " + path);
  uint32_t n = static_cast<uint32_t>(w.samples.size());
  uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  wav_detail::put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  wav_detail::put_u32(os, 16);
  wav_detail::put_u16(os, 1);  // PCM
  wav_detail::put_u16(os, 1);  // mono
  wav_detail::put_u32(os, static_cast<uint32_t>(w.sample_rate));
  wav_detail::put_u32(os, static_cast<uint32_t>(w.sample_rate) * 2);
  wav_detail::put_u16(os, 2);   // block align
  wav_detail::put_u16(os, 16);  // bits per sample
  os.write("data", 4);
  wav_detail::put_u32(os, data_bytes);
  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    auto q = static_cast<int16_t>(std::lround(c * 32767.0));
    wav_detail::put_u16(os, static_cast<uint16_t>(q));
  }
  if (!os) throw DataError("wav: write failed: " + path);
}

inline Waveform read_wav(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("wav: cannot open: " + path);
  char tag[4];
  if (!is.read(tag, 4) || std::string(tag, 4) != "RIFF")
    throw DataError("wav: not a RIFF file: " + path);
  wav_detail::get_u32(is, "riff size");
  if (!is.read(tag, 4) || std::string(tag, 4) != "WAVE")
    throw DataError("wav: not a WAVE file: " + path);

  Waveform w;
  uint16_t channels = 0, bits = 0, format = 0;
  bool have_fmt = false;
  while (is.read(tag, 4)) {
    uint32_t chunk_size = wav_detail::get_u32(is, "chunk size");
    std::string id(tag, 4);
    if (id == "fmt ") {
      format = wav_detail::get_u16(is, "format");
      channels = wav_detail::get_u16(is, "channels");
      w.sample_rate = static_cast<int>(wav_detail::get_u32(is, "rate"));
      wav_detail::get_u32(is, "byte rate");
      wav_detail::get_u16(is, "block align");
      bits = wav_detail::get_u16(is, "bits");
      if (chunk_size > 16) is.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DataError("wav: data before fmt chunk: " + path);
      if (format != 1 || channels != 1 || bits != 16)
        throw DataError(
            "wav: only 16-bit PCM mono is supported (format " +
            std::to_string(format) + ", " + std::to_string(channels) +
            " ch, " + std::to_string(bits) + " bit): " + path);
      uint32_t count = chunk_size / 2;
      w.samples.resize(count);
      for (uint32_t i = 0; i < count; ++i) {
        auto q = static_cast<int16_t>(wav_detail::get_u16(is, "sample"));
        w.samples[i] = static_cast<double>(q) / 32768.0;
      }
      return w;
    } else {
      // Skip unknown chunks (pad byte for odd sizes).
      is.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  throw DataError("wav: no data chunk found: " + path);
}

}  // namespace speechchain

#endif  // SPEECHCHAIN_WAV_HPP
