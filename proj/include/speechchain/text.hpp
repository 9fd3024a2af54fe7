// speechchain/text.hpp
//
// Character vocabulary (35 symbols), text normalization, and token
// encoding/decoding with start/end sentinels.

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

#ifndef SPEECHCHAIN_TEXT_HPP
#define SPEECHCHAIN_TEXT_HPP

#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "speechchain/errors.hpp"

namespace speechchain {
namespace text {

// Symbol order is fixed for checkpoint stability:
// specials first, then letters, then punctuation.
constexpr int64_t kBos = 0;    // <s>
constexpr int64_t kEos = 1;    // </s>
constexpr int64_t kSpace = 2;  // <spc>
constexpr int64_t kVocabSize = 35;

inline const std::vector<std::string>& symbols() {
  static const std::vector<std::string> syms = [] {
    std::vector<std::string> v = {"<s>", "</s>", "<spc>"};
    for (char c = 'a'; c <= 'z'; ++c) v.emplace_back(1, c);
    for (char c : {',', ':', '\'', '?', '.', '-'}) v.emplace_back(1, c);
    return v;
  }();
  return syms;
}

// Maps a single displayable character to its id; -1 if out of vocabulary.
inline int64_t char_to_id(char c) {
  static const std::unordered_map<char, int64_t> map = [] {
    std::unordered_map<char, int64_t> m;
    const auto& syms = symbols();
    for (size_t i = 0; i < syms.size(); ++i)
      if (syms[i].size() == 1) m[syms[i][0]] = static_cast<int64_t>(i);
    m[' '] = kSpace;
    return m;
  }();
  auto it = map.find(c);
  return it == map.end() ? -1 : it->second;
}

struct TokenSequence {
  std::vector<int64_t> ids;  // leading <s>, trailing </s>

  // Targets the decoder must predict: y_1..y_T, i.e. everything after <s>.
  int64_t target_length() const {
    return static_cast<int64_t>(ids.size()) - 1;
  }
};

// Lowercase, map double quotes to apostrophes, drop unmappable characters
// (counted), collapse runs of whitespace, trim ends.
inline std::string normalize_text(const std::string& raw,
                                  int* dropped_count = nullptr) {
  std::string out;
  out.reserve(raw.size());
  int dropped = 0;
  bool pending_space = false;
  for (char raw_c : raw) {
    char c = static_cast<char>(
        std::tolower(static_cast<unsigned char>(raw_c)));
    if (c == '"') c = '\'';
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = true;
      continue;
    }
    if (char_to_id(c) < 0 || c == ' ') {
      ++dropped;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(c);
  }
  if (dropped_count) *dropped_count = dropped;
  if (out.empty())
    throw DataError("text normalization produced an empty string from: \"" +
                    raw + "\"");
  return out;
}

inline TokenSequence encode(const std::string& normalized) {
  TokenSequence seq;
  seq.ids.reserve(normalized.size() + 2);
  seq.ids.push_back(kBos);
  for (char c : normalized) {
    int64_t id = char_to_id(c);
    if (id < 0)
      throw DataError(std::string("encode: character '") + c +
                      "' is outside the vocabulary (text not normalized?)");
    seq.ids.push_back(id);
  }
  seq.ids.push_back(kEos);
  return seq;
}

// Sentinels are skipped wherever they appear so that raw decoder output is
// also renderable.
inline std::string decode(const std::vector<int64_t>& ids) {
  std::string out;
  for (int64_t id : ids) {
    if (id < 0 || id >= kVocabSize)
      throw DataError("decode: token id " + std::to_string(id) +
                      " outside vocabulary of " + std::to_string(kVocabSize));
    if (id == kBos || id == kEos) continue;
    if (id == kSpace) {
      out.push_back(' ');
      continue;
    }
    out += symbols()[static_cast<size_t>(id)];
  }
  return out;
}

inline std::string decode(const TokenSequence& seq) { return decode(seq.ids); }

inline void write_vocab(const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write vocabulary file: " + path);
  for (size_t i = 0; i < symbols().size(); ++i)
    os << i << '\t' << symbols()[i] << "\n";
}

}  // namespace text
}  // namespace speechchain

#endif  // SPEECHCHAIN_TEXT_HPP
