// speechchain/search.hpp
//
// Greedy and beam-search decoding over an abstract autoregressive stepper.
// The stepper owns all model state behind std::any, so the same search code
// drives the full recognizer and small hand-built distributions in tests.

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

#ifndef SPEECHCHAIN_SEARCH_HPP
#define SPEECHCHAIN_SEARCH_HPP

#include <algorithm>
#include <any>
#include <cstdint>
#include <functional>
#include <vector>

#include "speechchain/errors.hpp"

namespace speechchain {
namespace search {

// A state encapsulates everything after consuming some token prefix; the
// log-prob row it exposes is the distribution of the NEXT token.
struct Stepper {
  std::function<std::any()> initial;  // state after consuming the start token
  std::function<std::vector<double>(const std::any&)> log_probs;
  std::function<std::any(const std::any&, int64_t)> advance;
  int64_t num_classes = 0;
  int64_t bos_id = 0;
  int64_t eos_id = 1;
};

struct DecodeResult {
  std::vector<int64_t> ids;  // includes the start token; ends with the end
                             // token if the decode terminated on it
  std::vector<double> token_log_probs;  // one per emitted token
  double total_log_prob = 0.0;
  bool reached_eos = false;
};

// Argmax token each step (ties -> lower id); stops at the end token or after
// max_len emitted tokens.
inline DecodeResult greedy(const Stepper& stepper, int64_t max_len) {
  DecodeResult out;
  out.ids.push_back(stepper.bos_id);
  std::any state = stepper.initial();
  for (int64_t t = 0; t < max_len; ++t) {
    std::vector<double> row = stepper.log_probs(state);
    int64_t best = 0;
    for (int64_t c = 1; c < static_cast<int64_t>(row.size()); ++c)
      if (row[static_cast<size_t>(c)] > row[static_cast<size_t>(best)])
        best = c;
    out.ids.push_back(best);
    out.token_log_probs.push_back(row[static_cast<size_t>(best)]);
    out.total_log_prob += row[static_cast<size_t>(best)];
    if (best == stepper.eos_id) {
      out.reached_eos = true;
      break;
    }
    state = stepper.advance(state, best);
  }
  return out;
}

// Beam search over raw summed log-probs (no length normalization). Finished
// hypotheses move to a pool and are never extended; at most beam_size * C
// candidates are scored per step. The greedy hypothesis is placed in the
// pool up front, so the result is never worse than greedy.
inline DecodeResult beam(const Stepper& stepper, int beam_size,
                         int64_t max_len) {
  if (beam_size < 1)
    throw ConfigError("beam search requires beam size >= 1, got " +
                      std::to_string(beam_size));

  struct Hyp {
    std::vector<int64_t> ids;
    std::vector<double> token_log_probs;
    double score = 0.0;
    std::any state;
    bool reached_eos = false;
  };

  auto to_result = [](const Hyp& h) {
    DecodeResult r;
    r.ids = h.ids;
    r.token_log_probs = h.token_log_probs;
    r.total_log_prob = h.score;
    r.reached_eos = h.reached_eos;
    return r;
  };

  std::vector<Hyp> pool;
  {
    DecodeResult g = greedy(stepper, max_len);
    Hyp seed;
    seed.ids = g.ids;
    seed.token_log_probs = g.token_log_probs;
    seed.score = g.total_log_prob;
    seed.reached_eos = g.reached_eos;
    pool.push_back(std::move(seed));
  }

  std::vector<Hyp> active;
  {
    Hyp root;
    root.ids.push_back(stepper.bos_id);
    root.state = stepper.initial();
    active.push_back(std::move(root));
  }

  for (int64_t t = 0; t < max_len && !active.empty(); ++t) {
    struct Cand {
      double score;
      size_t parent;
      int64_t token;
      double token_log_prob;
    };
    std::vector<Cand> cands;
    cands.reserve(active.size() * static_cast<size_t>(stepper.num_classes));
    for (size_t i = 0; i < active.size(); ++i) {
      std::vector<double> row = stepper.log_probs(active[i].state);
      for (int64_t c = 0; c < static_cast<int64_t>(row.size()); ++c)
        cands.push_back({active[i].score + row[static_cast<size_t>(c)], i, c,
                         row[static_cast<size_t>(c)]});
    }
    // Deterministic order: best score first; ties prefer the lower token id,
    // then the earlier parent.
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });
    if (cands.size() > static_cast<size_t>(beam_size))
      cands.resize(static_cast<size_t>(beam_size));

    std::vector<Hyp> next;
    for (const Cand& c : cands) {
      Hyp h;
      h.ids = active[c.parent].ids;
      h.ids.push_back(c.token);
      h.token_log_probs = active[c.parent].token_log_probs;
      h.token_log_probs.push_back(c.token_log_prob);
      h.score = c.score;
      if (c.token == stepper.eos_id) {
        h.reached_eos = true;
        pool.push_back(std::move(h));
      } else if (t + 1 < max_len) {
        h.state = stepper.advance(active[c.parent].state, c.token);
        next.push_back(std::move(h));
      } else {
        pool.push_back(std::move(h));  // out of budget, keep for comparison
      }
    }
    active = std::move(next);
  }

  size_t best = 0;
  for (size_t i = 1; i < pool.size(); ++i)
    if (pool[i].score > pool[best].score) best = i;
  return to_result(pool[best]);
}

}  // namespace search
}  // namespace speechchain

#endif  // SPEECHCHAIN_SEARCH_HPP
