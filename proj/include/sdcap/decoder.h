#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "sdcap/error.h"
#include "sdcap/layers.h"
#include "sdcap/vocab.h"

namespace sdcap {

// One decoding step: given the previous token and an opaque state, returns
// the next-token distribution and the successor state.
template <class State>
using StepFn = std::function<std::pair<Vec, State>(TokenId, const State&)>;

inline constexpr std::size_t kDefaultBeam = 4;
inline constexpr std::size_t kDefaultMaxLen = 30;

// Throws ContractError unless dist is a finite, nonnegative vector of
// `vocab_size` entries summing to 1 (within 1e-6).
void check_distribution(const Vec& dist, std::size_t vocab_size);

// Tokens a decoder may emit, in tie-break order: every non-reserved word by
// index, then END. START, PAD and UNK are never emitted, and END wins only
// when it is strictly more probable than every word.
std::vector<TokenId> emit_order(std::size_t vocab_size);

// Argmax decoding. The returned tokens exclude START; the sequence ends with
// END or has exactly max_len tokens. When `dists` is non-null it receives the
// distribution produced at every emitted position.
template <class State>
TokenSeq greedy(const StepFn<State>& step, State state, std::size_t max_len,
                DistSeq* dists = nullptr) {
  TokenSeq out;
  TokenId prev = kStart;
  std::vector<TokenId> order;
  while (out.size() < max_len) {
    auto [dist, next] = step(prev, state);
    if (order.empty()) order = emit_order(dist.size());
    check_distribution(dist, order.size() + 3);
    TokenId best = order.front();
    for (TokenId t : order) {
      if (dist[t] > dist[best]) best = t;
    }
    out.push_back(best);
    if (dists) dists->push_back(std::move(dist));
    state = std::move(next);
    prev = best;
    if (best == kEnd) break;
  }
  return out;
}

struct BeamResult {
  TokenSeq tokens;  // excludes START
  double log_prob = 0.0;
};

// Keeps the `beam` best hypotheses by total log-probability at every step.
// Hypotheses that emit END retire into a completed pool; survivors at
// max_len are retired as-is. Returns the pooled hypothesis with the highest
// total log-probability (no length normalization), ties broken by earlier
// finish, then lexicographically smaller token ids.
template <class State>
BeamResult beam_search(const StepFn<State>& step, State init, std::size_t beam,
                       std::size_t max_len) {
  struct Hyp {
    TokenSeq tokens;
    double log_prob;
    State state;
  };
  if (beam == 0 || max_len == 0) {
    throw ConfigError("beam_search: beam and max_len must be at least 1");
  }

  std::vector<Hyp> live;
  live.push_back({{}, 0.0, std::move(init)});
  std::vector<BeamResult> pool;
  std::vector<TokenId> order;

  auto better = [](const BeamResult& a, const BeamResult& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
  };

  for (std::size_t t = 0; t < max_len && !live.empty(); ++t) {
    struct Cand {
      std::size_t parent;
      TokenId token;
      double log_prob;
    };
    std::vector<Cand> cands;
    std::vector<State> next_states;
    next_states.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const TokenId prev = live[h].tokens.empty() ? kStart : live[h].tokens.back();
      auto [dist, next] = step(prev, live[h].state);
      if (order.empty()) order = emit_order(dist.size());
      check_distribution(dist, order.size() + 3);
      for (TokenId tok : order) {
        cands.push_back({h, tok, live[h].log_prob + std::log(dist[tok])});
      }
      next_states.push_back(std::move(next));
    }
    // Stable: equal scores keep parent order, then emit order.
    std::stable_sort(cands.begin(), cands.end(),
                     [](const Cand& a, const Cand& b) { return a.log_prob > b.log_prob; });
    if (cands.size() > beam) cands.resize(beam);

    std::vector<Hyp> survivors;
    for (const Cand& c : cands) {
      TokenSeq tokens = live[c.parent].tokens;
      tokens.push_back(c.token);
      if (c.token == kEnd) {
        pool.push_back({std::move(tokens), c.log_prob});
      } else {
        survivors.push_back({std::move(tokens), c.log_prob, next_states[c.parent]});
      }
    }
    live = std::move(survivors);

    // Scores only decrease along a path, so no live hypothesis can overtake
    // the best completed one.
    if (!pool.empty() && !live.empty()) {
      const auto best = std::min_element(pool.begin(), pool.end(), better);
      double live_best = -std::numeric_limits<double>::infinity();
      for (const auto& h : live) live_best = std::max(live_best, h.log_prob);
      if (best->log_prob >= live_best) live.clear();
    }
  }
  for (auto& h : live) pool.push_back({std::move(h.tokens), h.log_prob});
  return *std::min_element(pool.begin(), pool.end(), better);
}

}  // namespace sdcap
