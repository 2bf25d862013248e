#include "sdcap/metrics.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include "sdcap/error.h"

namespace sdcap::metrics {

namespace {

using Gram = std::vector<std::string>;
using GramCounts = std::map<Gram, std::size_t>;

GramCounts ngrams(const Words& words, std::size_t n) {
  GramCounts out;
  if (words.size() < n) return out;
  for (std::size_t i = 0; i + n <= words.size(); ++i) {
    ++out[Gram(words.begin() + static_cast<std::ptrdiff_t>(i),
               words.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

std::size_t closest_ref_len(std::size_t cand_len, const std::vector<Words>& refs) {
  std::size_t best = refs.front().size();
  for (const auto& r : refs) {
    const auto d = [&](std::size_t l) { return l > cand_len ? l - cand_len : cand_len - l; };
    if (d(r.size()) < d(best) || (d(r.size()) == d(best) && r.size() < best)) best = r.size();
  }
  return best;
}

// (clipped matches, candidate n-gram total)
std::pair<std::size_t, std::size_t> clipped_counts(const EvalPair& pair, std::size_t n) {
  const GramCounts cand = ngrams(pair.candidate, n);
  std::vector<GramCounts> refs;
  for (const auto& r : pair.references) refs.push_back(ngrams(r, n));
  std::size_t clipped = 0;
  std::size_t total = 0;
  for (const auto& [g, c] : cand) {
    std::size_t max_ref = 0;
    for (const auto& rc : refs) {
      auto it = rc.find(g);
      if (it != rc.end()) max_ref = std::max(max_ref, it->second);
    }
    clipped += std::min(c, max_ref);
    total += c;
  }
  return {clipped, total};
}

std::vector<double> resolve_weights(std::size_t max_n, std::span<const double> weights) {
  if (max_n == 0) throw ConfigError("BLEU order must be at least 1");
  if (weights.empty()) return std::vector<double>(max_n, 1.0 / static_cast<double>(max_n));
  if (weights.size() != max_n) throw ConfigError("BLEU weights must have one entry per order");
  double sum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw ConfigError("BLEU weights must be nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("BLEU weights must sum to 1");
  return {weights.begin(), weights.end()};
}

double combine_bleu(const std::vector<std::pair<std::size_t, std::size_t>>& stats,
                    const std::vector<double>& weights, std::size_t cand_len,
                    std::size_t ref_len) {
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 0; k < stats.size(); ++k) {
    const auto [clipped, total] = stats[k];
    if (clipped == 0 || total == 0) return 0.0;
    log_sum += weights[k] * std::log(static_cast<double>(clipped) / static_cast<double>(total));
  }
  return brevity_penalty(cand_len, ref_len) * std::exp(log_sum);
}

void check_pair(const EvalPair& pair) {
  if (pair.references.empty()) throw ConfigError("evaluation pair has no references");
}

std::size_t count_chunks(const std::vector<std::pair<std::size_t, std::size_t>>& matched) {
  std::size_t chunks = 0;
  for (std::size_t k = 0; k < matched.size(); ++k) {
    if (k == 0 || matched[k].first != matched[k - 1].first + 1 ||
        matched[k].second != matched[k - 1].second + 1) {
      ++chunks;
    }
  }
  return chunks;
}

std::size_t max_matches(const Words& a, const Words& b) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
  for (const auto& w : a) ++counts[w].first;
  for (const auto& w : b) ++counts[w].second;
  std::size_t m = 0;
  for (const auto& [_, c] : counts) m += std::min(c.first, c.second);
  return m;
}

// Minimum chunks over all alignments with `target` matches. State: next
// candidate position, used reference positions, and the reference position
// matched by the previous candidate word (or none).
class ChunkSearch {
 public:
  ChunkSearch(const Words& cand, const Words& ref, std::size_t target)
      : cand_(cand), ref_(ref), target_(target) {}

  std::size_t run() { return solve(0, 0, kNone); }

 private:
  static constexpr std::size_t kNone = 31;
  static constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 2;

  std::size_t reachable(std::size_t i, std::uint32_t mask) const {
    std::map<std::string, std::pair<std::size_t, std::size_t>> counts;
    for (std::size_t k = i; k < cand_.size(); ++k) ++counts[cand_[k]].first;
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if (!(mask >> j & 1u)) {
        auto it = counts.find(ref_[j]);
        if (it != counts.end()) ++it->second.second;
      }
    }
    std::size_t m = 0;
    for (const auto& [_, c] : counts) m += std::min(c.first, c.second);
    return m;
  }

  std::size_t solve(std::size_t i, std::uint32_t mask, std::size_t prev) {
    const std::size_t need = target_ - static_cast<std::size_t>(std::popcount(mask));
    if (i == cand_.size()) return need == 0 ? 0 : kInf;
    if (reachable(i, mask) < need) return kInf;
    const std::uint64_t key = (static_cast<std::uint64_t>(mask) << 10) | (i << 5) | prev;
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;

    std::size_t best = solve(i + 1, mask, kNone);
    for (std::size_t j = 0; j < ref_.size(); ++j) {
      if ((mask >> j & 1u) || ref_[j] != cand_[i]) continue;
      const std::size_t cost = (prev != kNone && j == prev + 1) ? 0 : 1;
      best = std::min(best, cost + solve(i + 1, mask | (1u << j), j));
    }
    memo_.emplace(key, best);
    return best;
  }

  const Words& cand_;
  const Words& ref_;
  std::size_t target_;
  std::unordered_map<std::uint64_t, std::size_t> memo_;
};

Alignment greedy_align(const Words& cand, const Words& ref) {
  std::vector<bool> used(ref.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> matched;
  std::size_t prev = ref.size();
  bool prev_matched = false;
  for (std::size_t i = 0; i < cand.size(); ++i) {
    std::size_t pick = ref.size();
    if (prev_matched && prev + 1 < ref.size() && !used[prev + 1] && ref[prev + 1] == cand[i]) {
      pick = prev + 1;
    } else {
      for (std::size_t j = 0; j < ref.size(); ++j) {
        if (!used[j] && ref[j] == cand[i]) {
          pick = j;
          break;
        }
      }
    }
    prev_matched = pick < ref.size();
    if (prev_matched) {
      used[pick] = true;
      matched.emplace_back(i, pick);
      prev = pick;
    }
  }
  return {matched.size(), count_chunks(matched)};
}

}  // namespace

void validate(const MetricConfig& cfg) {
  resolve_weights(cfg.bleu_max_n, cfg.bleu_weights);
  if (!(cfg.rouge_beta > 0.0)) throw ConfigError("ROUGE-L beta must be positive");
  if (cfg.cider_max_n == 0) throw ConfigError("CIDEr order must be at least 1");
}

double brevity_penalty(std::size_t cand_len, std::size_t ref_len) {
  if (cand_len == 0) return 0.0;
  if (cand_len > ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

double bleu(const EvalPair& pair, std::size_t max_n, std::span<const double> weights) {
  check_pair(pair);
  const auto w = resolve_weights(max_n, weights);
  std::vector<std::pair<std::size_t, std::size_t>> stats;
  for (std::size_t n = 1; n <= max_n; ++n) stats.push_back(clipped_counts(pair, n));
  return combine_bleu(stats, w, pair.candidate.size(),
                      closest_ref_len(pair.candidate.size(), pair.references));
}

double bleu(const EvalPair& pair, const MetricConfig& cfg) {
  return bleu(pair, cfg.bleu_max_n, cfg.bleu_weights);
}

double corpus_bleu(std::span<const EvalPair> pairs, std::size_t max_n,
                   std::span<const double> weights) {
  if (pairs.empty()) throw ConfigError("corpus BLEU of an empty corpus");
  const auto w = resolve_weights(max_n, weights);
  std::vector<std::pair<std::size_t, std::size_t>> stats(max_n, {0, 0});
  std::size_t cand_len = 0;
  std::size_t ref_len = 0;
  for (const auto& p : pairs) {
    check_pair(p);
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto [c, t] = clipped_counts(p, n);
      stats[n - 1].first += c;
      stats[n - 1].second += t;
    }
    cand_len += p.candidate.size();
    ref_len += closest_ref_len(p.candidate.size(), p.references);
  }
  return combine_bleu(stats, w, cand_len, ref_len);
}

Alignment align(const Words& candidate, const Words& reference) {
  const std::size_t m = max_matches(candidate, reference);
  if (m == 0) return {0, 0};
  if (candidate.size() > kMeteorExhaustiveLimit || reference.size() > kMeteorExhaustiveLimit) {
    return greedy_align(candidate, reference);
  }
  return {m, ChunkSearch(candidate, reference, m).run()};
}

double meteor(const EvalPair& pair) {
  check_pair(pair);
  double best = 0.0;
  for (const auto& ref : pair.references) {
    if (pair.candidate.empty() || ref.empty()) continue;
    const Alignment a = align(pair.candidate, ref);
    if (a.matches == 0) continue;
    const double p = static_cast<double>(a.matches) / static_cast<double>(pair.candidate.size());
    const double r = static_cast<double>(a.matches) / static_cast<double>(ref.size());
    const double f = 10.0 * p * r / (r + 9.0 * p);
    const double score =
        f * (1.0 - 0.5 * static_cast<double>(a.chunks) / static_cast<double>(a.matches));
    best = std::max(best, score);
  }
  return best;
}

std::size_t lcs_length(const Words& a, const Words& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const EvalPair& pair, double beta) {
  check_pair(pair);
  double best = 0.0;
  const double b2 = beta * beta;
  for (const auto& ref : pair.references) {
    const std::size_t l = lcs_length(pair.candidate, ref);
    if (l == 0) continue;
    const double r = static_cast<double>(l) / static_cast<double>(ref.size());
    const double p = static_cast<double>(l) / static_cast<double>(pair.candidate.size());
    best = std::max(best, (1.0 + b2) * r * p / (r + b2 * p));
  }
  return best;
}

CiderResult cider(std::span<const EvalPair> corpus, std::size_t max_n) {
  if (corpus.size() < 2) throw ConfigError("CIDEr needs a corpus of at least two pairs");
  if (max_n == 0) throw ConfigError("CIDEr order must be at least 1");
  const double m = static_cast<double>(corpus.size());

  // Document frequency: number of items whose reference set contains the gram.
  std::vector<std::map<Gram, std::size_t>> df(max_n + 1);
  for (const auto& p : corpus) {
    check_pair(p);
    for (std::size_t n = 1; n <= max_n; ++n) {
      std::set<Gram> seen;
      for (const auto& r : p.references) {
        for (const auto& [g, _] : ngrams(r, n)) seen.insert(g);
      }
      for (const auto& g : seen) ++df[n][g];
    }
  }

  auto tfidf = [&](const Words& words, std::size_t n) {
    std::map<Gram, double> v;
    for (const auto& [g, c] : ngrams(words, n)) {
      auto it = df[n].find(g);
      const double d = it == df[n].end() ? 1.0 : static_cast<double>(std::max<std::size_t>(1, it->second));
      v[g] = static_cast<double>(c) * std::log(m / d);
    }
    return v;
  };
  auto cosine = [](const std::map<Gram, double>& a, const std::map<Gram, double>& b) {
    double na = 0.0, nb = 0.0, d = 0.0;
    for (const auto& [_, x] : a) na += x * x;
    for (const auto& [_, x] : b) nb += x * x;
    if (na == 0.0 || nb == 0.0) return 0.0;
    for (const auto& [g, x] : a) {
      auto it = b.find(g);
      if (it != b.end()) d += x * it->second;
    }
    return d / (std::sqrt(na) * std::sqrt(nb));
  };

  CiderResult out;
  for (const auto& p : corpus) {
    double score = 0.0;
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto gc = tfidf(p.candidate, n);
      double sum = 0.0;
      for (const auto& r : p.references) sum += cosine(gc, tfidf(r, n));
      score += sum / static_cast<double>(p.references.size()) / static_cast<double>(max_n);
    }
    out.per_pair.push_back(score);
  }
  double total = 0.0;
  for (double s : out.per_pair) total += s;
  out.mean = total / m;
  return out;
}

Report evaluate_corpus(std::span<const EvalPair> pairs, const MetricConfig& cfg) {
  if (pairs.empty()) throw ConfigError("cannot evaluate an empty corpus");
  validate(cfg);
  Report rep;
  rep.pairs = pairs.size();
  const double n = static_cast<double>(pairs.size());
  for (std::size_t k = 1; k <= 4; ++k) {
    rep.bleu[k - 1] = corpus_bleu(pairs, k);
    double s = 0.0;
    for (const auto& p : pairs) s += bleu(p, k);
    rep.bleu_sentence[k - 1] = s / n;
  }
  for (const auto& p : pairs) {
    rep.meteor += meteor(p) / n;
    rep.rouge_l += rouge_l(p, cfg.rouge_beta) / n;
  }
  if (pairs.size() >= 2) rep.cider = cider(pairs, cfg.cider_max_n).mean;
  return rep;
}

}  // namespace sdcap::metrics
