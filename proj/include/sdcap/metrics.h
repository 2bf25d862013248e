#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sdcap::metrics {

using Words = std::vector<std::string>;

struct EvalPair {
  Words candidate;
  std::vector<Words> references;
};

struct MetricConfig {
  std::size_t bleu_max_n = 4;
  // Empty means uniform 1/N for BLEU-N.
  std::vector<double> bleu_weights;
  double rouge_beta = 1.2;
  std::size_t cider_max_n = 4;
};

// Throws ConfigError on invalid weights or sizes.
void validate(const MetricConfig& cfg);

// Sentence BLEU-n: brevity penalty times the weighted geometric mean of
// clipped n-gram precisions for n = 1..max_n. The reference length is the one
// closest to the candidate (ties: shorter). Zero if any precision is zero.
double bleu(const EvalPair& pair, std::size_t max_n, std::span<const double> weights = {});
double bleu(const EvalPair& pair, const MetricConfig& cfg);

// Corpus BLEU-n: clipped counts and lengths are summed over the corpus first.
double corpus_bleu(std::span<const EvalPair> pairs, std::size_t max_n,
                   std::span<const double> weights = {});

// exp(1 - ref_len / cand_len) when cand_len <= ref_len, else 1.
double brevity_penalty(std::size_t cand_len, std::size_t ref_len);

struct Alignment {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Exact-match unigram alignment with the most matches and, among those, the
// fewest chunks. Exhaustive for sequences up to kMeteorExhaustiveLimit
// tokens, greedy left-to-right beyond.
inline constexpr std::size_t kMeteorExhaustiveLimit = 20;
Alignment align(const Words& candidate, const Words& reference);

// F = 10PR / (R + 9P), score = F * (1 - 0.5 * chunks / matches), best over
// references.
double meteor(const EvalPair& pair);

std::size_t lcs_length(const Words& a, const Words& b);
// LCS-based F-measure with recall weighted by beta^2; best over references.
double rouge_l(const EvalPair& pair, double beta = 1.2);

struct CiderResult {
  std::vector<double> per_pair;
  double mean = 0.0;
};

// TF-IDF n-gram cosine consensus, without the 10x scale used by some public
// tools. Needs at least two pairs to define document frequencies.
CiderResult cider(std::span<const EvalPair> corpus, std::size_t max_n = 4);

struct Report {
  double bleu[4] = {0, 0, 0, 0};           // corpus-level BLEU-1..4
  double bleu_sentence[4] = {0, 0, 0, 0};  // mean sentence BLEU-1..4
  double meteor = 0.0;
  double rouge_l = 0.0;
  std::optional<double> cider;  // undefined for a single pair
  std::size_t pairs = 0;
};

// Corpus means of every metric.
Report evaluate_corpus(std::span<const EvalPair> pairs, const MetricConfig& cfg = {});

}  // namespace sdcap::metrics
