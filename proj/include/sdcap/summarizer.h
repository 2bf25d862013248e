#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sdcap/layers.h"
#include "sdcap/tensor.h"
#include "sdcap/vocab.h"

namespace sdcap {

// All captions of one image concatenated in order. Each caption keeps its
// START/END markers, so captions are separated by END START.
TokenSeq stack_captions(std::span<const TokenSeq> captions);

// p_gen * vocab_dist + (1 - p_gen) * (attention mass copied onto the source
// tokens). Every source token must be a valid index into vocab_dist.
Vec pointer_mix(double p_gen, std::span<const double> vocab_dist,
                std::span<const double> attn, std::span<const TokenId> source);

struct SummarizerConfig {
  std::size_t vocab_size = 0;
  std::size_t embedding_size = 32;
  std::size_t hidden_size = 64;
  // 0 means "same as hidden_size".
  std::size_t attention_size = 0;

  std::size_t attention() const { return attention_size ? attention_size : hidden_size; }
};

inline const std::string kSummarizerPrefix = "sum.";

struct Summary {
  TokenSeq tokens;  // excludes START; ends with END unless max_len was hit
  DistSeq dists;    // one distribution per emitted token
};

// Pointer-generator sequence-to-sequence model: a forward LSTM encoder, an
// LSTM decoder initialized from the final encoder state, additive attention,
// and a scalar generation gate that mixes the vocabulary softmax with a copy
// distribution over the source tokens. No coverage, no extended vocabulary.
class Summarizer {
 public:
  static std::vector<ParamSpec> param_spec(const SummarizerConfig& cfg);

  explicit Summarizer(ParamStore& store);

  std::size_t vocab_size() const { return embedding_.vocab_size(); }
  std::size_t hidden_size() const { return encoder_.hidden_size(); }

  struct Encoding {
    TokenSeq source;
    std::vector<LstmStepRecord> steps;
    std::vector<Vec> states;  // encoder hidden state per source position
    std::vector<Vec> keys;    // W_h * states[s]
    LstmState final_state;
  };
  Encoding encode(std::span<const TokenId> source) const;

  // Additive attention: softmax_s( v . tanh(W_h enc_s + W_s dec + b) ).
  Vec attend(std::span<const double> dec_state, const std::vector<Vec>& enc_states) const;

  struct StepRecord {
    TokenId input = kStart;
    Vec x;
    LstmStepRecord dec;
    std::vector<Vec> tanh_z;  // per source position
    Vec attn;
    Vec context;
    Vec features;  // [dec_h; context]
    Vec vocab_dist;
    double p_gen = 0.0;
    Vec dist;
  };

  // One decoder step. Returns the mixed distribution and the next decoder
  // state; fills `rec` when non-null.
  std::pair<Vec, LstmState> step(const Encoding& enc, TokenId prev, const LstmState& state,
                                 StepRecord* rec = nullptr) const;

  // Greedy decoding up to END or max_len.
  Summary summarize(std::span<const TokenId> source, std::size_t max_len) const;

  // Teacher-forced NLL of target[1..] given the source (target starts with
  // START). When accumulate is true, the gradient is added into the store.
  double loss(std::span<const TokenId> source, std::span<const TokenId> target,
              bool accumulate) const;

 private:
  Vec attend_keys(std::span<const double> dec_state, const std::vector<Vec>& keys,
                  std::vector<Vec>* tanh_z) const;

  Embedding embedding_;
  Lstm encoder_;
  Lstm decoder_;
  Param* attn_wh_;
  Param* attn_ws_;
  Param* attn_b_;
  Param* attn_v_;
  Param* gen_wc_;
  Param* gen_wd_;
  Param* gen_wx_;
  Param* gen_b_;
  Affine out_;
};

struct SummaryPair {
  TokenSeq source;  // stacked sentences
  TokenSeq target;  // [START, words..., END]
};

struct PretrainConfig {
  std::size_t epochs = 300;
  double lr = 0.3;
  double clip_norm = 5.0;
  std::uint64_t seed = 42;
};

// Plain per-pair SGD on the teacher-forced NLL, pairs visited in a seeded
// shuffled order each epoch. Returns the mean per-token training NLL of every
// epoch. Throws NumericError on a non-finite loss.
std::vector<double> pretrain(Summarizer& model, ParamStore& store,
                             std::span<const SummaryPair> corpus, const PretrainConfig& cfg);

// Fraction of pairs whose greedy summary equals the target exactly.
double exact_match_rate(const Summarizer& model, std::span<const SummaryPair> corpus,
                        std::size_t max_len);

// Convenience: builds a store, initializes it from `seed` and returns it.
ParamStore make_summarizer_store(const SummarizerConfig& cfg, std::uint64_t seed,
                                 double scale = 0.1);

}  // namespace sdcap
