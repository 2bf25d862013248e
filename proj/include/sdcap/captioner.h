#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdcap/layers.h"
#include "sdcap/tensor.h"
#include "sdcap/vocab.h"

namespace sdcap {

// Precomputed descriptor of one image. The extractor that produced it is
// outside this library; no gradient crosses this boundary.
struct ImageFeatures {
  Vec values;
  std::string source_tag;
};

struct CaptionerConfig {
  std::size_t feature_dim = 32;
  std::size_t embedding_size = 512;
  // 0 means "same as embedding_size".
  std::size_t hidden_size = 0;
  std::size_t vocab_size = 0;

  std::size_t hidden() const { return hidden_size ? hidden_size : embedding_size; }
};

// Parameter names owned by the caption generator.
namespace captioner_params {
inline const std::string kEmbedding = "embedding.E";
inline const std::string kImageW = "image_fc.W";
inline const std::string kImageB = "image_fc.b";
inline const std::string kLstm = "caption_lstm.";
inline const std::string kH0 = "caption_lstm.h0";
inline const std::string kC0 = "caption_lstm.c0";
inline const std::string kHeadW = "word_head.W";
inline const std::string kHeadB = "word_head.b";
}  // namespace captioner_params

// Image features -> FC embedding -> LSTM priming step -> one softmax word
// distribution per caption position.
class Captioner {
 public:
  static std::vector<ParamSpec> param_spec(const CaptionerConfig& cfg);

  explicit Captioner(ParamStore& store);

  std::size_t embedding_size() const { return embedding_.dim(); }
  std::size_t vocab_size() const { return head_.vocab_size(); }
  std::size_t feature_dim() const { return image_fc_.in_size(); }

  // Linear map, no activation.
  Vec image_embed(std::span<const double> features) const;

  // Feeds the image embedding from the learned initial state. The output of
  // this step is never scored.
  LstmState prime(std::span<const double> embedding,
                  LstmStepRecord* rec = nullptr) const;

  // One decoding step: consume prev_word, emit the distribution for the next
  // position.
  std::pair<Vec, LstmState> step(TokenId prev_word, const LstmState& state) const;

  // Teacher-forced distributions for target[1..]; target must start with
  // START. Result has target.size() - 1 entries.
  DistSeq forward(std::span<const double> embedding, std::span<const TokenId> target) const;

  struct Trace {
    Vec features;
    Vec embedding;
    LstmStepRecord prime;
    TokenSeq inputs;
    std::vector<LstmStepRecord> steps;
    std::vector<WordHeadRecord> heads;
    DistSeq dists;
  };

  // forward() from raw features, recording everything for backward.
  Trace forward_train(std::span<const double> features,
                      std::span<const TokenId> target) const;

  // dprobs[k] = dL/d dists[k]. Accumulates grads of the LSTM, word head,
  // embedding matrix and initial state, and returns dL/d(image embedding)
  // through the recurrent path. The image FC is not touched; see
  // backward_image().
  Vec backward(const Trace& trace, const std::vector<Vec>& dprobs) const;

  // Pushes dL/d(image embedding) through the image FC.
  void backward_image(const Trace& trace, std::span<const double> dembedding) const;

 private:
  Embedding embedding_;
  Affine image_fc_;
  Lstm lstm_;
  WordHead head_;
  Param* h0_;
  Param* c0_;
};

}  // namespace sdcap
