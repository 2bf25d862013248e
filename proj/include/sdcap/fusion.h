#pragma once

#include <span>
#include <string>
#include <vector>

#include "sdcap/layers.h"
#include "sdcap/tensor.h"

namespace sdcap {

namespace fusion_params {
inline const std::string kLstm = "fusion_lstm.";
inline const std::string kH0 = "fusion_lstm.h0";
inline const std::string kC0 = "fusion_lstm.c0";
}  // namespace fusion_params

// Per-timestep blend weights alpha_k = sigmoid(h_k), where h_k is the scalar
// hidden state of an LSTM that reads the image embedding at every step.
class Fusion {
 public:
  static std::vector<ParamSpec> param_spec(std::size_t embedding_size);

  explicit Fusion(ParamStore& store);

  std::size_t embedding_size() const { return lstm_.input_size(); }

  // Every entry lies strictly inside (0, 1).
  Vec adaptive_weights(std::span<const double> embedding, std::size_t steps) const;

  struct Trace {
    Vec embedding;
    std::vector<LstmStepRecord> steps;
    Vec alphas;
  };
  Trace forward_train(std::span<const double> embedding, std::size_t steps) const;

  // dalpha[k] = dL/d alpha_k. Accumulates parameter grads and returns
  // dL/d(embedding), summed over all steps.
  Vec backward(const Trace& trace, std::span<const double> dalpha) const;

 private:
  Lstm lstm_;
  Param* h0_;
  Param* c0_;
};

// alpha * pc + (1 - alpha) * ps, with a null pointer standing for a
// zero-padded step. No renormalization.
Vec mix_unnormalized(const Vec* pc, const Vec* ps, double alpha, std::size_t vocab_size);

// Blends two distribution streams step by step. The shorter stream is
// zero-padded, and every blended vector is renormalized to sum to 1, so a
// padded step reproduces the other stream exactly. alphas must have
// max(|pc|, |ps|) entries. Throws DimensionError on vocabulary mismatch.
DistSeq blend(const DistSeq& pc, const DistSeq& ps, std::span<const double> alphas);

struct PaddingCount {
  std::size_t padded = 0;
  std::size_t total = 0;

  double rate() const { return total ? static_cast<double>(padded) / total : 0.0; }
  PaddingCount& operator+=(const PaddingCount& o) {
    padded += o.padded;
    total += o.total;
    return *this;
  }
};

PaddingCount padding_count(std::size_t len_c, std::size_t len_s);

// Fraction of blended timesteps at which one side was zero-padded.
double padding_rate(const DistSeq& pc, const DistSeq& ps);

}  // namespace sdcap
