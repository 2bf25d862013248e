#pragma once

#include <span>
#include <string>
#include <vector>

#include "sdcap/tensor.h"
#include "sdcap/vocab.h"

namespace sdcap {

// Column lookup into a W x |V| embedding matrix.
class Embedding {
 public:
  static void declare(std::vector<ParamSpec>& spec, const std::string& name,
                      std::size_t dim, std::size_t vocab_size);
  Embedding(ParamStore& store, const std::string& name);

  std::size_t dim() const { return param_->value.rows(); }
  std::size_t vocab_size() const { return param_->value.cols(); }

  Vec lookup(TokenId w) const;
  // Adds du into column w of the gradient.
  void backward(TokenId w, std::span<const double> du) const;

 private:
  void check(TokenId w) const;
  Param* param_;
};

// Returns column w of E. Throws DimensionError if w is out of range.
Vec embed(TokenId w, const Tensor& E);

// y = W x + b.
class Affine {
 public:
  static void declare(std::vector<ParamSpec>& spec, const std::string& weight,
                      const std::string& bias, std::size_t out, std::size_t in);
  Affine(ParamStore& store, const std::string& weight, const std::string& bias);

  std::size_t in_size() const { return w_->value.cols(); }
  std::size_t out_size() const { return w_->value.rows(); }

  Vec forward(std::span<const double> x) const;
  // Accumulates parameter grads; adds W^T dy into dx when dx is nonempty.
  void backward(std::span<const double> x, std::span<const double> dy,
                std::span<double> dx) const;

 private:
  Param* w_;
  Param* b_;
};

struct LstmState {
  Vec h;
  Vec c;
};

// Everything one step needs for its backward pass.
struct LstmStepRecord {
  bool valid = false;
  Vec x, h_prev, c_prev;
  Vec f, i, o, g;  // gate activations; g = tanh(candidate)
  Vec c, tanh_c;
};

// LSTM cell without peepholes:
//   f = sig(W_fu x + U_fh h + b_f), i = sig(...), o = sig(...)
//   c' = f * c + i * tanh(W_cu x + U_ch h + b_c),  h' = o * tanh(c')
class Lstm {
 public:
  static void declare(std::vector<ParamSpec>& spec, const std::string& prefix,
                      std::size_t input, std::size_t hidden);
  Lstm(ParamStore& store, const std::string& prefix);

  std::size_t input_size() const { return gates_[0].w->value.cols(); }
  std::size_t hidden_size() const { return gates_[0].w->value.rows(); }

  LstmState step(std::span<const double> x, const LstmState& prev,
                 LstmStepRecord* rec = nullptr) const;

  // dh and dc are gradients w.r.t. the step's outputs. Accumulates parameter
  // grads, adds the input gradient into dx (if nonempty) and overwrites dprev
  // with the gradients w.r.t. the previous state.
  void backward(const LstmStepRecord& rec, std::span<const double> dh,
                std::span<const double> dc, std::span<double> dx,
                LstmState& dprev) const;

 private:
  struct Gate {
    Param* w;
    Param* u;
    Param* b;
  };
  Gate gates_[4];  // f, i, o, c
};

struct WordHeadRecord {
  bool valid = false;
  Vec h;
  Vec probs;
};

// softmax(W h + b) over the vocabulary.
class WordHead {
 public:
  static void declare(std::vector<ParamSpec>& spec, const std::string& weight,
                      const std::string& bias, std::size_t vocab_size,
                      std::size_t hidden);
  WordHead(ParamStore& store, const std::string& weight, const std::string& bias);

  std::size_t vocab_size() const { return affine_.out_size(); }

  Vec forward(std::span<const double> h, WordHeadRecord* rec = nullptr) const;
  // dprobs is dL/dprobs. Adds dL/dh into dh.
  void backward(const WordHeadRecord& rec, std::span<const double> dprobs,
                std::span<double> dh) const;
  // Same with the gradient already expressed w.r.t. the logits.
  void backward_logits(const WordHeadRecord& rec, std::span<const double> dlogits,
                       std::span<double> dh) const;

 private:
  Affine affine_;
};

Vec word_head(std::span<const double> h, const Tensor& W_ph, const Tensor& b_p);

using DistSeq = std::vector<Vec>;

inline constexpr double kProbFloor = 1e-12;

// -log(max(p, kProbFloor)).
double clamped_nll(double p);

}  // namespace sdcap
