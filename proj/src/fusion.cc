#include "sdcap/fusion.h"

#include <algorithm>

#include "sdcap/error.h"

namespace sdcap {

namespace fp = fusion_params;

std::vector<ParamSpec> Fusion::param_spec(std::size_t embedding_size) {
  std::vector<ParamSpec> spec;
  Lstm::declare(spec, fp::kLstm, embedding_size, 1);
  spec.push_back({fp::kH0, {1}});
  spec.push_back({fp::kC0, {1}});
  return spec;
}

Fusion::Fusion(ParamStore& store)
    : lstm_(store, fp::kLstm), h0_(&store.get(fp::kH0)), c0_(&store.get(fp::kC0)) {
  if (lstm_.hidden_size() != 1) throw DimensionError("fusion LSTM must have hidden size 1");
}

Vec Fusion::adaptive_weights(std::span<const double> embedding, std::size_t steps) const {
  return forward_train(embedding, steps).alphas;
}

Fusion::Trace Fusion::forward_train(std::span<const double> embedding,
                                    std::size_t steps) const {
  if (steps == 0) throw UsageError("adaptive_weights: steps must be at least 1");
  Trace t;
  t.embedding.assign(embedding.begin(), embedding.end());
  t.steps.resize(steps);
  t.alphas.resize(steps);
  LstmState state{Vec{h0_->value[0]}, Vec{c0_->value[0]}};
  for (std::size_t k = 0; k < steps; ++k) {
    state = lstm_.step(embedding, state, &t.steps[k]);
    t.alphas[k] = kernels::sigmoid(state.h[0]);
  }
  return t;
}

Vec Fusion::backward(const Trace& trace, std::span<const double> dalpha) const {
  if (trace.steps.empty() || !trace.steps.front().valid) {
    throw UsageError("fusion backward without a recorded forward pass");
  }
  if (dalpha.size() != trace.alphas.size()) throw DimensionError("fusion backward: size mismatch");
  Vec de(trace.embedding.size(), 0.0);
  LstmState carry{Vec{0.0}, Vec{0.0}};
  LstmState dprev;
  for (std::size_t k = trace.steps.size(); k-- > 0;) {
    const double a = trace.alphas[k];
    const Vec dh{carry.h[0] + dalpha[k] * a * (1.0 - a)};
    lstm_.backward(trace.steps[k], dh, carry.c, de, dprev);
    carry = std::move(dprev);
  }
  h0_->grad[0] += carry.h[0];
  c0_->grad[0] += carry.c[0];
  return de;
}

Vec mix_unnormalized(const Vec* pc, const Vec* ps, double alpha, std::size_t vocab_size) {
  Vec out(vocab_size, 0.0);
  if (pc) kernels::axpy(alpha, *pc, out);
  if (ps) kernels::axpy(1.0 - alpha, *ps, out);
  return out;
}

DistSeq blend(const DistSeq& pc, const DistSeq& ps, std::span<const double> alphas) {
  const std::size_t steps = std::max(pc.size(), ps.size());
  if (alphas.size() != steps) {
    throw DimensionError("blend: " + std::to_string(alphas.size()) + " weights for " +
                         std::to_string(steps) + " steps");
  }
  std::size_t vocab = 0;
  for (const auto* seq : {&pc, &ps}) {
    for (const auto& d : *seq) {
      if (vocab == 0) vocab = d.size();
      if (d.size() != vocab) throw DimensionError("blend: vocabulary size mismatch");
    }
  }
  DistSeq out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const Vec* c = k < pc.size() ? &pc[k] : nullptr;
    const Vec* s = k < ps.size() ? &ps[k] : nullptr;
    Vec p = mix_unnormalized(c, s, alphas[k], vocab);
    double sum = 0.0;
    for (double v : p) sum += v;
    if (sum > 0.0) {
      for (double& v : p) v /= sum;
    } else {
      // alpha hit the boundary on a padded step; fall back to the live stream.
      p = c ? *c : *s;
    }
    out.push_back(std::move(p));
  }
  return out;
}

PaddingCount padding_count(std::size_t len_c, std::size_t len_s) {
  return {len_c > len_s ? len_c - len_s : len_s - len_c, std::max(len_c, len_s)};
}

double padding_rate(const DistSeq& pc, const DistSeq& ps) {
  return padding_count(pc.size(), ps.size()).rate();
}

}  // namespace sdcap
