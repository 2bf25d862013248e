#include "sdcap/captioner.h"

#include "sdcap/error.h"

namespace sdcap {

namespace cp = captioner_params;

std::vector<ParamSpec> Captioner::param_spec(const CaptionerConfig& cfg) {
  if (cfg.vocab_size <= static_cast<std::size_t>(kNumReserved) || cfg.embedding_size == 0 ||
      cfg.feature_dim == 0) {
    throw ConfigError("captioner needs nonzero feature, embedding and vocabulary sizes");
  }
  const std::size_t W = cfg.embedding_size;
  const std::size_t H = cfg.hidden();
  std::vector<ParamSpec> spec;
  Embedding::declare(spec, cp::kEmbedding, W, cfg.vocab_size);
  Affine::declare(spec, cp::kImageW, cp::kImageB, W, cfg.feature_dim);
  Lstm::declare(spec, cp::kLstm, W, H);
  spec.push_back({cp::kH0, {H}});
  spec.push_back({cp::kC0, {H}});
  WordHead::declare(spec, cp::kHeadW, cp::kHeadB, cfg.vocab_size, H);
  return spec;
}

Captioner::Captioner(ParamStore& store)
    : embedding_(store, cp::kEmbedding),
      image_fc_(store, cp::kImageW, cp::kImageB),
      lstm_(store, cp::kLstm),
      head_(store, cp::kHeadW, cp::kHeadB),
      h0_(&store.get(cp::kH0)),
      c0_(&store.get(cp::kC0)) {
  if (image_fc_.out_size() != embedding_.dim() || lstm_.input_size() != embedding_.dim() ||
      head_.vocab_size() != embedding_.vocab_size() ||
      h0_->value.size() != lstm_.hidden_size() || c0_->value.size() != lstm_.hidden_size()) {
    throw DimensionError("captioner parameters have inconsistent shapes");
  }
}

Vec Captioner::image_embed(std::span<const double> features) const {
  if (features.size() != feature_dim()) {
    throw DimensionError("image features have dimension " + std::to_string(features.size()) +
                         ", model expects " + std::to_string(feature_dim()));
  }
  return image_fc_.forward(features);
}

LstmState Captioner::prime(std::span<const double> embedding, LstmStepRecord* rec) const {
  const auto h0 = h0_->value.data();
  const auto c0 = c0_->value.data();
  LstmState init{Vec(h0.begin(), h0.end()), Vec(c0.begin(), c0.end())};
  return lstm_.step(embedding, init, rec);
}

std::pair<Vec, LstmState> Captioner::step(TokenId prev_word, const LstmState& state) const {
  LstmState next = lstm_.step(embedding_.lookup(prev_word), state);
  Vec dist = head_.forward(next.h);
  return {std::move(dist), std::move(next)};
}

DistSeq Captioner::forward(std::span<const double> embedding,
                           std::span<const TokenId> target) const {
  if (target.empty()) throw DimensionError("caption_forward: empty target");
  if (target.front() != kStart) throw DimensionError("caption_forward: target must begin with START");
  DistSeq out;
  out.reserve(target.size() - 1);
  LstmState state = prime(embedding);
  for (std::size_t k = 0; k + 1 < target.size(); ++k) {
    auto [dist, next] = step(target[k], state);
    out.push_back(std::move(dist));
    state = std::move(next);
  }
  return out;
}

Captioner::Trace Captioner::forward_train(std::span<const double> features,
                                          std::span<const TokenId> target) const {
  if (target.empty()) throw DimensionError("caption_forward: empty target");
  if (target.front() != kStart) throw DimensionError("caption_forward: target must begin with START");
  Trace t;
  t.features.assign(features.begin(), features.end());
  t.embedding = image_embed(features);
  LstmState state = prime(t.embedding, &t.prime);
  const std::size_t n = target.size() - 1;
  t.inputs.assign(target.begin(), target.begin() + static_cast<std::ptrdiff_t>(n));
  t.steps.resize(n);
  t.heads.resize(n);
  t.dists.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    state = lstm_.step(embedding_.lookup(t.inputs[k]), state, &t.steps[k]);
    t.dists.push_back(head_.forward(state.h, &t.heads[k]));
  }
  return t;
}

Vec Captioner::backward(const Trace& trace, const std::vector<Vec>& dprobs) const {
  if (!trace.prime.valid) throw UsageError("captioner backward without a recorded forward pass");
  if (dprobs.size() != trace.steps.size()) {
    throw DimensionError("captioner backward: got " + std::to_string(dprobs.size()) +
                         " gradients for " + std::to_string(trace.steps.size()) + " steps");
  }
  const std::size_t H = lstm_.hidden_size();
  const std::size_t W = embedding_.dim();
  LstmState carry{Vec(H, 0.0), Vec(H, 0.0)};
  LstmState dprev;
  for (std::size_t k = trace.steps.size(); k-- > 0;) {
    Vec dh = carry.h;
    head_.backward(trace.heads[k], dprobs[k], dh);
    Vec du(W, 0.0);
    lstm_.backward(trace.steps[k], dh, carry.c, du, dprev);
    embedding_.backward(trace.inputs[k], du);
    carry = std::move(dprev);
  }
  Vec de(W, 0.0);
  lstm_.backward(trace.prime, carry.h, carry.c, de, dprev);
  kernels::axpy(1.0, dprev.h, h0_->grad.data());
  kernels::axpy(1.0, dprev.c, c0_->grad.data());
  return de;
}

void Captioner::backward_image(const Trace& trace, std::span<const double> dembedding) const {
  image_fc_.backward(trace.features, dembedding, {});
}

}  // namespace sdcap
