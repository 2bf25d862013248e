#include "sdcap/summarizer.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sdcap/decoder.h"
#include "sdcap/error.h"
#include "sdcap/rng.h"

namespace sdcap {

namespace {

const std::string kE = kSummarizerPrefix + "E";
const std::string kEnc = kSummarizerPrefix + "enc.";
const std::string kDec = kSummarizerPrefix + "dec.";
const std::string kAttnWh = kSummarizerPrefix + "attn.W_h";
const std::string kAttnWs = kSummarizerPrefix + "attn.W_s";
const std::string kAttnB = kSummarizerPrefix + "attn.b";
const std::string kAttnV = kSummarizerPrefix + "attn.v";
const std::string kGenWc = kSummarizerPrefix + "gen.w_c";
const std::string kGenWd = kSummarizerPrefix + "gen.w_d";
const std::string kGenWx = kSummarizerPrefix + "gen.w_x";
const std::string kGenB = kSummarizerPrefix + "gen.b";
const std::string kOutW = kSummarizerPrefix + "out.W";
const std::string kOutB = kSummarizerPrefix + "out.b";

using kernels::axpy;
using kernels::dot;

}  // namespace

TokenSeq stack_captions(std::span<const TokenSeq> captions) {
  if (captions.empty()) throw UsageError("stack_captions: no captions");
  TokenSeq out;
  for (const auto& c : captions) out.insert(out.end(), c.begin(), c.end());
  if (out.empty()) throw UsageError("stack_captions: captions are empty");
  return out;
}

Vec pointer_mix(double p_gen, std::span<const double> vocab_dist,
                std::span<const double> attn, std::span<const TokenId> source) {
  if (attn.size() != source.size()) throw DimensionError("pointer_mix: attention/source mismatch");
  Vec out(vocab_dist.begin(), vocab_dist.end());
  for (double& v : out) v *= p_gen;
  for (std::size_t s = 0; s < source.size(); ++s) {
    const auto w = static_cast<std::size_t>(source[s]);
    if (source[s] < 0 || w >= out.size()) throw DimensionError("pointer_mix: source token out of range");
    out[w] += (1.0 - p_gen) * attn[s];
  }
  return out;
}

std::vector<ParamSpec> Summarizer::param_spec(const SummarizerConfig& cfg) {
  if (cfg.vocab_size <= static_cast<std::size_t>(kNumReserved) || cfg.embedding_size == 0 ||
      cfg.hidden_size == 0) {
    throw ConfigError("summarizer needs nonzero vocabulary, embedding and hidden sizes");
  }
  const std::size_t V = cfg.vocab_size;
  const std::size_t W = cfg.embedding_size;
  const std::size_t H = cfg.hidden_size;
  const std::size_t A = cfg.attention();
  std::vector<ParamSpec> spec;
  Embedding::declare(spec, kE, W, V);
  Lstm::declare(spec, kEnc, W, H);
  Lstm::declare(spec, kDec, W, H);
  spec.push_back({kAttnWh, {A, H}});
  spec.push_back({kAttnWs, {A, H}});
  spec.push_back({kAttnB, {A}});
  spec.push_back({kAttnV, {A}});
  spec.push_back({kGenWc, {H}});
  spec.push_back({kGenWd, {H}});
  spec.push_back({kGenWx, {W}});
  spec.push_back({kGenB, {1}});
  Affine::declare(spec, kOutW, kOutB, V, 2 * H);
  return spec;
}

Summarizer::Summarizer(ParamStore& store)
    : embedding_(store, kE),
      encoder_(store, kEnc),
      decoder_(store, kDec),
      attn_wh_(&store.get(kAttnWh)),
      attn_ws_(&store.get(kAttnWs)),
      attn_b_(&store.get(kAttnB)),
      attn_v_(&store.get(kAttnV)),
      gen_wc_(&store.get(kGenWc)),
      gen_wd_(&store.get(kGenWd)),
      gen_wx_(&store.get(kGenWx)),
      gen_b_(&store.get(kGenB)),
      out_(store, kOutW, kOutB) {
  const std::size_t H = encoder_.hidden_size();
  const std::size_t A = attn_v_->value.size();
  if (decoder_.hidden_size() != H || encoder_.input_size() != embedding_.dim() ||
      decoder_.input_size() != embedding_.dim() || attn_wh_->value.rows() != A ||
      attn_wh_->value.cols() != H || attn_ws_->value.rows() != A ||
      attn_ws_->value.cols() != H || attn_b_->value.size() != A ||
      gen_wc_->value.size() != H || gen_wd_->value.size() != H ||
      gen_wx_->value.size() != embedding_.dim() || out_.in_size() != 2 * H ||
      out_.out_size() != embedding_.vocab_size()) {
    throw DimensionError("summarizer parameters have inconsistent shapes");
  }
}

Summarizer::Encoding Summarizer::encode(std::span<const TokenId> source) const {
  if (source.empty()) throw UsageError("summarizer: empty source");
  const std::size_t H = hidden_size();
  const std::size_t A = attn_v_->value.size();
  Encoding enc;
  enc.source.assign(source.begin(), source.end());
  enc.steps.resize(source.size());
  LstmState state{Vec(H, 0.0), Vec(H, 0.0)};
  for (std::size_t s = 0; s < source.size(); ++s) {
    state = encoder_.step(embedding_.lookup(source[s]), state, &enc.steps[s]);
    enc.states.push_back(state.h);
    Vec key(A, 0.0);
    kernels::matvec_acc(attn_wh_->value.data(), A, H, state.h, key);
    enc.keys.push_back(std::move(key));
  }
  enc.final_state = std::move(state);
  return enc;
}

Vec Summarizer::attend_keys(std::span<const double> dec_state, const std::vector<Vec>& keys,
                            std::vector<Vec>* tanh_z) const {
  const std::size_t H = hidden_size();
  const std::size_t A = attn_v_->value.size();
  Vec q(attn_b_->value.data().begin(), attn_b_->value.data().end());
  kernels::matvec_acc(attn_ws_->value.data(), A, H, dec_state, q);
  Vec scores(keys.size());
  if (tanh_z) tanh_z->assign(keys.size(), Vec(A));
  Vec z(A);
  for (std::size_t s = 0; s < keys.size(); ++s) {
    for (std::size_t a = 0; a < A; ++a) z[a] = std::tanh(keys[s][a] + q[a]);
    scores[s] = dot(attn_v_->value.data(), z);
    if (tanh_z) (*tanh_z)[s] = z;
  }
  kernels::softmax(scores);
  return scores;
}

Vec Summarizer::attend(std::span<const double> dec_state,
                       const std::vector<Vec>& enc_states) const {
  const std::size_t H = hidden_size();
  const std::size_t A = attn_v_->value.size();
  if (dec_state.size() != H) throw DimensionError("attend: decoder state size mismatch");
  std::vector<Vec> keys;
  for (const auto& h : enc_states) {
    if (h.size() != H) throw DimensionError("attend: encoder state size mismatch");
    Vec key(A, 0.0);
    kernels::matvec_acc(attn_wh_->value.data(), A, H, h, key);
    keys.push_back(std::move(key));
  }
  return attend_keys(dec_state, keys, nullptr);
}

std::pair<Vec, LstmState> Summarizer::step(const Encoding& enc, TokenId prev,
                                           const LstmState& state, StepRecord* rec) const {
  const std::size_t H = hidden_size();
  Vec x = embedding_.lookup(prev);
  LstmState next = decoder_.step(x, state, rec ? &rec->dec : nullptr);

  std::vector<Vec> tanh_z;
  Vec attn = attend_keys(next.h, enc.keys, rec ? &tanh_z : nullptr);
  Vec context(H, 0.0);
  for (std::size_t s = 0; s < attn.size(); ++s) axpy(attn[s], enc.states[s], context);

  Vec features(next.h);
  features.insert(features.end(), context.begin(), context.end());
  Vec vocab_dist = out_.forward(features);
  kernels::softmax(vocab_dist);

  const double p_gen = kernels::sigmoid(dot(gen_wc_->value.data(), context) +
                                        dot(gen_wd_->value.data(), next.h) +
                                        dot(gen_wx_->value.data(), x) + gen_b_->value[0]);
  Vec dist = pointer_mix(p_gen, vocab_dist, attn, enc.source);

  if (rec) {
    rec->input = prev;
    rec->x = std::move(x);
    rec->tanh_z = std::move(tanh_z);
    rec->attn = std::move(attn);
    rec->context = std::move(context);
    rec->features = std::move(features);
    rec->vocab_dist = std::move(vocab_dist);
    rec->p_gen = p_gen;
    rec->dist = dist;
  }
  return {std::move(dist), std::move(next)};
}

Summary Summarizer::summarize(std::span<const TokenId> source, std::size_t max_len) const {
  const Encoding enc = encode(source);
  StepFn<LstmState> fn = [&](TokenId prev, const LstmState& st) { return step(enc, prev, st); };
  Summary out;
  out.tokens = greedy(fn, enc.final_state, max_len, &out.dists);
  return out;
}

double Summarizer::loss(std::span<const TokenId> source, std::span<const TokenId> target,
                        bool accumulate) const {
  if (target.size() < 2 || target.front() != kStart) {
    throw UsageError("summarizer loss: target must be START ... END");
  }
  const std::size_t H = hidden_size();
  const std::size_t A = attn_v_->value.size();
  const std::size_t W = embedding_.dim();
  const std::size_t V = vocab_size();
  const Encoding enc = encode(source);
  const std::size_t S = enc.source.size();
  const std::size_t T = target.size() - 1;

  std::vector<StepRecord> recs(T);
  LstmState state = enc.final_state;
  double total = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    auto [dist, next] = step(enc, target[t], state, &recs[t]);
    total += clamped_nll(dist[static_cast<std::size_t>(target[t + 1])]);
    state = std::move(next);
  }
  if (!accumulate) return total;

  std::vector<Vec> denc(S, Vec(H, 0.0));
  LstmState carry{Vec(H, 0.0), Vec(H, 0.0)};
  LstmState dprev;
  for (std::size_t t = T; t-- > 0;) {
    const StepRecord& r = recs[t];
    const auto w = static_cast<std::size_t>(target[t + 1]);
    const double pw = r.dist[w];
    Vec ddec_h = carry.h;
    Vec dx(W, 0.0);
    if (pw >= kProbFloor) {
      // Only the target entry of dL/dP is nonzero.
      const double g = -1.0 / pw;

      // Generation gate.
      double copy_w = 0.0;
      for (std::size_t s = 0; s < S; ++s) {
        if (static_cast<std::size_t>(enc.source[s]) == w) copy_w += r.attn[s];
      }
      const double dz = g * (r.vocab_dist[w] - copy_w) * r.p_gen * (1.0 - r.p_gen);
      Vec dcontext(H, 0.0);
      axpy(dz, r.context, gen_wc_->grad.data());
      axpy(dz, std::span<const double>(r.features).first(H), gen_wd_->grad.data());
      axpy(dz, r.x, gen_wx_->grad.data());
      gen_b_->grad[0] += dz;
      axpy(dz, gen_wc_->value.data(), dcontext);
      axpy(dz, gen_wd_->value.data(), ddec_h);
      axpy(dz, gen_wx_->value.data(), dx);

      // Vocabulary softmax.
      Vec dvocab(V, 0.0);
      dvocab[w] = g * r.p_gen;
      Vec dlogits(V, 0.0);
      kernels::softmax_backward(r.vocab_dist, dvocab, dlogits);
      Vec dfeatures(2 * H, 0.0);
      out_.backward(r.features, dlogits, dfeatures);
      for (std::size_t j = 0; j < H; ++j) {
        ddec_h[j] += dfeatures[j];
        dcontext[j] += dfeatures[H + j];
      }

      // Attention weights: copy path plus context path.
      Vec dattn(S, 0.0);
      for (std::size_t s = 0; s < S; ++s) {
        if (static_cast<std::size_t>(enc.source[s]) == w) dattn[s] += g * (1.0 - r.p_gen);
        dattn[s] += dot(dcontext, enc.states[s]);
        axpy(r.attn[s], dcontext, denc[s]);
      }
      const double inner = dot(r.attn, dattn);
      Vec dq(A, 0.0);
      Vec dzs(A);
      for (std::size_t s = 0; s < S; ++s) {
        const double de = r.attn[s] * (dattn[s] - inner);
        if (de == 0.0) continue;
        axpy(de, r.tanh_z[s], attn_v_->grad.data());
        for (std::size_t a = 0; a < A; ++a) {
          dzs[a] = de * attn_v_->value[a] * (1.0 - r.tanh_z[s][a] * r.tanh_z[s][a]);
        }
        kernels::outer_acc(attn_wh_->grad.data(), A, H, dzs, enc.states[s]);
        kernels::matvec_t_acc(attn_wh_->value.data(), A, H, dzs, denc[s]);
        axpy(1.0, dzs, dq);
      }
      const std::span<const double> dec_h = std::span<const double>(r.features).first(H);
      kernels::outer_acc(attn_ws_->grad.data(), A, H, dq, dec_h);
      axpy(1.0, dq, attn_b_->grad.data());
      kernels::matvec_t_acc(attn_ws_->value.data(), A, H, dq, ddec_h);
    }
    decoder_.backward(r.dec, ddec_h, carry.c, dx, dprev);
    embedding_.backward(r.input, dx);
    carry = std::move(dprev);
  }

  // Decoder starts from the final encoder state.
  for (std::size_t s = S; s-- > 0;) {
    axpy(1.0, denc[s], carry.h);
    Vec dx(W, 0.0);
    encoder_.backward(enc.steps[s], carry.h, carry.c, dx, dprev);
    embedding_.backward(enc.source[s], dx);
    carry = std::move(dprev);
  }
  return total;
}

ParamStore make_summarizer_store(const SummarizerConfig& cfg, std::uint64_t seed,
                                 double scale) {
  const auto spec = Summarizer::param_spec(cfg);
  return init_params(spec, seed, scale);
}

std::vector<double> pretrain(Summarizer& model, ParamStore& store,
                             std::span<const SummaryPair> corpus, const PretrainConfig& cfg) {
  if (corpus.empty()) throw ConfigError("pretrain: empty corpus");
  if (!(cfg.lr > 0.0)) throw ConfigError("pretrain: lr must be positive");
  for (const auto& p : corpus) {
    for (const auto* seq : {&p.source, &p.target}) {
      for (TokenId t : *seq) {
        if (t < 0 || static_cast<std::size_t>(t) >= model.vocab_size() || t == kUnk) {
          throw ConfigError("pretrain: corpus contains out-of-vocabulary tokens");
        }
      }
    }
  }
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    std::size_t tokens = 0;
    for (std::size_t idx : order) {
      const auto& pair = corpus[idx];
      store.zero_grad();
      const double l = model.loss(pair.source, pair.target, true);
      if (!std::isfinite(l)) throw NumericError("pretrain: non-finite loss");
      total += l;
      tokens += pair.target.size() - 1;
      const double norm = store.grad_norm();
      if (norm > cfg.clip_norm) store.scale_grad(cfg.clip_norm / norm);
      store.sgd_step(cfg.lr);
    }
    store.zero_grad();
    history.push_back(total / static_cast<double>(tokens));
  }
  return history;
}

double exact_match_rate(const Summarizer& model, std::span<const SummaryPair> corpus,
                        std::size_t max_len) {
  if (corpus.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : corpus) {
    const TokenSeq got = model.summarize(p.source, max_len).tokens;
    if (std::equal(got.begin(), got.end(), p.target.begin() + 1, p.target.end())) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(corpus.size());
}

}  // namespace sdcap
