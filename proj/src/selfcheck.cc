#include "sdcap/selfcheck.h"

#include <algorithm>

#include "sdcap/captioner.h"
#include "sdcap/fusion.h"
#include "sdcap/gradcheck.h"
#include "sdcap/rng.h"
#include "sdcap/summarizer.h"
#include "sdcap/trainer.h"

namespace sdcap {

namespace {

constexpr std::size_t kVocab = 10;

TokenSeq random_caption(Rng& rng, std::size_t min_len, std::size_t max_len) {
  TokenSeq t{kStart};
  const std::size_t n = min_len + rng.below(max_len - min_len + 1);
  for (std::size_t k = 0; k < n; ++k) {
    t.push_back(static_cast<TokenId>(kNumReserved + rng.below(kVocab - kNumReserved)));
  }
  t.push_back(kEnd);
  return t;
}

Vec random_dist(Rng& rng) {
  Vec p(kVocab);
  for (double& x : p) x = rng.normal();
  kernels::softmax(p);
  return p;
}

double worst_with_prefix(const GradCheckResult& r, const std::string& prefix) {
  double worst = 0.0;
  for (const auto& [name, err] : r.per_param) {
    if (name.rfind(prefix, 0) == 0) worst = std::max(worst, err);
  }
  return worst;
}

std::size_t count_with_prefix(const ParamStore& store, const std::string& prefix) {
  std::size_t n = 0;
  for (const auto& [name, p] : store) {
    if (name.rfind(prefix, 0) == 0) n += p.value.size();
  }
  return n;
}

}  // namespace

std::vector<LayerCheck> layer_grad_checks(std::uint64_t seed, double eps) {
  Rng rng(seed);
  std::vector<LayerCheck> out;

  CaptionerConfig cc;
  cc.feature_dim = 5;
  cc.embedding_size = 6;
  cc.hidden_size = 7;
  cc.vocab_size = kVocab;
  auto spec = Captioner::param_spec(cc);
  for (auto& s : Fusion::param_spec(cc.embedding_size)) spec.push_back(std::move(s));
  ParamStore store = init_params(spec, rng.next_u64(), 0.5);
  const Captioner cap(store);
  const Fusion fusion(store);

  Vec features(cc.feature_dim);
  for (double& x : features) x = rng.normal();
  const TokenSeq target = random_caption(rng, 2, 5);

  // Captioner alone.
  const auto plain = grad_check_detailed(
      [&](ParamStore&) { return pair_loss(cap, nullptr, features, target, nullptr).nll; }, store,
      eps);
  for (const auto& [layer, prefix] :
       std::vector<std::pair<std::string, std::string>>{{"embedding", "embedding."},
                                                        {"image_fc", "image_fc."},
                                                        {"caption_lstm", "caption_lstm."},
                                                        {"word_head", "word_head."}}) {
    out.push_back({layer, worst_with_prefix(plain, prefix), count_with_prefix(store, prefix)});
  }

  // Blended loss, once with the summary stream shorter than the caption and
  // once longer, so padded steps on both sides are covered.
  const std::size_t L = target.size() - 1;
  double fusion_err = 0.0;
  double joint_err = 0.0;
  for (std::size_t S : {L > 2 ? L - 2 : std::size_t{1}, L + 2}) {
    DistSeq ps;
    for (std::size_t k = 0; k < S; ++k) ps.push_back(random_dist(rng));
    const auto r = grad_check_detailed(
        [&](ParamStore&) { return pair_loss(cap, &fusion, features, target, &ps).nll; }, store,
        eps);
    fusion_err = std::max(fusion_err, worst_with_prefix(r, "fusion_lstm."));
    joint_err = std::max(joint_err, r.max_rel_error);
  }
  out.push_back({"fusion_lstm", fusion_err, count_with_prefix(store, "fusion_lstm.")});
  out.push_back({"blended_loss", joint_err, store.num_values()});

  SummarizerConfig sc;
  sc.vocab_size = kVocab;
  sc.embedding_size = 5;
  sc.hidden_size = 6;
  sc.attention_size = 4;
  ParamStore sstore = make_summarizer_store(sc, rng.next_u64(), 0.5);
  const Summarizer sum(sstore);
  std::vector<TokenSeq> caps{random_caption(rng, 2, 4), random_caption(rng, 2, 4)};
  const TokenSeq source = stack_captions(caps);
  const TokenSeq headline = random_caption(rng, 1, 4);
  const auto ptr = grad_check_detailed(
      [&](ParamStore&) { return sum.loss(source, headline, true); }, sstore, eps);
  out.push_back({"pointer_generator", ptr.max_rel_error, ptr.coordinates});
  return out;
}

}  // namespace sdcap
