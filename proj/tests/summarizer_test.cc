#include <doctest.h>

#include <cmath>

#include "sdcap/dataio.h"
#include "sdcap/error.h"
#include "sdcap/gradcheck.h"
#include "sdcap/rng.h"
#include "sdcap/summarizer.h"

using namespace sdcap;

namespace {

SummarizerConfig small_config(std::size_t V = 12) {
  SummarizerConfig c;
  c.vocab_size = V;
  c.embedding_size = 6;
  c.hidden_size = 8;
  c.attention_size = 5;
  return c;
}

double total(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("stack_captions") {
  const TokenSeq a{kStart, 4, 5, kEnd}, b{kStart, 6, kEnd};
  const std::vector<TokenSeq> one{a};
  CHECK(stack_captions(one) == a);
  const std::vector<TokenSeq> two{a, b};
  const TokenSeq s = stack_captions(two);
  CHECK(s.size() == a.size() + b.size());
  CHECK(s == TokenSeq{kStart, 4, 5, kEnd, kStart, 6, kEnd});
  CHECK_THROWS(stack_captions(std::vector<TokenSeq>{}));
}

TEST_CASE("pointer_mix examples") {
  const Vec vocab{0.1, 0.2, 0.3, 0.4};
  const TokenSeq src{0, 0, 1};
  const Vec attn{0.5, 0.25, 0.25};
  CHECK(pointer_mix(1.0, vocab, attn, src) == vocab);
  const Vec copy = pointer_mix(0.0, vocab, attn, src);
  CHECK(copy[0] == doctest::Approx(0.75));
  CHECK(copy[1] == doctest::Approx(0.25));
  CHECK(copy[2] == 0.0);
  CHECK(copy[3] == 0.0);
  CHECK_THROWS_AS(pointer_mix(0.5, vocab, Vec{1.0}, src), DimensionError);
  CHECK_THROWS_AS(pointer_mix(0.5, vocab, Vec{1.0}, TokenSeq{7}), DimensionError);
}

TEST_CASE("pointer_mix is a distribution for random inputs") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t V = 5 + rng.below(20), S = 1 + rng.below(15);
    Vec vocab(V), attn(S);
    TokenSeq src(S);
    for (double& x : vocab) x = rng.normal();
    for (double& x : attn) x = rng.normal();
    for (auto& t : src) t = static_cast<TokenId>(rng.below(V));
    kernels::softmax(vocab);
    kernels::softmax(attn);
    const double p = trial % 10 == 0 ? 0.0 : rng.uniform();
    const Vec out = pointer_mix(p, vocab, attn, src);
    CHECK(std::abs(total(out) - 1.0) <= 1e-12);
    if (p == 0.0) {
      for (std::size_t w = 0; w < V; ++w) {
        if (std::find(src.begin(), src.end(), static_cast<TokenId>(w)) == src.end()) {
          CHECK(out[w] == 0.0);
        }
      }
    }
  }
}

TEST_CASE("attention") {
  ParamStore s = make_summarizer_store(small_config(), 1, 0.5);
  Summarizer m(s);
  Rng rng(2);
  Vec d(8);
  for (double& x : d) x = rng.normal();
  std::vector<Vec> enc(1, Vec(8, 0.3));
  CHECK(m.attend(d, enc) == Vec{1.0});

  ParamStore z = make_summarizer_store(small_config(), 1, 0.0);
  Summarizer mz(z);
  std::vector<Vec> four(4, Vec(8));
  for (auto& h : four) {
    for (double& x : h) x = rng.normal();
  }
  for (double w : mz.attend(d, four)) CHECK(w == doctest::Approx(0.25));

  // Scalar oracle of v . tanh(W_h h_s + W_s d + b), then softmax.
  const Vec got = m.attend(d, four);
  const auto& Wh = s.get("sum.attn.W_h").value;
  const auto& Ws = s.get("sum.attn.W_s").value;
  const auto& b = s.get("sum.attn.b").value;
  const auto& v = s.get("sum.attn.v").value;
  Vec e(4);
  for (std::size_t j = 0; j < 4; ++j) {
    double score = 0.0;
    for (std::size_t a = 0; a < 5; ++a) {
      double z_a = b[a];
      for (std::size_t h = 0; h < 8; ++h) z_a += Wh.at(a, h) * four[j][h] + Ws.at(a, h) * d[h];
      score += v[a] * std::tanh(z_a);
    }
    e[j] = score;
  }
  double mx = *std::max_element(e.begin(), e.end()), sum = 0.0;
  for (double& x : e) sum += (x = std::exp(x - mx));
  for (std::size_t j = 0; j < 4; ++j) CHECK(std::abs(got[j] - e[j] / sum) < 1e-14);
  CHECK(std::abs(total(got) - 1.0) < 1e-12);
}

TEST_CASE("summarize is deterministic and emits distributions") {
  ParamStore s = make_summarizer_store(small_config(), 4, 0.5);
  Summarizer m(s);
  const TokenSeq src{kStart, 4, 5, 6, kEnd, kStart, 4, 7, kEnd};
  const Summary a = m.summarize(src, 10);
  const Summary b = m.summarize(src, 10);
  CHECK(a.tokens == b.tokens);
  CHECK(a.dists == b.dists);
  REQUIRE(a.dists.size() == a.tokens.size());
  CHECK(a.tokens.size() <= 10);
  for (const Vec& p : a.dists) CHECK(std::abs(total(p) - 1.0) < 1e-12);
}

TEST_CASE("pointer-generator step passes grad_check") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParamStore s = make_summarizer_store(small_config(), seed, 0.5);
    Summarizer m(s);
    Rng rng(seed);
    TokenSeq src{kStart};
    for (int k = 0; k < 5; ++k) src.push_back(static_cast<TokenId>(4 + rng.below(8)));
    src.push_back(kEnd);
    const TokenSeq tgt{kStart, src[2], src[4], 11, kEnd};
    const Objective f = [&](ParamStore&) { return m.loss(src, tgt, true); };
    CHECK(grad_check(f, s) < 1e-4);
  }
}

TEST_CASE("pretraining") {
  SummarizerConfig cfg;
  cfg.vocab_size = 20;
  SummaryPair pair{TokenSeq{kStart, 4, 5, 6, 7, kEnd, kStart, 4, 5, 8, kEnd},
                   TokenSeq{kStart, 4, 5, 6, 7, kEnd}};
  const std::vector<SummaryPair> corpus{pair};

  ParamStore fresh = make_summarizer_store(cfg, 7);
  Summarizer untrained(fresh);
  const double init = untrained.loss(pair.source, pair.target, false) / 5.0;
  CHECK(init == doctest::Approx(std::log(20.0)).epsilon(0.2));

  PretrainConfig pc;
  pc.epochs = 200;
  ParamStore s = make_summarizer_store(cfg, 7);
  Summarizer m(s);
  const auto hist = pretrain(m, s, corpus, pc);
  REQUIRE(hist.size() == 200);
  CHECK(hist[1] < hist[0]);
  CHECK(hist[2] < hist[1]);
  CHECK(hist.back() < 0.1);
  CHECK(exact_match_rate(m, corpus, 20) == 1.0);

  std::vector<SummaryPair> bad{{TokenSeq{kStart, kUnk, kEnd}, pair.target}};
  CHECK_THROWS_AS(pretrain(m, s, bad, pc), ConfigError);
  CHECK_THROWS_AS(pretrain(m, s, std::vector<SummaryPair>{}, pc), ConfigError);
}

TEST_CASE("pretraining on the headline fixture decreases the loss at the default rate") {
  const auto rows = make_headline_corpus(50, 43);
  std::vector<std::string> text;
  for (const auto& r : rows) {
    text.push_back(r.source);
    text.push_back(r.summary);
  }
  const Vocabulary v = build_vocab(std::vector<std::string>{}, text);
  std::vector<SummaryPair> corpus;
  for (const auto& r : rows) corpus.push_back(encode_article(r, v));
  SummarizerConfig cfg;
  cfg.vocab_size = v.size();
  ParamStore s = make_summarizer_store(cfg, 42);
  Summarizer m(s);
  PretrainConfig pc;
  pc.epochs = 3;
  const auto hist = pretrain(m, s, corpus, pc);
  CHECK(hist[1] < hist[0]);
  CHECK(hist[2] < hist[1]);
}
