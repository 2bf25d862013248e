#include <doctest.h>

#include <cmath>

#include "sdcap/captioner.h"
#include "sdcap/error.h"
#include "sdcap/gradcheck.h"
#include "sdcap/rng.h"
#include "sdcap/trainer.h"

using namespace sdcap;

namespace {

CaptionerConfig small_config() {
  CaptionerConfig c;
  c.feature_dim = 4;
  c.embedding_size = 4;
  c.hidden_size = 5;
  c.vocab_size = 9;
  return c;
}

Vec random_vec(Rng& rng, std::size_t n) {
  Vec v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

}  // namespace

TEST_CASE("image_embed is affine") {
  ParamStore s = init_params(Captioner::param_spec(small_config()), 1, 0.0);
  Captioner cap(s);
  auto& b = s.get(captioner_params::kImageB).value;
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.1 * double(i);
  const Vec e = cap.image_embed(Vec{5, 6, 7, 8});
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(e[i] == b[i]);

  b.fill(0.0);
  auto& W = s.get(captioner_params::kImageW).value;
  for (std::size_t i = 0; i < 4; ++i) W.at(i, i) = 1.0;
  CHECK(cap.image_embed(Vec{5, 6, 7, 8}) == Vec{5, 6, 7, 8});
  CHECK_THROWS_AS(cap.image_embed(Vec{1, 2}), DimensionError);

  ParamStore r = init_params(Captioner::param_spec(small_config()), 2);
  Captioner rc(r);
  const Vec f{0.5, -1, 2, 0.25};
  const Tensor want = matvec(r.get(captioner_params::kImageW).value, Tensor::from_vector(f));
  const Vec got = rc.image_embed(f);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(got[i] - want[i] - r.get(captioner_params::kImageB).value[i]) < 1e-15);
  }
}

TEST_CASE("caption_forward shape and distributions") {
  ParamStore s = init_params(Captioner::param_spec(small_config()), 3);
  Captioner cap(s);
  const TokenSeq target{kStart, 4, 5, 6, kEnd};
  const DistSeq d = cap.forward(cap.image_embed(Vec{1, 0, 0, 1}), target);
  REQUIRE(d.size() == 4);
  for (const Vec& p : d) {
    double sum = 0.0;
    for (double x : p) sum += x;
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  CHECK_THROWS_AS(cap.forward(Vec(4), TokenSeq{}), DimensionError);
  CHECK_THROWS_AS(cap.forward(Vec(4), TokenSeq{4, kEnd}), DimensionError);
}

TEST_CASE("all-zero weights emit one distribution") {
  ParamStore s = init_params(Captioner::param_spec(small_config()), 3, 0.0);
  Rng rng(1);
  for (auto& x : s.get(captioner_params::kHeadB).value.data()) x = rng.normal();
  Captioner cap(s);
  const DistSeq d = cap.forward(Vec(4, 1.0), TokenSeq{kStart, 4, 7, kEnd});
  for (const Vec& p : d) CHECK(p == d.front());
}

TEST_CASE("step-by-step decoding equals teacher forcing on its own argmax chain") {
  ParamStore s = init_params(Captioner::param_spec(small_config()), 5, 0.5);
  Captioner cap(s);
  const Vec e = cap.image_embed(Vec{0.2, -0.4, 1.0, 0.3});
  LstmState st = cap.prime(e);
  TokenSeq chain{kStart};
  DistSeq stepwise;
  for (int k = 0; k < 6; ++k) {
    auto [p, next] = cap.step(chain.back(), st);
    stepwise.push_back(p);
    chain.push_back(static_cast<TokenId>(std::max_element(p.begin(), p.end()) - p.begin()));
    st = next;
  }
  const DistSeq forced = cap.forward(e, chain);
  REQUIRE(forced.size() == stepwise.size());
  for (std::size_t k = 0; k < forced.size(); ++k) {
    for (std::size_t w = 0; w < forced[k].size(); ++w) {
      CHECK(std::abs(forced[k][w] - stepwise[k][w]) <= 1e-12);
    }
  }
  // END is a valid input.
  CHECK(cap.step(kEnd, st).first.size() == 9);
}

TEST_CASE("priming depends on the image") {
  int differ = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParamStore s = init_params(Captioner::param_spec(small_config()), seed, 0.3);
    Captioner cap(s);
    Rng rng(seed);
    const TokenSeq t{kStart, 4, kEnd};
    const DistSeq a = cap.forward(cap.image_embed(random_vec(rng, 4)), t);
    const DistSeq b = cap.forward(cap.image_embed(random_vec(rng, 4)), t);
    differ += a[0] != b[0];
  }
  CHECK(differ == 10);
}

TEST_CASE("teacher-forced likelihood is in (0, 1]") {
  ParamStore s = init_params(Captioner::param_spec(small_config()), 8, 0.5);
  Captioner cap(s);
  const TokenSeq t{kStart, 4, 8, 5, kEnd};
  const double nll = nll_loss(cap.forward(cap.image_embed(Vec{1, 2, 3, 4}), t), t);
  CHECK(std::isfinite(nll));
  CHECK(nll > 0.0);
}

TEST_CASE("captioner backward") {
  ParamStore s = init_params(Captioner::param_spec(small_config()), 9, 0.5);
  Captioner cap(s);
  Captioner::Trace empty;
  CHECK_THROWS_AS(cap.backward(empty, {}), UsageError);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ParamStore st = init_params(Captioner::param_spec(small_config()), seed, 0.5);
    Captioner c(st);
    Rng rng(seed);
    const Vec f = random_vec(rng, 4);
    const TokenSeq t{kStart, static_cast<TokenId>(4 + seed % 5), 6, kEnd};
    const Objective obj = [&](ParamStore&) { return pair_loss(c, nullptr, f, t, nullptr).nll; };
    CHECK(grad_check(obj, st) < 1e-4);
  }
}
