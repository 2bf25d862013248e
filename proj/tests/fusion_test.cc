#include <doctest.h>

#include <cmath>

#include "sdcap/error.h"
#include "sdcap/fusion.h"
#include "sdcap/rng.h"

using namespace sdcap;

namespace {

Vec random_dist(Rng& rng, std::size_t n) {
  Vec p(n);
  for (double& x : p) x = 3.0 * rng.normal();
  kernels::softmax(p);
  return p;
}

double total(const Vec& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("alphas are strictly inside (0, 1)") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ParamStore s = init_params(Fusion::param_spec(6), seed, 2.0);
    Fusion f(s);
    Rng rng(seed);
    Vec e(6);
    for (double& x : e) x = 10.0 * rng.normal();
    for (double a : f.adaptive_weights(e, 12)) {
      CHECK(a > 0.0);
      CHECK(a < 1.0);
    }
  }
  ParamStore s = init_params(Fusion::param_spec(3), 0, 0.1);
  CHECK_THROWS_AS(Fusion(s).adaptive_weights(Vec(3), 0), UsageError);
}

TEST_CASE("zero parameters give a constant alpha") {
  ParamStore s = init_params(Fusion::param_spec(4), 0, 0.0);
  Fusion f(s);
  const Vec a = f.adaptive_weights(Vec{1, 2, 3, 4}, 5);
  for (double x : a) CHECK(x == a.front());
  CHECK(a.front() == 0.5);
}

TEST_CASE("alphas match a scalar unroll") {
  ParamStore s = init_params(Fusion::param_spec(3), 17, 0.8);
  Fusion f(s);
  const Vec e{0.4, -1.2, 0.7};
  auto g = [&](const char* gate, double h) {
    const auto& W = s.get(std::string("fusion_lstm.W_") + gate + "u").value;
    double z = s.get(std::string("fusion_lstm.b_") + gate).value[0];
    z += s.get(std::string("fusion_lstm.U_") + gate + "h").value[0] * h;
    for (std::size_t j = 0; j < 3; ++j) z += W[j] * e[j];
    return z;
  };
  double h = s.get("fusion_lstm.h0").value[0], c = s.get("fusion_lstm.c0").value[0];
  const Vec got = f.adaptive_weights(e, 6);
  for (std::size_t k = 0; k < 6; ++k) {
    const double fi = sig(g("f", h)), ii = sig(g("i", h)), oo = sig(g("o", h));
    c = fi * c + ii * std::tanh(g("c", h));
    h = oo * std::tanh(c);
    CHECK(std::abs(got[k] - sig(h)) < 1e-15);
  }
}

TEST_CASE("blend degenerate and hand cases") {
  Rng rng(3);
  DistSeq pc{random_dist(rng, 5), random_dist(rng, 5)};
  DistSeq ps{random_dist(rng, 5), random_dist(rng, 5)};
  const DistSeq one = blend(pc, ps, Vec{1.0, 1.0});
  const DistSeq zero = blend(pc, ps, Vec{0.0, 0.0});
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t w = 0; w < 5; ++w) {
      CHECK(one[k][w] == doctest::Approx(pc[k][w]).epsilon(1e-15));
      CHECK(zero[k][w] == doctest::Approx(ps[k][w]).epsilon(1e-15));
    }
  }
  const DistSeq h = blend(DistSeq{{0.5, 0.5}}, DistSeq{{1.0, 0.0}}, Vec{0.5});
  CHECK(h[0][0] == 0.75);
  CHECK(h[0][1] == 0.25);
  CHECK(mix_unnormalized(&pc[0], nullptr, 0.25, 5)[2] == doctest::Approx(0.25 * pc[0][2]));
  const DistSeq padded = blend(pc, DistSeq{ps[0]}, Vec{0.3, 0.25});
  for (std::size_t w = 0; w < 5; ++w) {
    CHECK(padded[1][w] == doctest::Approx(pc[1][w]).epsilon(1e-14));
  }
}

TEST_CASE("blend errors") {
  CHECK_THROWS_AS(blend(DistSeq{{0.5, 0.5}}, DistSeq{{1.0, 0.0, 0.0}}, Vec{0.5}), DimensionError);
  CHECK_THROWS_AS(blend(DistSeq{{0.5, 0.5}}, DistSeq{{1.0, 0.0}}, Vec{0.5, 0.5}), DimensionError);
}

TEST_CASE("blend properties on random streams") {
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t V = 3 + rng.below(10);
    const std::size_t Lc = rng.below(6), Ls = rng.below(6);
    if (Lc + Ls == 0) continue;
    DistSeq pc, ps;
    for (std::size_t k = 0; k < Lc; ++k) pc.push_back(random_dist(rng, V));
    for (std::size_t k = 0; k < Ls; ++k) ps.push_back(random_dist(rng, V));
    Vec a(std::max(Lc, Ls));
    for (double& x : a) x = rng.uniform(1e-6, 1.0 - 1e-6);
    const DistSeq out = blend(pc, ps, a);
    REQUIRE(out.size() == a.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(std::abs(total(out[k]) - 1.0) <= 1e-12);
      if (k >= Ls) {
        const auto am = [](const Vec& v) { return std::max_element(v.begin(), v.end()) - v.begin(); };
        CHECK(am(out[k]) == am(pc[k]));
      }
    }
    if (Lc > 0 && Ls > 0) {
      // Pre-normalization mass is affine in alpha.
      const std::size_t w = rng.below(V);
      const double m0 = mix_unnormalized(&pc[0], &ps[0], 0.0, V)[w];
      const double m1 = mix_unnormalized(&pc[0], &ps[0], 1.0, V)[w];
      const double mh = mix_unnormalized(&pc[0], &ps[0], 0.5, V)[w];
      CHECK(std::abs(mh - 0.5 * (m0 + m1)) < 1e-15);
    }
  }
}

TEST_CASE("padding counts") {
  CHECK(padding_count(5, 5).padded == 0);
  CHECK(padding_count(4, 6).padded == 2);
  CHECK(padding_count(4, 6).total == 6);
  CHECK(padding_count(6, 4).rate() == doctest::Approx(2.0 / 6.0));
  DistSeq a(4, Vec{1.0}), b(6, Vec{1.0});
  CHECK(padding_rate(a, b) == doctest::Approx(2.0 / 6.0));
  CHECK(padding_rate(a, a) == 0.0);
  PaddingCount sum;
  sum += padding_count(4, 6);
  sum += padding_count(3, 3);
  CHECK(sum.rate() == doctest::Approx(2.0 / 9.0));
}
