#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "sdcap/checkpoint.h"
#include "sdcap/error.h"
#include "sdcap/gradcheck.h"
#include "sdcap/rng.h"
#include "sdcap/tensor.h"

using namespace sdcap;

TEST_CASE("init_params with zero scale gives zeros") {
  std::vector<ParamSpec> spec{{"b_f", {4}}};
  ParamStore s = init_params(spec, 7, 0.0);
  for (double v : s.get("b_f").value.data()) {
    CHECK(v == 0.0);
    CHECK_FALSE(std::signbit(v));
  }
}

TEST_CASE("init_params is deterministic and in range") {
  std::vector<ParamSpec> spec{{"E", {8, 4}}, {"b", {3}}};
  ParamStore a = init_params(spec, 3, 0.1);
  ParamStore b = init_params(spec, 3, 0.1);
  CHECK(a.get("E").value == b.get("E").value);
  CHECK(a.get("b").value == b.get("b").value);
  for (double v : a.get("E").value.data()) {
    CHECK(v >= -0.1);
    CHECK(v <= 0.1);
  }
  for (double v : a.get("E").grad.data()) CHECK(v == 0.0);
  ParamStore c = init_params(spec, 4, 0.1);
  CHECK_FALSE(a.get("E").value == c.get("E").value);
}

TEST_CASE("duplicate parameter names are rejected") {
  std::vector<ParamSpec> spec{{"x", {2}}, {"x", {3}}};
  CHECK_THROWS_AS(init_params(spec, 1), ConfigError);
  ParamStore s;
  s.add("y", Tensor({2}));
  CHECK_THROWS_AS(s.add("y", Tensor({2})), ConfigError);
}

TEST_CASE("matvec") {
  const Tensor id = Tensor::matrix(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const Tensor v = Tensor::from_vector(Vec{1, 2, 3});
  CHECK(matvec(id, v) == v);
  CHECK(matvec(Tensor({3, 3}), v) == Tensor({3}));
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  const Tensor r = matvec(m, Tensor::from_vector(Vec{1, 1}));
  CHECK(r[0] == 3.0);
  CHECK(r[1] == 7.0);
  CHECK_THROWS_AS(matvec(m, v), DimensionError);
  CHECK_THROWS_AS(Tensor({2, 2}, Vec{1, 2, 3}), DimensionError);
}

TEST_CASE("matvec is linear") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor a({4, 5}), u({5}), v({5}), uv({5});
    for (auto& x : a.data()) x = rng.normal();
    for (std::size_t i = 0; i < 5; ++i) {
      u[i] = rng.normal();
      v[i] = rng.normal();
      uv[i] = u[i] + v[i];
    }
    const Tensor lhs = matvec(a, uv), l = matvec(a, u), r = matvec(a, v);
    for (std::size_t i = 0; i < 4; ++i) CHECK(std::abs(lhs[i] - l[i] - r[i]) < 1e-12);
  }
}

TEST_CASE("grad accumulation is additive and zero_grad keeps values") {
  std::vector<ParamSpec> spec{{"x", {3}}};
  ParamStore s = init_params(spec, 5, 1.0);
  auto f = [](ParamStore& st) {
    Param& p = st.get("x");
    double loss = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      loss += std::sin(p.value[i]);
      p.grad[i] += std::cos(p.value[i]);
    }
    return loss;
  };
  f(s);
  const Tensor once = s.get("x").grad;
  f(s);
  for (std::size_t i = 0; i < 3; ++i) CHECK(s.get("x").grad[i] == 2.0 * once[i]);
  const Tensor before = s.get("x").value;
  s.zero_grad();
  CHECK(s.get("x").value == before);
  CHECK(s.get("x").grad == Tensor({3}));
}

TEST_CASE("grad_check on closed forms") {
  std::vector<ParamSpec> spec{{"x", {6}}};
  ParamStore s = init_params(spec, 9, 2.0);
  const Objective quad = [](ParamStore& st) {
    Param& p = st.get("x");
    double loss = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      loss += 0.5 * p.value[i] * p.value[i];
      p.grad[i] += p.value[i];
    }
    return loss;
  };
  CHECK(grad_check(quad, s) < 1e-8);
  const Tensor before = s.get("x").value;
  grad_check(quad, s);
  CHECK(s.get("x").value == before);

  const Objective constant = [](ParamStore&) { return 3.0; };
  CHECK(grad_check(constant, s) == 0.0);

  const Objective wrong = [](ParamStore& st) {
    Param& p = st.get("x");
    double loss = 0.0;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      loss += p.value[i] * p.value[i];
      p.grad[i] += p.value[i];  // should be 2x
    }
    return loss;
  };
  const auto r = grad_check_detailed(wrong, s);
  CHECK(r.max_rel_error > 0.1);
  CHECK(r.worst_param == "x");
  CHECK(r.coordinates == 6);
}

TEST_CASE("grad_check errors") {
  std::vector<ParamSpec> spec{{"x", {2}}};
  ParamStore s = init_params(spec, 1);
  const Objective nan = [](ParamStore&) { return std::nan(""); };
  CHECK_THROWS_AS(grad_check(nan, s), NumericError);
  const Objective ok = [](ParamStore&) { return 0.0; };
  CHECK_THROWS_AS(grad_check(ok, s, 1e-2), ConfigError);
  CHECK_THROWS_AS(grad_check(ok, s, 1e-9), ConfigError);
}

TEST_CASE("sgd, clipping helpers") {
  ParamStore s;
  Param& p = s.add("w", Tensor::from_vector(Vec{1.0, 2.0}));
  p.grad[0] = 3.0;
  p.grad[1] = 4.0;
  CHECK(s.grad_norm() == doctest::Approx(5.0));
  s.scale_grad(0.5);
  s.sgd_step(0.1);
  CHECK(p.value[0] == doctest::Approx(1.0 - 0.15));
  CHECK(p.value[1] == doctest::Approx(2.0 - 0.2));
  CHECK(s.num_values() == 2);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  std::vector<ParamSpec> spec{{"a.W", {3, 2}}, {"a.b", {3}}};
  ParamStore s = init_params(spec, 21, 1.0);
  s.get("a.b").value[1] = -0.0;
  s.get("a.b").value[2] = 1e-310;  // subnormal
  Checkpoint ck;
  ck.metadata = R"({"k":1})";
  append_store(ck, s, "m/");
  const std::string bytes = encode_checkpoint(ck);
  CHECK(bytes.substr(0, 8) == "SDCAPCK1");
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.metadata == ck.metadata);
  ParamStore r = extract_store(back, "m/");
  REQUIRE(r.size() == 2);
  for (const auto& [name, p] : s) {
    const auto& q = r.get(name).value;
    REQUIRE(q.shape() == p.value.shape());
    CHECK(std::memcmp(q.data().data(), p.value.data().data(), q.size() * sizeof(double)) == 0);
  }
  CHECK(encode_checkpoint(back) == bytes);

  const auto path = std::filesystem::temp_directory_path() / "sdcap_numeric_test.ckpt";
  write_checkpoint(path, ck);
  CHECK(encode_checkpoint(read_checkpoint(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  Checkpoint ck;
  ck.tensors.push_back({"x", Tensor::from_vector(Vec{1, 2})});
  std::string bytes = encode_checkpoint(ck);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), LoadError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "x"), LoadError);
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bytes), LoadError);
}

TEST_CASE("rng is reproducible and unbiased enough") {
  Rng a(99), b(99);
  for (int i = 0; i < 10; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng r(1);
  std::vector<int> counts(3, 0);
  for (int i = 0; i < 30000; ++i) ++counts[r.below(3)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  for (int i = 0; i < 1000; ++i) {
    const double u = r.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
