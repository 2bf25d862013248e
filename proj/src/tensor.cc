#include "sdcap/tensor.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "sdcap/error.h"
#include "sdcap/rng.h"

namespace sdcap {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), data_(shape_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + shape_str(shape_) + " does not match " +
                         std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::from_vector(std::span<const double> values) {
  return Tensor({values.size()}, std::vector<double>(values.begin(), values.end()));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

Tensor matvec(const Tensor& m, const Tensor& v) {
  if (m.rank() != 2 || v.rank() != 1 || m.cols() != v.size()) {
    throw DimensionError("matvec: cannot multiply " + shape_str(m.shape()) +
                         " by " + shape_str(v.shape()));
  }
  Tensor out({m.rows()});
  kernels::matvec_acc(m.data(), m.rows(), m.cols(), v.data(), out.data());
  return out;
}

namespace kernels {

void matvec_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out) {
  const double* p = m.data();
  const double* x = v.data();
  for (std::size_t r = 0; r < rows; ++r, p += cols) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += p[c] * x[c];
    out[r] += s;
  }
}

void matvec_t_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
                  std::span<const double> v, std::span<double> out) {
  const double* p = m.data();
  double* y = out.data();
  for (std::size_t r = 0; r < rows; ++r, p += cols) {
    const double a = v[r];
    if (a == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) y[c] += a * p[c];
  }
}

void outer_acc(std::span<double> m, std::size_t rows, std::size_t cols,
               std::span<const double> a, std::span<const double> b) {
  double* p = m.data();
  const double* y = b.data();
  for (std::size_t r = 0; r < rows; ++r, p += cols) {
    const double s = a[r];
    if (s == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) p[c] += s * y[c];
  }
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void softmax(std::span<double> x) {
  if (x.empty()) return;
  const double mx = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double& v : x) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : x) v /= sum;
}

void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> dz) {
  const double inner = dot(p, dp);
  for (std::size_t j = 0; j < p.size(); ++j) dz[j] += p[j] * (dp[j] - inner);
}

}  // namespace kernels

Param& ParamStore::add(const std::string& name, Tensor value) {
  if (entries_.count(name)) throw ConfigError("duplicate parameter name: " + name);
  Tensor grad(value.shape());
  auto [it, _] = entries_.emplace(name, Param{std::move(value), std::move(grad)});
  return it->second;
}

Param& ParamStore::get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : entries_) p.grad.fill(0.0);
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : entries_) s += kernels::dot(p.grad.data(), p.grad.data());
  return std::sqrt(s);
}

void ParamStore::scale_grad(double factor) {
  for (auto& [_, p] : entries_)
    for (double& g : p.grad.data()) g *= factor;
}

void ParamStore::sgd_step(double lr) {
  for (auto& [_, p] : entries_) kernels::axpy(-lr, p.grad.data(), p.value.data());
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, p] : entries_) n += p.value.size();
  return n;
}

void add_params(ParamStore& store, std::span<const ParamSpec> spec,
                std::uint64_t seed, double scale) {
  if (!(scale >= 0.0)) throw ConfigError("init scale must be nonnegative");
  for (std::size_t i = 0; i < spec.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (spec[j].name == spec[i].name)
        throw ConfigError("duplicate parameter name: " + spec[i].name);
    }
    if (spec[i].shape.empty()) throw ConfigError("empty shape for " + spec[i].name);
  }
  Rng rng(seed);
  for (const auto& s : spec) {
    Tensor t(s.shape);
    if (scale > 0.0) {
      for (double& v : t.data()) v = scale * (2.0 * rng.uniform() - 1.0);
    }
    store.add(s.name, std::move(t));
  }
}

ParamStore init_params(std::span<const ParamSpec> spec, std::uint64_t seed,
                       double scale) {
  ParamStore store(seed);
  add_params(store, spec, seed, scale);
  return store;
}

}  // namespace sdcap
