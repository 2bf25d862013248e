#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace sdcap {

using Vec = std::vector<double>;

// Dense row-major array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor from_vector(std::span<const double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  // Trailing extent for matrices; 1 for vectors.
  std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Standard matrix-vector product. Throws DimensionError on mismatch.
Tensor matvec(const Tensor& m, const Tensor& v);

// Low-level kernels over spans, used by the layers. No shape checks beyond
// what the span sizes imply; callers are responsible.
namespace kernels {

// out += m * v, m is rows x cols row-major.
void matvec_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out);
// out += m^T * v.
void matvec_t_acc(std::span<const double> m, std::size_t rows, std::size_t cols,
                  std::span<const double> v, std::span<double> out);
// m += a b^T (a has rows entries, b has cols entries).
void outer_acc(std::span<double> m, std::size_t rows, std::size_t cols,
               std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double dot(std::span<const double> a, std::span<const double> b);

double sigmoid(double x);
// In place, with max subtraction.
void softmax(std::span<double> x);
// Given p = softmax(z) and dL/dp, accumulates dL/dz into dz.
void softmax_backward(std::span<const double> p, std::span<const double> dp,
                      std::span<double> dz);

}  // namespace kernels

struct Param {
  Tensor value;
  Tensor grad;
};

struct ParamSpec {
  std::string name;
  std::vector<std::size_t> shape;
};

// Named trainable parameters with accumulated gradients. Ordered by name, so
// iteration (and therefore checkpoints) is deterministic. Pointers to entries
// stay valid for the lifetime of the store.
//
// Gradient accumulation is not synchronized; a store has a single writer.
class ParamStore {
 public:
  ParamStore() = default;
  explicit ParamStore(std::uint64_t seed) : rng_seed_(seed) {}

  // Throws ConfigError if the name already exists.
  Param& add(const std::string& name, Tensor value);

  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }

  void zero_grad();
  double grad_norm() const;
  void scale_grad(double factor);
  // value -= lr * grad for every entry.
  void sgd_step(double lr);
  std::size_t num_values() const;

  std::uint64_t rng_seed() const { return rng_seed_; }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Param> entries_;
  std::uint64_t rng_seed_ = 0;
};

// Values uniform in [-scale, scale], drawn in spec order from one generator
// seeded with `seed`. scale == 0 yields zeros.
ParamStore init_params(std::span<const ParamSpec> spec, std::uint64_t seed,
                       double scale = 0.1);

// Adds freshly initialized entries to an existing store.
void add_params(ParamStore& store, std::span<const ParamSpec> spec,
                std::uint64_t seed, double scale = 0.1);

}  // namespace sdcap
