#include "sdcap/layers.h"

#include <algorithm>
#include <cmath>

#include "sdcap/error.h"

namespace sdcap {

using kernels::matvec_acc;
using kernels::matvec_t_acc;
using kernels::outer_acc;

void Embedding::declare(std::vector<ParamSpec>& spec, const std::string& name,
                        std::size_t dim, std::size_t vocab_size) {
  spec.push_back({name, {dim, vocab_size}});
}

Embedding::Embedding(ParamStore& store, const std::string& name)
    : param_(&store.get(name)) {
  if (param_->value.rank() != 2) throw DimensionError(name + " must be a matrix");
}

void Embedding::check(TokenId w) const {
  if (w < 0 || static_cast<std::size_t>(w) >= vocab_size()) {
    throw DimensionError("embedding index " + std::to_string(w) + " out of range");
  }
}

Vec Embedding::lookup(TokenId w) const { return embed(w, param_->value); }

void Embedding::backward(TokenId w, std::span<const double> du) const {
  check(w);
  const std::size_t cols = vocab_size();
  auto g = param_->grad.data();
  for (std::size_t r = 0; r < du.size(); ++r) g[r * cols + w] += du[r];
}

Vec embed(TokenId w, const Tensor& E) {
  if (E.rank() != 2 || w < 0 || static_cast<std::size_t>(w) >= E.cols()) {
    throw DimensionError("embedding index " + std::to_string(w) + " out of range");
  }
  Vec u(E.rows());
  for (std::size_t r = 0; r < u.size(); ++r) u[r] = E.at(r, w);
  return u;
}

void Affine::declare(std::vector<ParamSpec>& spec, const std::string& weight,
                     const std::string& bias, std::size_t out, std::size_t in) {
  spec.push_back({weight, {out, in}});
  spec.push_back({bias, {out}});
}

Affine::Affine(ParamStore& store, const std::string& weight, const std::string& bias)
    : w_(&store.get(weight)), b_(&store.get(bias)) {
  if (w_->value.rank() != 2 || b_->value.size() != w_->value.rows()) {
    throw DimensionError("inconsistent affine parameters " + weight + "/" + bias);
  }
}

Vec Affine::forward(std::span<const double> x) const {
  if (x.size() != in_size()) {
    throw DimensionError("affine input has " + std::to_string(x.size()) +
                         " entries, expected " + std::to_string(in_size()));
  }
  Vec y(b_->value.data().begin(), b_->value.data().end());
  matvec_acc(w_->value.data(), out_size(), in_size(), x, y);
  return y;
}

void Affine::backward(std::span<const double> x, std::span<const double> dy,
                      std::span<double> dx) const {
  outer_acc(w_->grad.data(), out_size(), in_size(), dy, x);
  kernels::axpy(1.0, dy, b_->grad.data());
  if (!dx.empty()) matvec_t_acc(w_->value.data(), out_size(), in_size(), dy, dx);
}

void Lstm::declare(std::vector<ParamSpec>& spec, const std::string& prefix,
                   std::size_t input, std::size_t hidden) {
  for (const char* g : {"f", "i", "o", "c"}) {
    spec.push_back({prefix + "W_" + g + "u", {hidden, input}});
  }
  for (const char* g : {"f", "i", "o", "c"}) {
    spec.push_back({prefix + "U_" + g + "h", {hidden, hidden}});
  }
  for (const char* g : {"f", "i", "o", "c"}) {
    spec.push_back({prefix + "b_" + g, {hidden}});
  }
}

Lstm::Lstm(ParamStore& store, const std::string& prefix) {
  const char* names[] = {"f", "i", "o", "c"};
  for (int k = 0; k < 4; ++k) {
    const std::string g = names[k];
    gates_[k] = {&store.get(prefix + "W_" + g + "u"), &store.get(prefix + "U_" + g + "h"),
                 &store.get(prefix + "b_" + g)};
  }
  const std::size_t h = hidden_size();
  const std::size_t in = input_size();
  for (const auto& gate : gates_) {
    if (gate.w->value.rows() != h || gate.w->value.cols() != in ||
        gate.u->value.rows() != h || gate.u->value.cols() != h ||
        gate.b->value.size() != h) {
      throw DimensionError("inconsistent LSTM parameter shapes under " + prefix);
    }
  }
}

LstmState Lstm::step(std::span<const double> x, const LstmState& prev,
                     LstmStepRecord* rec) const {
  const std::size_t H = hidden_size();
  const std::size_t in = input_size();
  if (x.size() != in || prev.h.size() != H || prev.c.size() != H) {
    throw DimensionError("lstm_step: input " + std::to_string(x.size()) + "/state " +
                         std::to_string(prev.h.size()) + " vs cell " +
                         std::to_string(in) + "/" + std::to_string(H));
  }
  Vec act[4];
  for (int k = 0; k < 4; ++k) {
    const Gate& g = gates_[k];
    act[k].assign(g.b->value.data().begin(), g.b->value.data().end());
    matvec_acc(g.w->value.data(), H, in, x, act[k]);
    matvec_acc(g.u->value.data(), H, H, prev.h, act[k]);
  }
  for (std::size_t j = 0; j < H; ++j) {
    act[0][j] = kernels::sigmoid(act[0][j]);
    act[1][j] = kernels::sigmoid(act[1][j]);
    act[2][j] = kernels::sigmoid(act[2][j]);
    act[3][j] = std::tanh(act[3][j]);
  }
  LstmState next{Vec(H), Vec(H)};
  Vec tanh_c(H);
  for (std::size_t j = 0; j < H; ++j) {
    next.c[j] = act[0][j] * prev.c[j] + act[1][j] * act[3][j];
    tanh_c[j] = std::tanh(next.c[j]);
    next.h[j] = act[2][j] * tanh_c[j];
  }
  if (rec) {
    rec->valid = true;
    rec->x.assign(x.begin(), x.end());
    rec->h_prev = prev.h;
    rec->c_prev = prev.c;
    rec->f = std::move(act[0]);
    rec->i = std::move(act[1]);
    rec->o = std::move(act[2]);
    rec->g = std::move(act[3]);
    rec->c = next.c;
    rec->tanh_c = std::move(tanh_c);
  }
  return next;
}

void Lstm::backward(const LstmStepRecord& rec, std::span<const double> dh,
                    std::span<const double> dc, std::span<double> dx,
                    LstmState& dprev) const {
  if (!rec.valid) throw UsageError("lstm backward called without a recorded forward step");
  const std::size_t H = hidden_size();
  const std::size_t in = input_size();

  Vec da[4] = {Vec(H), Vec(H), Vec(H), Vec(H)};
  dprev.h.assign(H, 0.0);
  dprev.c.assign(H, 0.0);
  for (std::size_t j = 0; j < H; ++j) {
    const double dct = dc[j] + dh[j] * rec.o[j] * (1.0 - rec.tanh_c[j] * rec.tanh_c[j]);
    const double d_o = dh[j] * rec.tanh_c[j];
    const double d_f = dct * rec.c_prev[j];
    const double d_i = dct * rec.g[j];
    const double d_g = dct * rec.i[j];
    dprev.c[j] = dct * rec.f[j];
    da[0][j] = d_f * rec.f[j] * (1.0 - rec.f[j]);
    da[1][j] = d_i * rec.i[j] * (1.0 - rec.i[j]);
    da[2][j] = d_o * rec.o[j] * (1.0 - rec.o[j]);
    da[3][j] = d_g * (1.0 - rec.g[j] * rec.g[j]);
  }
  for (int k = 0; k < 4; ++k) {
    const Gate& g = gates_[k];
    outer_acc(g.w->grad.data(), H, in, da[k], rec.x);
    outer_acc(g.u->grad.data(), H, H, da[k], rec.h_prev);
    kernels::axpy(1.0, da[k], g.b->grad.data());
    if (!dx.empty()) matvec_t_acc(g.w->value.data(), H, in, da[k], dx);
    matvec_t_acc(g.u->value.data(), H, H, da[k], dprev.h);
  }
}

void WordHead::declare(std::vector<ParamSpec>& spec, const std::string& weight,
                       const std::string& bias, std::size_t vocab_size,
                       std::size_t hidden) {
  Affine::declare(spec, weight, bias, vocab_size, hidden);
}

WordHead::WordHead(ParamStore& store, const std::string& weight, const std::string& bias)
    : affine_(store, weight, bias) {}

Vec WordHead::forward(std::span<const double> h, WordHeadRecord* rec) const {
  Vec p = affine_.forward(h);
  kernels::softmax(p);
  if (rec) {
    rec->valid = true;
    rec->h.assign(h.begin(), h.end());
    rec->probs = p;
  }
  return p;
}

void WordHead::backward(const WordHeadRecord& rec, std::span<const double> dprobs,
                        std::span<double> dh) const {
  if (!rec.valid) throw UsageError("word head backward called without a forward pass");
  Vec dlogits(rec.probs.size(), 0.0);
  kernels::softmax_backward(rec.probs, dprobs, dlogits);
  affine_.backward(rec.h, dlogits, dh);
}

void WordHead::backward_logits(const WordHeadRecord& rec,
                               std::span<const double> dlogits,
                               std::span<double> dh) const {
  if (!rec.valid) throw UsageError("word head backward called without a forward pass");
  affine_.backward(rec.h, dlogits, dh);
}

Vec word_head(std::span<const double> h, const Tensor& W_ph, const Tensor& b_p) {
  if (W_ph.rank() != 2 || W_ph.cols() != h.size() || b_p.size() != W_ph.rows()) {
    throw DimensionError("word_head: inconsistent shapes");
  }
  Vec p(b_p.data().begin(), b_p.data().end());
  matvec_acc(W_ph.data(), W_ph.rows(), W_ph.cols(), h, p);
  kernels::softmax(p);
  return p;
}

double clamped_nll(double p) { return -std::log(std::max(p, kProbFloor)); }

}  // namespace sdcap
