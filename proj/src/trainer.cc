#include "sdcap/trainer.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "sdcap/checkpoint.h"
#include "sdcap/error.h"
#include "sdcap/rng.h"

namespace sdcap {

using nlohmann::json;

namespace {

const std::string kTrainablePrefix = "caption/";
const std::string kSummarizerPrefix_ = "summary/";

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream).
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

json config_to_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"decay_factor", c.decay_factor},
          {"patience", c.patience},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"embedding_size", c.embedding_size},
          {"hidden_size", c.hidden_size},
          {"init_scale", c.init_scale},
          {"clip_norm", c.clip_norm},
          {"summary_max_len", c.summary_max_len},
          {"criterion", c.criterion == ValCriterion::kNll ? "val_nll" : "val_bleu1"}};
}

Vocabulary vocab_from_metadata(const json& meta) {
  if (!meta.contains("vocab")) throw LoadError("checkpoint metadata has no vocabulary");
  auto words = meta.at("vocab").get<std::vector<std::string>>();
  return Vocabulary(std::move(words));
}

std::size_t feature_dim_of(const CaptionDataset& d) {
  if (d.records.empty()) throw ConfigError("train: empty dataset");
  return d.records.front().features.values.size();
}

class Loop {
 public:
  Loop(const CaptionDataset& d, const Vocabulary& vocab, const ParamStore& summarizer,
       const TrainConfig& cfg, const TrainHooks& hooks, bool fused)
      : d_(d), cfg_(cfg), hooks_(hooks), fused_(fused) {
    cfg.validate();
    if (d.indices(Split::kTrain).empty()) throw ConfigError("train: no training images");
    if (!hooks.validation_score && d.indices(Split::kVal).empty()) {
      throw ConfigError("train: validation split is empty");
    }
    model_.vocab = vocab;
    model_.summarizer = summarizer;
    const auto spec = trainable_spec(cfg, feature_dim_of(d), vocab.size());
    model_.trainable = init_params(spec, derive_seed(cfg.seed, 0), cfg.init_scale);
    model_.config_json = config_to_json(cfg).dump();
    for (const auto& r : d.records) {
      for (const auto& c : r.captions) {
        for (TokenId t : c) {
          if (t < 0 || static_cast<std::size_t>(t) >= vocab.size()) {
            throw ConfigError("train: caption token outside the vocabulary");
          }
        }
      }
    }
  }

  TrainResult run(std::vector<TrainingPair> pairs) {
    Captioner cap(model_.trainable);
    Fusion fusion(model_.trainable);
    if (fused_) cache_summaries();

    Rng rng(derive_seed(cfg_.seed, 2));
    double lr = cfg_.lr;
    double best = score(0);
    std::size_t stagnant = 0;
    TrainResult result;
    result.best = model_;
    result.best_epoch = 0;
    if (hooks_.on_best) hooks_.on_best(result.best, 0);

    for (std::size_t epoch = 1; epoch <= cfg_.epochs; ++epoch) {
      const auto t0 = std::chrono::steady_clock::now();
      rng.shuffle(std::span<TrainingPair>(pairs));
      PairLoss total;
      for (const auto& p : pairs) {
        const PairLoss l = step(cap, fusion, p, lr);
        total.nll += l.nll;
        total.tokens += l.tokens;
        total.padding += l.padding;
      }
      EpochRecord rec;
      rec.epoch = epoch;
      rec.train_nll = total.nll / static_cast<double>(total.tokens);
      rec.val_nll = d_.indices(Split::kVal).empty()
                        ? std::numeric_limits<double>::quiet_NaN()
                        : validation_nll(model_, d_, Split::kVal);
      rec.lr = lr;
      rec.padding = total.padding;
      if (cfg_.timing) {
        rec.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      }

      const double s = score(epoch, rec.val_nll);
      if (s < best) {
        best = s;
        stagnant = 0;
        result.best = model_;
        result.best_epoch = epoch;
        if (hooks_.on_best) hooks_.on_best(result.best, epoch);
      } else if (++stagnant >= cfg_.patience) {
        lr *= cfg_.decay_factor;
        stagnant = 0;
        spdlog::info("epoch {}: no improvement for {} epochs, lr -> {}", epoch, cfg_.patience, lr);
      }
      spdlog::info("epoch {} train_nll={:.6f} val_nll={:.6f} lr={} padding_rate={:.4f}", epoch,
                   rec.train_nll, rec.val_nll, rec.lr, rec.padding.rate());
      result.log.epochs.push_back(rec);
      if (hooks_.on_epoch) hooks_.on_epoch(rec);
    }
    result.final = model_;
    return result;
  }

 private:
  double score(std::size_t epoch, double val_nll = std::numeric_limits<double>::quiet_NaN()) {
    if (hooks_.validation_score) return hooks_.validation_score(epoch, model_);
    if (cfg_.criterion == ValCriterion::kBleu1) {
      return -evaluate_split(model_, d_, Split::kVal, cfg_.beam, cfg_.max_len).report.bleu[0];
    }
    return std::isnan(val_nll) ? validation_nll(model_, d_, Split::kVal) : val_nll;
  }

  void cache_summaries() {
    Summarizer sum(model_.summarizer);
    if (sum.vocab_size() != model_.vocab.size()) {
      throw ConfigError("train: summarizer vocabulary size " + std::to_string(sum.vocab_size()) +
                        " differs from " + std::to_string(model_.vocab.size()));
    }
    summaries_.assign(d_.records.size(), {});
    for (std::size_t i : d_.indices(Split::kTrain)) {
      summaries_[i] = sum.summarize(stacked_source(d_.records[i]), cfg_.summary_max_len).dists;
    }
  }

  PairLoss step(const Captioner& cap, const Fusion& fusion, const TrainingPair& p, double lr) {
    const ImageRecord& r = d_.records[p.record];
    model_.trainable.zero_grad();
    const PairLoss out = pair_loss(cap, fused_ ? &fusion : nullptr, r.features.values,
                                   r.captions[p.caption], fused_ ? &summaries_[p.record] : nullptr);
    if (!std::isfinite(out.nll)) throw NumericError("train: non-finite loss");

    const double norm = model_.trainable.grad_norm();
    if (!std::isfinite(norm)) throw NumericError("train: non-finite gradient");
    if (norm > cfg_.clip_norm) {
      spdlog::debug("clipping gradient norm {} to {}", norm, cfg_.clip_norm);
      model_.trainable.scale_grad(cfg_.clip_norm / norm);
    }
    model_.trainable.sgd_step(lr);
    return out;
  }

  const CaptionDataset& d_;
  const TrainConfig& cfg_;
  const TrainHooks& hooks_;
  bool fused_;
  ModelBundle model_;
  std::vector<DistSeq> summaries_;
};

}  // namespace

void TrainConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (!(decay_factor > 0.0 && decay_factor < 1.0)) {
    throw ConfigError("decay_factor must lie in (0, 1)");
  }
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (embedding_size < 1) throw ConfigError("embedding size must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (!(init_scale >= 0.0)) throw ConfigError("init scale must be nonnegative");
  if (beam < 1 || max_len < 1 || summary_max_len < 1) {
    throw ConfigError("beam and max lengths must be at least 1");
  }
}

std::string TrainLog::to_csv() const {
  std::string out = "epoch,train_nll,val_nll,lr,padding_rate,seconds\n";
  for (const auto& e : epochs) {
    out += fmt::format("{},{},{},{},{},{}\n", e.epoch, e.train_nll, e.val_nll, e.lr,
                       e.padding.rate(), e.seconds);
  }
  return out;
}

void TrainLog::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  out << to_csv();
}

PairLoss pair_loss(const Captioner& cap, const Fusion* fusion, std::span<const double> features,
                   std::span<const TokenId> target, const DistSeq* ps) {
  const Captioner::Trace trace = cap.forward_train(features, target);
  const std::size_t L = trace.dists.size();
  std::vector<Vec> dprobs(L, Vec(trace.dists.front().size(), 0.0));
  PairLoss out;
  out.tokens = L;

  if (fusion == nullptr || ps == nullptr) {
    for (std::size_t k = 0; k < L; ++k) {
      const TokenId w = target[k + 1];
      const double pw = trace.dists[k][w];
      out.nll += clamped_nll(pw);
      if (pw > kProbFloor) dprobs[k][w] = -1.0 / pw;
    }
    const Vec de = cap.backward(trace, dprobs);
    cap.backward_image(trace, de);
    return out;
  }

  const std::size_t S = ps->size();
  const std::size_t steps = std::max(L, S);
  out.padding = padding_count(L, S);
  const Fusion::Trace ftrace = fusion->forward_train(trace.embedding, steps);
  const DistSeq blended = blend(trace.dists, *ps, ftrace.alphas);
  Vec dalpha(steps, 0.0);
  for (std::size_t k = 0; k < L; ++k) {
    const TokenId w = target[k + 1];
    out.nll += clamped_nll(blended[k][w]);
    if (k < S) {
      // Both streams sum to one, so the renormalizer is identically 1 and
      // contributes no gradient.
      const double a = ftrace.alphas[k];
      const double m = a * trace.dists[k][w] + (1.0 - a) * (*ps)[k][w];
      if (m > kProbFloor) {
        dprobs[k][w] = -a / m;
        dalpha[k] = -(trace.dists[k][w] - (*ps)[k][w]) / m;
      }
    } else {
      const double pw = trace.dists[k][w];
      if (pw > kProbFloor) dprobs[k][w] = -1.0 / pw;
    }
  }
  Vec de = cap.backward(trace, dprobs);
  kernels::axpy(1.0, fusion->backward(ftrace, dalpha), de);
  cap.backward_image(trace, de);
  return out;
}

double nll_loss(const DistSeq& P, std::span<const TokenId> target) {
  if (target.empty()) throw DimensionError("nll_loss: empty target");
  if (P.size() + 1 < target.size()) {
    throw DimensionError("nll_loss: " + std::to_string(P.size()) + " distributions for " +
                         std::to_string(target.size() - 1) + " target words");
  }
  double loss = 0.0;
  for (std::size_t k = 1; k < target.size(); ++k) {
    const Vec& p = P[k - 1];
    const TokenId w = target[k];
    if (w < 0 || static_cast<std::size_t>(w) >= p.size()) {
      throw DimensionError("nll_loss: target word outside the distribution");
    }
    if (p[w] < kProbFloor) spdlog::warn("nll_loss: probability {} clamped at {}", p[w], kProbFloor);
    loss += clamped_nll(p[w]);
  }
  return loss;
}

std::vector<ParamSpec> trainable_spec(const TrainConfig& cfg, std::size_t feature_dim,
                                      std::size_t vocab_size) {
  CaptionerConfig cc;
  cc.feature_dim = feature_dim;
  cc.embedding_size = cfg.embedding_size;
  cc.hidden_size = cfg.hidden_size;
  cc.vocab_size = vocab_size;
  auto spec = Captioner::param_spec(cc);
  for (auto& s : Fusion::param_spec(cfg.embedding_size)) spec.push_back(std::move(s));
  return spec;
}

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle) {
  Checkpoint ckpt;
  json meta = {{"kind", "caption_model"}, {"vocab", bundle.vocab.words()}};
  meta["config"] = bundle.config_json.empty() ? json::object() : json::parse(bundle.config_json);
  ckpt.metadata = meta.dump();
  append_store(ckpt, bundle.trainable, kTrainablePrefix);
  append_store(ckpt, bundle.summarizer, kSummarizerPrefix_);
  write_checkpoint(path, ckpt);
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  const Checkpoint ckpt = read_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.metadata);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": bad metadata: " + e.what());
  }
  if (meta.value("kind", "") != "caption_model") {
    throw LoadError(path.string() + " is not a caption model checkpoint");
  }
  ModelBundle b;
  b.vocab = vocab_from_metadata(meta);
  b.trainable = extract_store(ckpt, kTrainablePrefix);
  b.summarizer = extract_store(ckpt, kSummarizerPrefix_);
  b.config_json = meta.at("config").dump();
  // Constructing the models validates names and shapes.
  Captioner cap(b.trainable);
  if (cap.vocab_size() != b.vocab.size()) throw LoadError("checkpoint vocabulary mismatch");
  return b;
}

void save_summarizer(const std::filesystem::path& path, const ParamStore& store,
                     const Vocabulary& vocab) {
  Checkpoint ckpt;
  ckpt.metadata = json{{"kind", "summarizer"}, {"vocab", vocab.words()}}.dump();
  append_store(ckpt, store);
  write_checkpoint(path, ckpt);
}

ParamStore load_summarizer(const std::filesystem::path& path, const Vocabulary& vocab) {
  const Checkpoint ckpt = read_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.metadata);
  } catch (const json::exception& e) {
    throw LoadError(path.string() + ": bad metadata: " + e.what());
  }
  if (meta.value("kind", "") != "summarizer") {
    throw LoadError(path.string() + " is not a summarizer checkpoint");
  }
  if (!(vocab_from_metadata(meta) == vocab)) {
    throw LoadError(path.string() + " was trained with a different vocabulary");
  }
  ParamStore store = extract_store(ckpt);
  Summarizer check(store);
  return store;
}

TokenSeq generate_caption(ModelBundle& bundle, std::span<const double> features,
                          std::size_t beam, std::size_t max_len) {
  Captioner cap(bundle.trainable);
  if (features.size() != cap.feature_dim()) {
    throw DimensionError("feature dimension " + std::to_string(features.size()) +
                         " does not match the model's " + std::to_string(cap.feature_dim()));
  }
  const LstmState init = cap.prime(cap.image_embed(features));
  const StepFn<LstmState> step = [&cap](TokenId prev, const LstmState& s) {
    return cap.step(prev, s);
  };
  return beam_search(step, init, beam, max_len).tokens;
}

SplitEvaluation evaluate_split(ModelBundle& bundle, const CaptionDataset& d, Split split,
                               std::size_t beam, std::size_t max_len) {
  SplitEvaluation ev;
  ev.records = d.indices(split);
  std::vector<metrics::EvalPair> pairs;
  for (std::size_t i : ev.records) {
    const ImageRecord& r = d.records[i];
    TokenSeq tokens = generate_caption(bundle, r.features.values, beam, max_len);
    metrics::EvalPair p;
    p.candidate = decode_words(tokens, bundle.vocab);
    for (const auto& c : r.captions) p.references.push_back(decode_words(c, bundle.vocab));
    pairs.push_back(std::move(p));
    ev.captions.push_back(std::move(tokens));
  }
  if (!pairs.empty()) ev.report = metrics::evaluate_corpus(pairs);
  return ev;
}

double validation_nll(ModelBundle& bundle, const CaptionDataset& d, Split split) {
  Captioner cap(bundle.trainable);
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i : d.indices(split)) {
    const ImageRecord& r = d.records[i];
    const Vec e = cap.image_embed(r.features.values);
    for (const auto& c : r.captions) {
      total += nll_loss(cap.forward(e, c), c);
      tokens += c.size() - 1;
    }
  }
  if (tokens == 0) throw ConfigError("validation split has no captions");
  return total / static_cast<double>(tokens);
}

TrainResult train(const CaptionDataset& d, const Vocabulary& vocab,
                  const ParamStore& summarizer, const TrainConfig& cfg,
                  const TrainHooks& hooks) {
  Loop loop(d, vocab, summarizer, cfg, hooks, true);
  return loop.run(make_training_pairs(d, derive_seed(cfg.seed, 1)));
}

TrainResult ablate_step1_single_caption(const CaptionDataset& d, const Vocabulary& vocab,
                                        const ParamStore& summarizer,
                                        const TrainConfig& cfg, const TrainHooks& hooks) {
  Loop loop(d, vocab, summarizer, cfg, hooks, false);
  Rng rng(derive_seed(cfg.seed, 3));
  std::vector<TrainingPair> pairs;
  for (std::size_t i : d.indices(Split::kTrain)) {
    const TrainingPair keep{i, rng.below(d.records[i].captions.size())};
    for (std::size_t k = 0; k < kPairsPerImage; ++k) pairs.push_back(keep);
  }
  return loop.run(std::move(pairs));
}

}  // namespace sdcap
