#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sdcap/captioner.h"
#include "sdcap/dataio.h"
#include "sdcap/decoder.h"
#include "sdcap/fusion.h"
#include "sdcap/metrics.h"
#include "sdcap/summarizer.h"
#include "sdcap/vocab.h"

namespace sdcap {

// What counts as a validation improvement.
enum class ValCriterion { kNll, kBleu1 };

struct TrainConfig {
  double lr = 1e-3;
  double decay_factor = 0.8;
  std::size_t patience = 8;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  std::size_t embedding_size = 512;
  std::size_t hidden_size = 0;  // 0: same as embedding_size
  double init_scale = 0.1;
  double clip_norm = 5.0;
  std::size_t summary_max_len = kDefaultMaxLen;
  ValCriterion criterion = ValCriterion::kNll;
  // Used only when criterion is kBleu1.
  std::size_t beam = kDefaultBeam;
  std::size_t max_len = kDefaultMaxLen;
  // Record wall time in the log. Off by default so that logs are
  // byte-identical across runs.
  bool timing = false;

  // Throws ConfigError.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // mean per token
  double val_nll = 0.0;    // mean per token, P^c only
  double lr = 0.0;         // rate used during the epoch
  PaddingCount padding;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;

  // Header: epoch,train_nll,val_nll,lr,padding_rate,seconds
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;
};

// -sum_k log P_k[target[k+1]], probabilities clamped at 1e-12. Throws
// DimensionError when P is shorter than target minus START.
double nll_loss(const DistSeq& P, std::span<const TokenId> target);

struct PairLoss {
  double nll = 0.0;
  std::size_t tokens = 0;
  PaddingCount padding;
};

// NLL of one (image, caption) pair with its gradient accumulated into the
// captioner (and fusion) parameters. With `fusion` and `ps` set, the loss is
// taken under blend(P^c, P^s, alpha); otherwise under P^c alone.
PairLoss pair_loss(const Captioner& cap, const Fusion* fusion, std::span<const double> features,
                   std::span<const TokenId> target, const DistSeq* ps);

// Everything needed to caption images and resume: the vocabulary, the
// trainable captioner + fusion parameters and the frozen summarizer.
struct ModelBundle {
  Vocabulary vocab;
  ParamStore trainable;
  ParamStore summarizer;
  std::string config_json;  // informational
};

void save_bundle(const std::filesystem::path& path, const ModelBundle& bundle);
ModelBundle load_bundle(const std::filesystem::path& path);

// Standalone summarizer checkpoint (the output of pretraining).
void save_summarizer(const std::filesystem::path& path, const ParamStore& store,
                     const Vocabulary& vocab);
ParamStore load_summarizer(const std::filesystem::path& path, const Vocabulary& vocab);

// Beam-search caption from P^c alone.
TokenSeq generate_caption(ModelBundle& bundle, std::span<const double> features,
                          std::size_t beam = kDefaultBeam,
                          std::size_t max_len = kDefaultMaxLen);

struct SplitEvaluation {
  std::vector<std::size_t> records;
  std::vector<TokenSeq> captions;
  metrics::Report report;
};

SplitEvaluation evaluate_split(ModelBundle& bundle, const CaptionDataset& d, Split split,
                               std::size_t beam = kDefaultBeam,
                               std::size_t max_len = kDefaultMaxLen);

// Mean per-token P^c NLL over every caption of the records in `split`.
double validation_nll(ModelBundle& bundle, const CaptionDataset& d, Split split = Split::kVal);

struct TrainHooks {
  // Replaces the validation score (lower is better) after each epoch; epoch
  // 0 is the untrained model.
  std::function<double(std::size_t epoch, ModelBundle& model)> validation_score;
  // Called with the new best model whenever validation improves, and once
  // for the untrained model.
  std::function<void(const ModelBundle& best, std::size_t epoch)> on_best;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  ModelBundle best;   // lowest validation score
  ModelBundle final;  // after the last epoch
  std::size_t best_epoch = 0;
  TrainLog log;
};

// Joint training of captioner and fusion against the blended distributions;
// the summarizer store is copied and never updated.
TrainResult train(const CaptionDataset& d, const Vocabulary& vocab,
                  const ParamStore& summarizer, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

// Same loop with fusion and summarizer disabled (pure P^c loss) and one
// seeded-random caption kept per training image.
TrainResult ablate_step1_single_caption(const CaptionDataset& d, const Vocabulary& vocab,
                                        const ParamStore& summarizer,
                                        const TrainConfig& cfg, const TrainHooks& hooks = {});

// Parameter layout of the trainable part for a given vocabulary and feature
// dimension.
std::vector<ParamSpec> trainable_spec(const TrainConfig& cfg, std::size_t feature_dim,
                                      std::size_t vocab_size);

}  // namespace sdcap
