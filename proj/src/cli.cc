#include "sdcap/cli.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "sdcap/dataio.h"
#include "sdcap/error.h"
#include "sdcap/metrics.h"
#include "sdcap/selfcheck.h"
#include "sdcap/summarizer.h"
#include "sdcap/trainer.h"

namespace sdcap {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string features, captions, vocab, checkpoint, summarizer, corpus, input, out;
  std::uint64_t seed = 42;
  std::size_t epochs = 0;  // 0: per-command default
  std::optional<double> lr;
  std::size_t beam = kDefaultBeam;
  std::size_t max_len = kDefaultMaxLen;
  std::size_t embedding_size = 512;
  std::size_t hidden_size = 0;
  double decay = 0.8;
  std::size_t patience = 8;
  double redundancy = 0.6;
  std::size_t n_images = 40;
  std::size_t corpus_pairs = 50;
  std::size_t feature_dim = kDefaultFeatureDim;
  std::size_t summary_embedding = 32;
  std::size_t summary_hidden = 64;
  std::string criterion = "val_nll";
  std::string split = "test";
  bool timing = false;
};

void require_file(const std::string& path, const char* flag) {
  if (path.empty()) throw ConfigError(std::string(flag) + " is required");
  if (!fs::exists(path)) throw ConfigError(std::string(flag) + ": no such file: " + path);
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string(flag) + " is required");
}

void emit(std::ostream& out, const json& j) { out << j.dump(2) << '\n'; }

json report_json(const metrics::Report& r) {
  json j = {{"bleu_1", r.bleu[0]},
            {"bleu_2", r.bleu[1]},
            {"bleu_3", r.bleu[2]},
            {"bleu_4", r.bleu[3]},
            {"meteor", r.meteor},
            {"rouge_l", r.rouge_l},
            {"pairs", r.pairs}};
  j["cider"] = r.cider ? json(*r.cider) : json(nullptr);
  return j;
}

std::vector<std::string> caption_strings(const std::vector<CaptionRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) out.insert(out.end(), r.captions.begin(), r.captions.end());
  return out;
}

std::vector<std::string> corpus_strings(const std::vector<ArticleRow>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows) {
    out.push_back(r.source);
    out.push_back(r.summary);
  }
  return out;
}

TrainConfig train_config(const Options& o) {
  TrainConfig c;
  c.lr = o.lr.value_or(1e-3);
  c.decay_factor = o.decay;
  c.patience = o.patience;
  c.epochs = o.epochs ? o.epochs : 50;
  c.seed = o.seed;
  c.embedding_size = o.embedding_size;
  c.hidden_size = o.hidden_size;
  c.beam = o.beam;
  c.max_len = o.max_len;
  c.timing = o.timing;
  if (o.criterion == "val_nll") {
    c.criterion = ValCriterion::kNll;
  } else if (o.criterion == "val_bleu1") {
    c.criterion = ValCriterion::kBleu1;
  } else {
    throw ConfigError("--criterion must be val_nll or val_bleu1");
  }
  c.validate();
  return c;
}

json train_config_json(const TrainConfig& c) {
  return {{"lr", c.lr},
          {"decay_factor", c.decay_factor},
          {"patience", c.patience},
          {"epochs", c.epochs},
          {"embedding_size", c.embedding_size},
          {"hidden_size", c.hidden_size},
          {"clip_norm", c.clip_norm},
          {"criterion", c.criterion == ValCriterion::kNll ? "val_nll" : "val_bleu1"},
          {"beam", c.beam},
          {"max_len", c.max_len}};
}

int cmd_fixture(const Options& o, std::ostream& out) {
  require(o.out, "--out");
  const fs::path dir(o.out);
  fs::create_directories(dir);
  const Fixture fx = make_fixture(o.n_images, o.redundancy, o.seed, o.feature_dim);
  const auto corpus = make_headline_corpus(o.corpus_pairs, o.seed + 1);
  const Vocabulary vocab = build_vocab(caption_strings(fx.captions), corpus_strings(corpus));
  write_features(dir / "features.jsonl", fx.features);
  write_captions(dir / "captions.jsonl", fx.captions);
  write_corpus(dir / "corpus.jsonl", corpus);
  vocab.save(dir / "vocab.txt");
  emit(out, {{"command", "fixture"},
             {"seed", o.seed},
             {"config",
              {{"n_images", o.n_images},
               {"redundancy", o.redundancy},
               {"feature_dim", o.feature_dim},
               {"corpus_pairs", o.corpus_pairs}}},
             {"files",
              {{"features", (dir / "features.jsonl").string()},
               {"captions", (dir / "captions.jsonl").string()},
               {"corpus", (dir / "corpus.jsonl").string()},
               {"vocab", (dir / "vocab.txt").string()}}},
             {"vocab_size", vocab.size()}});
  return 0;
}

int cmd_pretrain(const Options& o, std::ostream& out) {
  require_file(o.corpus, "--corpus");
  require_file(o.vocab, "--vocab");
  require(o.out, "--out");
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  std::vector<SummaryPair> pairs;
  for (const auto& row : read_corpus(o.corpus)) pairs.push_back(encode_article(row, vocab));

  SummarizerConfig sc;
  sc.vocab_size = vocab.size();
  sc.embedding_size = o.summary_embedding;
  sc.hidden_size = o.summary_hidden;
  PretrainConfig pc;
  pc.epochs = o.epochs ? o.epochs : pc.epochs;
  pc.lr = o.lr.value_or(pc.lr);
  pc.seed = o.seed;
  spdlog::info("pretrain: {} pairs, seed {}, epochs {}, lr {}", pairs.size(), pc.seed, pc.epochs,
               pc.lr);

  ParamStore store = make_summarizer_store(sc, o.seed);
  Summarizer model(store);
  const auto history = pretrain(model, store, pairs, pc);
  save_summarizer(o.out, store, vocab);
  emit(out, {{"command", "pretrain"},
             {"seed", o.seed},
             {"config",
              {{"epochs", pc.epochs},
               {"lr", pc.lr},
               {"clip_norm", pc.clip_norm},
               {"embedding_size", sc.embedding_size},
               {"hidden_size", sc.hidden_size}}},
             {"pairs", pairs.size()},
             {"initial_nll", history.empty() ? 0.0 : history.front()},
             {"final_nll", history.empty() ? 0.0 : history.back()},
             {"exact_match", exact_match_rate(model, pairs, o.max_len)},
             {"checkpoint", o.out}});
  return 0;
}

int cmd_train(const Options& o, std::ostream& out, bool ablate) {
  require_file(o.features, "--features");
  require_file(o.captions, "--captions");
  require_file(o.vocab, "--vocab");
  require(o.checkpoint, "--checkpoint");
  if (!ablate) require_file(o.summarizer, "--summarizer");
  const TrainConfig cfg = train_config(o);
  const Vocabulary vocab = Vocabulary::load(o.vocab);
  const CaptionDataset d = load_dataset(o.features, o.captions, vocab, o.seed);

  ParamStore summarizer;
  if (!o.summarizer.empty()) summarizer = load_summarizer(o.summarizer, vocab);
  spdlog::info("{}: seed {}, config {}", ablate ? "ablate" : "train", o.seed,
               train_config_json(cfg).dump());

  TrainHooks hooks;
  hooks.on_best = [&](const ModelBundle& best, std::size_t) { save_bundle(o.checkpoint, best); };
  const TrainResult r = ablate ? ablate_step1_single_caption(d, vocab, summarizer, cfg, hooks)
                               : train(d, vocab, summarizer, cfg, hooks);
  if (!o.out.empty()) r.log.write_csv(o.out);

  ModelBundle best = r.best;
  const SplitEvaluation val = evaluate_split(best, d, Split::kVal, cfg.beam, cfg.max_len);
  const auto& last = r.log.epochs.back();
  emit(out, {{"command", ablate ? "ablate" : "train"},
             {"seed", o.seed},
             {"config", train_config_json(cfg)},
             {"dataset",
              {{"train", d.indices(Split::kTrain).size()},
               {"val", d.indices(Split::kVal).size()},
               {"test", d.indices(Split::kTest).size()},
               {"unknown_words", d.unknown_words}}},
             {"best_epoch", r.best_epoch},
             {"final_train_nll", last.train_nll},
             {"final_val_nll", last.val_nll},
             {"final_lr", last.lr},
             {"padding_rate", last.padding.rate()},
             {"val", report_json(val.report)},
             {"checkpoint", o.checkpoint},
             {"log", o.out.empty() ? json(nullptr) : json(o.out)}});
  return 0;
}

int cmd_caption(const Options& o, std::ostream& out) {
  require_file(o.features, "--features");
  require_file(o.checkpoint, "--checkpoint");
  if (o.beam < 1 || o.max_len < 1) throw ConfigError("--beam and --max-len must be at least 1");
  ModelBundle bundle = load_bundle(o.checkpoint);
  json rows = json::array();
  std::vector<json> lines;
  for (const auto& f : read_features(o.features)) {
    const TokenSeq t = generate_caption(bundle, f.features, o.beam, o.max_len);
    const std::string text = decode(t, bundle.vocab);
    rows.push_back({{"image_id", f.image_id}, {"caption", text}});
  }
  if (!o.out.empty()) {
    std::ofstream f(o.out, std::ios::trunc);
    if (!f) throw LoadError("cannot write " + o.out);
    for (const auto& r : rows) f << r.dump() << '\n';
  }
  emit(out, {{"command", "caption"},
             {"seed", o.seed},
             {"config", {{"beam", o.beam}, {"max_len", o.max_len}}},
             {"captions", rows}});
  return 0;
}

int cmd_evaluate(const Options& o, std::ostream& out) {
  std::vector<metrics::EvalPair> pairs;
  json config;
  if (!o.input.empty()) {
    require_file(o.input, "--input");
    std::ifstream in(o.input);
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception& e) {
        throw LoadError(o.input + ": " + e.what());
      }
      metrics::EvalPair p;
      p.candidate = normalize_words(j.at("candidate").get<std::string>());
      for (const auto& r : j.at("references")) {
        p.references.push_back(normalize_words(r.get<std::string>()));
      }
      pairs.push_back(std::move(p));
    }
    config = {{"input", o.input}};
  } else {
    require_file(o.features, "--features");
    require_file(o.captions, "--captions");
    require_file(o.checkpoint, "--checkpoint");
    ModelBundle bundle = load_bundle(o.checkpoint);
    const CaptionDataset d = load_dataset(o.features, o.captions, bundle.vocab, o.seed);
    Split split = Split::kTest;
    if (o.split == "train") {
      split = Split::kTrain;
    } else if (o.split == "val") {
      split = Split::kVal;
    } else if (o.split != "test") {
      throw ConfigError("--split must be train, val or test");
    }
    const SplitEvaluation ev = evaluate_split(bundle, d, split, o.beam, o.max_len);
    emit(out, {{"command", "evaluate"},
               {"seed", o.seed},
               {"config", {{"split", o.split}, {"beam", o.beam}, {"max_len", o.max_len}}},
               {"report", report_json(ev.report)}});
    return 0;
  }
  if (pairs.empty()) throw ConfigError("evaluate: no pairs in " + o.input);
  const metrics::Report r = metrics::evaluate_corpus(pairs);
  emit(out, {{"command", "evaluate"},
             {"seed", o.seed},
             {"config", config},
             {"report", report_json(r)}});
  return 0;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto checks = layer_grad_checks(o.seed);
  double worst = 0.0;
  json layers = json::object();
  for (const auto& c : checks) {
    worst = std::max(worst, c.max_rel_error);
    layers[c.layer] = c.max_rel_error;
  }
  emit(out, {{"command", "gradcheck"},
             {"seed", o.seed},
             {"config", {{"eps", 1e-5}}},
             {"layers", layers},
             {"max_rel_error", worst}});
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Summarization-driven image captioning"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) { c->add_option("--seed", o.seed, "Seed for all randomness"); };
  auto add_data = [&](CLI::App* c) {
    c->add_option("--features", o.features, "Image features (JSON lines)");
    c->add_option("--captions", o.captions, "Captions (JSON lines)");
  };

  auto* fixture = app.add_subcommand("fixture", "Write a synthetic dataset and vocabulary");
  add_seed(fixture);
  fixture->add_option("--out", o.out, "Output directory");
  fixture->add_option("--n-images", o.n_images, "Number of images");
  fixture->add_option("--redundancy", o.redundancy, "Fraction of duplicated captions");
  fixture->add_option("--corpus-pairs", o.corpus_pairs, "Headline corpus size");
  fixture->add_option("--feature-dim", o.feature_dim, "Feature dimension");

  auto* pre = app.add_subcommand("pretrain", "Pretrain the summarizer");
  add_seed(pre);
  pre->add_option("--corpus", o.corpus, "Article/headline pairs (JSON lines)");
  pre->add_option("--vocab", o.vocab, "Vocabulary file");
  pre->add_option("--out", o.out, "Summarizer checkpoint to write");
  pre->add_option("--epochs", o.epochs, "Epochs (default 300)");
  pre->add_option("--lr", o.lr, "Learning rate (default 0.3)");
  pre->add_option("--max-len", o.max_len, "Summary length cap for the exact-match report");
  pre->add_option("--summary-embedding", o.summary_embedding, "Summarizer embedding size");
  pre->add_option("--summary-hidden", o.summary_hidden, "Summarizer hidden size");

  auto add_train = [&](CLI::App* c) {
    add_seed(c);
    add_data(c);
    c->add_option("--vocab", o.vocab, "Vocabulary file");
    c->add_option("--checkpoint", o.checkpoint, "Best-validation model to write");
    c->add_option("--out", o.out, "Training log (CSV)");
    c->add_option("--epochs", o.epochs, "Epochs (default 50)");
    c->add_option("--lr", o.lr, "Initial learning rate (default 1e-3)");
    c->add_option("--decay", o.decay, "Plateau decay factor");
    c->add_option("--patience", o.patience, "Stagnant epochs before decay");
    c->add_option("--embedding-size", o.embedding_size, "Word embedding size W");
    c->add_option("--hidden-size", o.hidden_size, "Caption LSTM size (default W)");
    c->add_option("--criterion", o.criterion, "val_nll or val_bleu1");
    c->add_option("--beam", o.beam, "Beam size for validation decoding");
    c->add_option("--max-len", o.max_len, "Caption length cap");
    c->add_flag("--timing", o.timing, "Record wall time in the log");
  };
  auto* tr = app.add_subcommand("train", "Joint training with the summarized stream");
  add_train(tr);
  tr->add_option("--summarizer", o.summarizer, "Pretrained summarizer checkpoint");
  auto* ab = app.add_subcommand("ablate", "Single-caption training without fusion");
  add_train(ab);
  ab->add_option("--summarizer", o.summarizer, "Optional summarizer to carry along");

  auto* cap = app.add_subcommand("caption", "Caption images with a trained model");
  add_seed(cap);
  cap->add_option("--features", o.features, "Image features (JSON lines)");
  cap->add_option("--checkpoint", o.checkpoint, "Trained model");
  cap->add_option("--beam", o.beam, "Beam size");
  cap->add_option("--max-len", o.max_len, "Caption length cap");
  cap->add_option("--out", o.out, "Also write captions as JSON lines");

  auto* ev = app.add_subcommand("evaluate", "Score captions");
  add_seed(ev);
  ev->add_option("--input", o.input, "Candidates and references (JSON lines)");
  add_data(ev);
  ev->add_option("--checkpoint", o.checkpoint, "Trained model to decode with");
  ev->add_option("--split", o.split, "train, val or test");
  ev->add_option("--beam", o.beam, "Beam size");
  ev->add_option("--max-len", o.max_len, "Caption length cap");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer");
  add_seed(gc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }

  try {
    if (fixture->parsed()) return cmd_fixture(o, out);
    if (pre->parsed()) return cmd_pretrain(o, out);
    if (tr->parsed()) return cmd_train(o, out, false);
    if (ab->parsed()) return cmd_train(o, out, true);
    if (cap->parsed()) return cmd_caption(o, out);
    if (ev->parsed()) return cmd_evaluate(o, out);
    if (gc->parsed()) return cmd_gradcheck(o, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace sdcap
