#include "sdcap/dataio.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "sdcap/error.h"
#include "sdcap/rng.h"

namespace sdcap {

using nlohmann::json;

namespace {

template <class F>
void for_each_json_line(const std::filesystem::path& path, F&& f) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      f(json::parse(line));
    } catch (const json::exception& e) {
      throw LoadError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void write_lines(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw LoadError("cannot write " + path.string());
  for (const auto& r : rows) out << r.dump() << '\n';
}

struct SceneClass {
  const char* name;
  std::vector<const char*> templates;
};

const std::vector<SceneClass>& scene_bank() {
  static const std::vector<SceneClass> bank = {
      {"airport",
       {"many planes are parked at the airport", "an airport with several white planes",
        "some planes are near the terminal building", "the runway of the airport is long",
        "several airplanes stand beside a large terminal",
        "there is an airport with many planes"}},
      {"beach",
       {"a yellow beach is next to the blue sea", "white waves crash on the sandy beach",
        "the beach lies between the sea and trees", "some people are walking on the beach",
        "a long beach with clear blue water", "the blue ocean meets a curved beach"}},
      {"farmland",
       {"green farmland is divided into many pieces",
        "several fields of farmland are near a road",
        "the farmland has rectangular green and brown fields",
        "many crops grow in the regular farmland",
        "some farmhouses are among the green fields",
        "neat farmland lines up with a few houses"}},
      {"forest",
       {"a dense forest with many green trees", "many tall trees grow in the forest",
        "the forest is dark green and thick", "a road passes through the green forest",
        "lush trees cover the whole forest", "there are many trees in the quiet forest"}},
      {"harbor",
       {"many boats are docked in the harbor", "the harbor has several white boats",
        "some ships are moored near the pier", "boats float on the water of the harbor",
        "a busy harbor with many small boats", "several yachts are parked along the dock"}},
      {"residential",
       {"many houses are in the residential area",
        "the residential area has dense buildings and roads",
        "some green trees are among the houses", "rows of houses line the straight streets",
        "a quiet residential area with many roofs",
        "several buildings and cars are near the road"}},
      {"river",
       {"a river flows through the green land", "the curved river has some bridges",
        "a long river runs beside the fields", "the river is crossed by a bridge",
        "green trees grow along the winding river", "the water of the river is dark"}},
      {"stadium",
       {"a large stadium is near some roads", "the stadium has a green football field",
        "an oval stadium is surrounded by buildings",
        "many seats surround the playground of the stadium",
        "a stadium with a red running track", "the big stadium is next to a parking lot"}},
  };
  return bank;
}

void fnv(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
}

}  // namespace

std::vector<FeatureRow> read_features(const std::filesystem::path& path) {
  std::vector<FeatureRow> rows;
  for_each_json_line(path, [&](const json& j) {
    rows.push_back({j.at("image_id").get<std::string>(), j.at("features").get<Vec>()});
  });
  return rows;
}

std::vector<CaptionRow> read_captions(const std::filesystem::path& path) {
  std::vector<CaptionRow> rows;
  for_each_json_line(path, [&](const json& j) {
    rows.push_back({j.at("image_id").get<std::string>(),
                    j.at("captions").get<std::vector<std::string>>()});
  });
  return rows;
}

std::vector<ArticleRow> read_corpus(const std::filesystem::path& path) {
  std::vector<ArticleRow> rows;
  for_each_json_line(path, [&](const json& j) {
    rows.push_back({j.at("source").get<std::string>(), j.at("summary").get<std::string>()});
  });
  return rows;
}

void write_features(const std::filesystem::path& path, const std::vector<FeatureRow>& rows) {
  std::vector<json> out;
  for (const auto& r : rows) out.push_back({{"image_id", r.image_id}, {"features", r.features}});
  write_lines(path, out);
}

void write_captions(const std::filesystem::path& path, const std::vector<CaptionRow>& rows) {
  std::vector<json> out;
  for (const auto& r : rows) out.push_back({{"image_id", r.image_id}, {"captions", r.captions}});
  write_lines(path, out);
}

void write_corpus(const std::filesystem::path& path, const std::vector<ArticleRow>& rows) {
  std::vector<json> out;
  for (const auto& r : rows) out.push_back({{"source", r.source}, {"summary", r.summary}});
  write_lines(path, out);
}

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "?";
}

std::vector<std::size_t> CaptionDataset::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].split == s) out.push_back(i);
  }
  return out;
}

CaptionDataset make_dataset(const std::vector<FeatureRow>& features,
                            const std::vector<CaptionRow>& captions, const Vocabulary& vocab,
                            std::uint64_t split_seed) {
  std::unordered_map<std::string, const CaptionRow*> by_id;
  for (const auto& c : captions) {
    if (!by_id.emplace(c.image_id, &c).second) {
      throw LoadError("duplicate image id in captions: " + c.image_id);
    }
  }
  CaptionDataset d;
  std::unordered_map<std::string, bool> seen;
  std::size_t dim = 0;
  for (const auto& f : features) {
    if (!seen.emplace(f.image_id, true).second) {
      throw LoadError("duplicate image id in features: " + f.image_id);
    }
    auto it = by_id.find(f.image_id);
    if (it == by_id.end()) throw LoadError("image id has no captions: " + f.image_id);
    if (it->second->captions.empty()) throw LoadError("image id has an empty caption set: " + f.image_id);
    if (d.records.empty()) dim = f.features.size();
    if (f.features.size() != dim || dim == 0) {
      throw LoadError("inconsistent feature dimension for " + f.image_id);
    }
    for (double v : f.features) {
      if (!std::isfinite(v)) throw LoadError("non-finite feature value for " + f.image_id);
    }
    ImageRecord rec;
    rec.image_id = f.image_id;
    rec.features = {f.features, "features"};
    for (const auto& text : it->second->captions) {
      TokenSeq t = encode(text, vocab);
      if (t.size() <= 2) throw LoadError("empty caption for " + f.image_id);
      d.unknown_words += static_cast<std::size_t>(std::count(t.begin(), t.end(), kUnk));
      rec.captions.push_back(std::move(t));
    }
    d.records.push_back(std::move(rec));
  }
  for (const auto& c : captions) {
    if (!seen.count(c.image_id)) throw LoadError("image id has no features: " + c.image_id);
  }
  if (d.unknown_words > 0) {
    spdlog::warn("{} caption words are out of vocabulary and map to <unk>", d.unknown_words);
  }

  std::vector<std::size_t> order(d.records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(split_seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n = order.size();
  const auto n_val = static_cast<std::size_t>(std::floor(kValFraction * static_cast<double>(n)));
  const std::size_t n_test = n_val;
  for (std::size_t k = 0; k < n; ++k) {
    Split s = Split::kTrain;
    if (k < n_val) {
      s = Split::kVal;
    } else if (k < n_val + n_test) {
      s = Split::kTest;
    }
    d.records[order[k]].split = s;
  }
  return d;
}

CaptionDataset load_dataset(const std::filesystem::path& features_path,
                            const std::filesystem::path& captions_path,
                            const Vocabulary& vocab, std::uint64_t split_seed) {
  return make_dataset(read_features(features_path), read_captions(captions_path), vocab,
                      split_seed);
}

std::uint64_t dataset_checksum(const CaptionDataset& d) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& r : d.records) {
    fnv(h, r.image_id.data(), r.image_id.size());
    const auto s = static_cast<int>(r.split);
    fnv(h, &s, sizeof(s));
    for (double v : r.features.values) {
      const auto bits = std::bit_cast<std::uint64_t>(v);
      fnv(h, &bits, sizeof(bits));
    }
    for (const auto& c : r.captions) fnv(h, c.data(), c.size() * sizeof(TokenId));
  }
  return h;
}

std::vector<TrainingPair> make_training_pairs(const CaptionDataset& d, std::uint64_t seed,
                                              std::size_t per_image) {
  Rng rng(seed);
  std::vector<TrainingPair> pairs;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    if (r.split != Split::kTrain) continue;
    const std::size_t n = r.captions.size();
    for (std::size_t c = 0; c < n; ++c) pairs.push_back({i, c});
    for (std::size_t k = n; k < per_image; ++k) pairs.push_back({i, rng.below(n)});
  }
  return pairs;
}

TokenSeq stacked_source(const ImageRecord& record) { return stack_captions(record.captions); }

Fixture make_fixture(std::size_t n_images, double redundancy, std::uint64_t seed,
                     std::size_t feature_dim) {
  if (n_images < 10) throw ConfigError("fixture needs at least 10 images");
  if (!(redundancy >= 0.0 && redundancy <= 1.0)) throw ConfigError("redundancy must lie in [0, 1]");
  if (feature_dim == 0) throw ConfigError("feature dimension must be positive");
  const auto& bank = scene_bank();
  Rng rng(seed);

  auto normalize = [](Vec& v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (double& x : v) x /= n;
  };
  std::vector<Vec> centroids;
  for (std::size_t k = 0; k < bank.size(); ++k) {
    Vec c(feature_dim);
    for (double& x : c) x = rng.normal();
    normalize(c);
    centroids.push_back(std::move(c));
  }

  const std::size_t copies = 1 + static_cast<std::size_t>(std::lround(4.0 * redundancy));
  Fixture fx;
  for (std::size_t i = 0; i < n_images; ++i) {
    const std::size_t cls = i % bank.size();
    char id[32];
    std::snprintf(id, sizeof(id), "img_%04zu", i);

    Vec f = centroids[cls];
    for (double& x : f) x += 0.05 * rng.normal();
    normalize(f);
    fx.features.push_back({id, std::move(f)});

    std::vector<std::size_t> tmpl(bank[cls].templates.size());
    std::iota(tmpl.begin(), tmpl.end(), 0);
    rng.shuffle(std::span<std::size_t>(tmpl));
    std::vector<std::string> caps;
    for (std::size_t k = 0; k < copies; ++k) caps.emplace_back(bank[cls].templates[tmpl[0]]);
    for (std::size_t k = 1; caps.size() < kPairsPerImage; ++k) {
      caps.emplace_back(bank[cls].templates[tmpl[k]]);
    }
    rng.shuffle(std::span<std::string>(caps));
    fx.captions.push_back({id, std::move(caps)});
  }
  return fx;
}

std::vector<ArticleRow> make_headline_corpus(std::size_t n_pairs, std::uint64_t seed) {
  static const std::vector<const char*> subjects = {
      "oil prices", "the government", "local officials", "the company", "police",
      "the central bank", "stock markets", "the national team", "rescue workers",
      "farmers", "the city council", "airline shares"};
  static const std::vector<const char*> verbs = {
      "rose", "fell", "announced plans", "approved new rules", "rejected the offer",
      "reported gains", "warned of delays", "opened talks"};
  static const std::vector<const char*> tails = {
      "on monday", "on thursday", "in asian trade", "after the storm", "this week",
      "despite protests", "amid strong demand", "near the border"};
  static const std::vector<const char*> fillers = {
      "dealers said", "the report said", "officials said", "analysts expect more news",
      "no further details were given", "the statement added"};
  if (n_pairs == 0) throw ConfigError("headline corpus needs at least one pair");
  Rng rng(seed);
  auto pick = [&](const std::vector<const char*>& v) -> std::string {
    return v[rng.below(v.size())];
  };
  std::vector<ArticleRow> rows;
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::string subj = pick(subjects);
    const std::string verb = pick(verbs);
    const std::string lead = subj + " " + verb + " " + pick(tails);
    // Near-duplicate of the lead with a different tail.
    std::string article = lead + ". " + subj + " " + verb + " " + pick(tails) + ".";
    const std::size_t extra = rng.below(3);
    for (std::size_t k = 0; k < extra; ++k) article += " " + pick(fillers) + ".";
    rows.push_back({article, lead});
  }
  return rows;
}

SummaryPair encode_article(const ArticleRow& row, const Vocabulary& vocab) {
  std::vector<TokenSeq> sentences;
  for (const auto& s : split_sentences(row.source)) sentences.push_back(encode(s, vocab));
  if (sentences.empty()) throw LoadError("article has no sentences");
  return {stack_captions(sentences), encode(row.summary, vocab)};
}

}  // namespace sdcap
