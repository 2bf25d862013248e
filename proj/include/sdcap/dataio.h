#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sdcap/captioner.h"
#include "sdcap/summarizer.h"
#include "sdcap/vocab.h"

namespace sdcap {

// Rows of the JSON-lines interchange files.
//   features: {"image_id": string, "features": [D reals]}
//   captions: {"image_id": string, "captions": [strings]}
//   corpus:   {"source": string, "summary": string}
struct FeatureRow {
  std::string image_id;
  Vec features;
};

struct CaptionRow {
  std::string image_id;
  std::vector<std::string> captions;
};

struct ArticleRow {
  std::string source;
  std::string summary;
};

std::vector<FeatureRow> read_features(const std::filesystem::path& path);
std::vector<CaptionRow> read_captions(const std::filesystem::path& path);
std::vector<ArticleRow> read_corpus(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const std::vector<FeatureRow>& rows);
void write_captions(const std::filesystem::path& path, const std::vector<CaptionRow>& rows);
void write_corpus(const std::filesystem::path& path, const std::vector<ArticleRow>& rows);

enum class Split { kTrain, kVal, kTest };
const char* split_name(Split s);

struct ImageRecord {
  std::string image_id;
  ImageFeatures features;
  std::vector<TokenSeq> captions;
  Split split = Split::kTrain;
};

struct CaptionDataset {
  std::vector<ImageRecord> records;
  std::size_t unknown_words = 0;

  std::vector<std::size_t> indices(Split s) const;
};

inline constexpr double kTrainFraction = 0.8;
inline constexpr double kValFraction = 0.1;

// Joins the two row sets by image_id (feature-file order) and assigns a
// seeded 80/10/10 split: val and test get floor(0.1 n) records each, train the
// remainder. Throws LoadError naming the first id missing on either side.
CaptionDataset make_dataset(const std::vector<FeatureRow>& features,
                            const std::vector<CaptionRow>& captions, const Vocabulary& vocab,
                            std::uint64_t split_seed);

CaptionDataset load_dataset(const std::filesystem::path& features_path,
                            const std::filesystem::path& captions_path,
                            const Vocabulary& vocab, std::uint64_t split_seed);

// Order-sensitive FNV-1a digest over ids, splits, feature bits and tokens.
std::uint64_t dataset_checksum(const CaptionDataset& d);

struct TrainingPair {
  std::size_t record = 0;
  std::size_t caption = 0;
};

inline constexpr std::size_t kPairsPerImage = 5;

// One pair per caption of every training image; images with fewer than
// `per_image` captions are topped up by seeded random duplicates.
std::vector<TrainingPair> make_training_pairs(const CaptionDataset& d, std::uint64_t seed,
                                              std::size_t per_image = kPairsPerImage);

// Stacked captions of every record, as fed to the summarizer.
TokenSeq stacked_source(const ImageRecord& record);

struct Fixture {
  std::vector<FeatureRow> features;
  std::vector<CaptionRow> captions;
};

inline constexpr std::size_t kDefaultFeatureDim = 32;

// Synthetic stand-in for a captioning dataset: unit-norm features clustered
// around one random centroid per scene class, five template captions per
// image. 1 + round(4 * redundancy) of the five are verbatim copies of one
// template; the rest are distinct templates of the same class.
Fixture make_fixture(std::size_t n_images, double redundancy, std::uint64_t seed,
                     std::size_t feature_dim = kDefaultFeatureDim);

// Synthetic article -> headline corpus. Each article is a lead sentence
// followed by one to three sentences, including a near-duplicate of the lead;
// the headline is the lead sentence.
std::vector<ArticleRow> make_headline_corpus(std::size_t n_pairs, std::uint64_t seed);

// Article text -> stacked sentence tokens; summary -> [START ... END].
SummaryPair encode_article(const ArticleRow& row, const Vocabulary& vocab);

}  // namespace sdcap
