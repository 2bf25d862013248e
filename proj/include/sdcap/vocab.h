#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace sdcap {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kStart = 0;
inline constexpr TokenId kEnd = 1;
inline constexpr TokenId kPad = 2;
inline constexpr TokenId kUnk = 3;
inline constexpr TokenId kNumReserved = 4;

inline constexpr std::size_t kDefaultVocabBudget = 50000;

inline bool is_reserved(TokenId t) { return t >= 0 && t < kNumReserved; }

// Lowercase, drop ASCII punctuation, split on whitespace.
std::vector<std::string> normalize_words(const std::string& text);
// normalize_words joined by single spaces.
std::string normalize_text(const std::string& text);
// Splits on '.', '!' and '?'; drops sentences with no words.
std::vector<std::string> split_sentences(const std::string& text);

// Merged captioning + summarization vocabulary. Immutable once built.
class Vocabulary {
 public:
  // Reserved tokens only.
  Vocabulary();
  explicit Vocabulary(std::vector<std::string> words);

  std::size_t size() const { return words_.size(); }
  // UNK for unknown words.
  TokenId index(const std::string& word) const;
  bool contains(const std::string& word) const { return index_.count(word) != 0; }
  const std::string& word(TokenId id) const;
  const std::vector<std::string>& words() const { return words_; }

  // One token per line; line number is the index.
  void save(const std::filesystem::path& path) const;
  static Vocabulary load(const std::filesystem::path& path);

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.words_ == b.words_;
  }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, TokenId> index_;
};

// Every distinct caption word (sorted), then the most frequent remaining
// summarization-corpus words (ties lexicographic) until `budget` entries
// including the four reserved tokens. Throws ConfigError if the caption words
// alone do not fit.
Vocabulary build_vocab(std::span<const std::string> caption_corpus,
                       std::span<const std::string> summarization_corpus,
                       std::size_t budget = kDefaultVocabBudget);

// [START, words..., END].
TokenSeq encode(const std::string& text, const Vocabulary& v);
// Space-joined words with every reserved token dropped.
std::string decode(std::span<const TokenId> tokens, const Vocabulary& v);
// Words only, reserved tokens dropped.
std::vector<std::string> decode_words(std::span<const TokenId> tokens,
                                      const Vocabulary& v);

}  // namespace sdcap
