#include "sdcap/vocab.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "sdcap/error.h"

namespace sdcap {

namespace {

const std::vector<std::string> kReservedWords = {"<start>", "<end>", "<pad>", "<unk>"};

}  // namespace

std::vector<std::string> normalize_words(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char ch : text) {
    if (std::isspace(ch)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(ch)) {
      cur.push_back(static_cast<char>(std::tolower(ch)));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string normalize_text(const std::string& text) {
  std::string out;
  for (const auto& w : normalize_words(text)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!normalize_words(cur).empty()) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    if (ch == '.' || ch == '!' || ch == '?') {
      flush();
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> words) : words_(kReservedWords) {
  for (std::size_t i = 0; i < kReservedWords.size(); ++i) {
    index_.emplace(kReservedWords[i], static_cast<TokenId>(i));
  }
  std::size_t skip = 0;
  // Accept lists that already start with the reserved block.
  if (words.size() >= kReservedWords.size() &&
      std::equal(kReservedWords.begin(), kReservedWords.end(), words.begin())) {
    skip = kReservedWords.size();
  }
  for (std::size_t i = skip; i < words.size(); ++i) {
    if (index_.count(words[i])) throw ConfigError("duplicate vocabulary word: " + words[i]);
    index_.emplace(words[i], static_cast<TokenId>(words_.size()));
    words_.push_back(std::move(words[i]));
  }
}

TokenId Vocabulary::index(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= words_.size()) {
    throw DimensionError("token id out of range: " + std::to_string(id));
  }
  return words_[static_cast<std::size_t>(id)];
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw LoadError("cannot write vocabulary " + path.string());
  for (const auto& w : words_) f << w << '\n';
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw LoadError("cannot open vocabulary " + path.string());
  std::vector<std::string> words;
  std::string line;
  while (std::getline(f, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    words.push_back(line);
  }
  if (words.size() < kReservedWords.size() ||
      !std::equal(kReservedWords.begin(), kReservedWords.end(), words.begin())) {
    throw LoadError("vocabulary file must start with the reserved tokens");
  }
  return Vocabulary(std::move(words));
}

Vocabulary build_vocab(std::span<const std::string> caption_corpus,
                       std::span<const std::string> summarization_corpus,
                       std::size_t budget) {
  std::set<std::string> caption_words;
  for (const auto& line : caption_corpus) {
    for (auto& w : normalize_words(line)) caption_words.insert(std::move(w));
  }
  if (caption_words.size() + kReservedWords.size() > budget) {
    throw ConfigError("vocabulary budget " + std::to_string(budget) +
                      " cannot hold " + std::to_string(caption_words.size()) +
                      " caption words plus reserved tokens");
  }

  std::map<std::string, std::size_t> freq;
  for (const auto& line : summarization_corpus) {
    for (auto& w : normalize_words(line)) {
      if (!caption_words.count(w)) ++freq[w];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(), freq.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> words(caption_words.begin(), caption_words.end());
  for (auto& [w, _] : ranked) {
    if (words.size() + kReservedWords.size() >= budget) break;
    words.push_back(w);
  }
  return Vocabulary(std::move(words));
}

TokenSeq encode(const std::string& text, const Vocabulary& v) {
  TokenSeq out{kStart};
  for (const auto& w : normalize_words(text)) out.push_back(v.index(w));
  out.push_back(kEnd);
  return out;
}

std::vector<std::string> decode_words(std::span<const TokenId> tokens,
                                      const Vocabulary& v) {
  std::vector<std::string> out;
  for (TokenId t : tokens) {
    if (!is_reserved(t)) out.push_back(v.word(t));
  }
  return out;
}

std::string decode(std::span<const TokenId> tokens, const Vocabulary& v) {
  std::string out;
  for (const auto& w : decode_words(tokens, v)) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace sdcap
