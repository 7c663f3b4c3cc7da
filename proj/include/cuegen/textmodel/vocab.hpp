#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/corpus/preprocess.hpp"
#include "cuegen/error.hpp"

namespace cuegen::textmodel {

using TokenId = std::int32_t;

// Word-level vocabulary. Specials occupy ids 0..3.
class Vocab {
 public:
  static constexpr TokenId kBos = 0;
  static constexpr TokenId kEos = 1;
  static constexpr TokenId kUnk = 2;
  static constexpr TokenId kPad = 3;
  static constexpr std::size_t kNumSpecials = 4;

  Vocab() : tokens_{"<bos>", "<eos>", "<unk>", "<pad>"} { reindex(); }

  explicit Vocab(std::vector<std::string> words) : Vocab() {
    for (auto& w : words) add(std::move(w));
  }

  std::size_t size() const { return tokens_.size(); }

  TokenId id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) > 0; }

  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  static bool is_special(TokenId id) { return id >= 0 && id < static_cast<TokenId>(kNumSpecials); }

  // Preprocesses, splits on whitespace, maps unknown words to <unk>.
  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> out;
    for (const auto& w : corpus::split_whitespace(corpus::preprocess(text))) out.push_back(id(w));
    return out;
  }

  // Joins non-special tokens with single spaces; <unk> is kept visible.
  std::string decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (TokenId t : ids) {
      if (t == kBos || t == kEos || t == kPad) continue;
      if (!out.empty()) out += ' ';
      out += token(t);
    }
    return out;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  nlohmann::json to_json() const {
    return std::vector<std::string>(tokens_.begin() + kNumSpecials, tokens_.end());
  }

  static Vocab from_json(const nlohmann::json& j) { return Vocab(j.get<std::vector<std::string>>()); }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  void add(std::string w) {
    if (index_.count(w)) return;
    index_.emplace(w, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(std::move(w));
  }

  void reindex() {
    index_.clear();
    for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<TokenId>(i));
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Keeps the max_vocab most frequent preprocessed words; ties go to the
// lexicographically smaller word.
inline Vocab train_tokenizer(const std::vector<std::string>& texts, std::size_t max_vocab) {
  if (texts.empty()) fail(Errc::EmptyCorpus, "no texts to build a vocabulary from");
  std::unordered_map<std::string, std::size_t> freq;
  std::size_t total = 0;
  for (const auto& t : texts) {
    for (auto& w : corpus::split_whitespace(corpus::preprocess(t))) {
      ++freq[std::move(w)];
      ++total;
    }
  }
  if (total == 0) fail(Errc::EmptyCorpus, "corpus contains no tokens");
  Vocab probe;
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [w, c] : freq)
    if (!probe.contains(w)) ranked.emplace_back(w, c);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() > max_vocab) ranked.resize(max_vocab);
  std::vector<std::string> words;
  words.reserve(ranked.size());
  for (auto& r : ranked) words.push_back(std::move(r.first));
  return Vocab(std::move(words));
}

}  // namespace cuegen::textmodel
