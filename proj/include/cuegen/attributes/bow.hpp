#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/corpus/preprocess.hpp"
#include "cuegen/error.hpp"
#include "cuegen/textmodel/vocab.hpp"

namespace cuegen::attributes {

enum class BowSource { Lda, Manual };

inline constexpr double kLargeNegative = -1e9;

struct BowAttribute {
  std::string name;
  int topic = -1;  // LDA topic id, -1 for manual lists
  BowSource source = BowSource::Manual;
  std::vector<textmodel::TokenId> ids;
  std::vector<std::string> words;
  std::size_t dropped = 0;  // words absent from the vocabulary

  nlohmann::json to_json() const {
    return {{"name", name},   {"topic", topic},     {"source", source == BowSource::Lda ? "lda" : "manual"},
            {"words", words}, {"dropped", dropped}, {"size", ids.size()}};
  }
};

// Keeps words present in the vocabulary (deduplicated, first occurrence order).
inline BowAttribute make_bow(const std::vector<std::string>& words, const textmodel::Vocab& vocab,
                             BowSource source = BowSource::Manual, std::string name = {}, int topic = -1) {
  BowAttribute b;
  b.name = std::move(name);
  b.source = source;
  b.topic = topic;
  for (const auto& w : words) {
    if (!vocab.contains(w) || textmodel::Vocab::is_special(vocab.id(w))) {
      ++b.dropped;
      continue;
    }
    const auto id = vocab.id(w);
    if (std::find(b.ids.begin(), b.ids.end(), id) != b.ids.end()) continue;
    b.ids.push_back(id);
    b.words.push_back(w);
  }
  if (b.ids.empty()) fail(Errc::EmptyBag, "no bag word is in the vocabulary (" + std::to_string(b.dropped) + " dropped)");
  return b;
}

// Plain text, one word per line; blank lines and '#' comments ignored.
inline std::vector<std::string> read_word_list(std::istream& in) {
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto toks = corpus::split_whitespace(line);
    if (toks.empty() || toks.front().front() == '#') continue;
    out.push_back(toks.front());
  }
  return out;
}

inline std::vector<std::string> read_word_list_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  return read_word_list(in);
}

struct BowScore {
  double value = 0;        // log of the bag's probability mass
  bool sentinel = false;   // mass was zero; value is kLargeNegative
  double mass = 0;
};

// log sum_{w in bag} dist[w]. grad (optional) receives d/d dist, which is
// 1/mass on bag ids and zero elsewhere (zero everywhere for the sentinel).
inline BowScore bow_log_prob(const BowAttribute& bow, std::span<const double> dist, std::vector<double>* grad = nullptr) {
  if (bow.ids.empty()) fail(Errc::EmptyBag, "bag of words is empty");
  double total = 0;
  for (double p : dist) total += p;
  if (std::abs(total - 1.0) > 1e-6) fail(Errc::DegenerateDistribution, "distribution sums to " + std::to_string(total));
  BowScore s;
  for (auto id : bow.ids) {
    if (static_cast<std::size_t>(id) >= dist.size()) fail(Errc::DimensionMismatch, "bag id outside distribution");
    s.mass += dist[static_cast<std::size_t>(id)];
  }
  if (grad) grad->assign(dist.size(), 0.0);
  // A bag covering every entry scores log 1 on the whole simplex, so it has no gradient.
  if (bow.ids.size() == dist.size()) {
    s.value = 0.0;
    return s;
  }
  if (!(s.mass > 0)) {
    s.value = kLargeNegative;
    s.sentinel = true;
    return s;
  }
  s.value = std::min(0.0, std::log(s.mass));
  if (grad)
    for (auto id : bow.ids) (*grad)[static_cast<std::size_t>(id)] = 1.0 / s.mass;
  return s;
}

}  // namespace cuegen::attributes
