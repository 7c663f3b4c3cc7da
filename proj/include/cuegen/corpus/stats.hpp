#pragma once

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/corpus/preprocess.hpp"
#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"

namespace cuegen::corpus {

// Word -> part-of-speech tags, loaded from "word TAG [TAG...]" lines
// (Penn tags; '#' starts a comment).
class PosLexicon {
 public:
  static PosLexicon from_stream(std::istream& in) {
    PosLexicon lex;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string word, tag;
      if (!(ls >> word)) continue;
      word = fold_case(word);
      while (ls >> tag) {
        if (tag.rfind("VB", 0) == 0) lex.verbs_.insert(word);
        ++lex.entries_;
      }
    }
    return lex;
  }

  static PosLexicon from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open lexicon " + path);
    return from_stream(in);
  }

  bool is_verb(const std::string& lowercase_word) const { return verbs_.count(lowercase_word) > 0; }
  std::size_t size() const { return entries_; }

 private:
  std::unordered_set<std::string> verbs_;
  std::size_t entries_ = 0;
};

struct CueStat {
  std::size_t scene = 0;
  std::size_t index = 0;
  std::size_t names = 0;
  std::size_t verbs = 0;
};

struct StatsReport {
  static constexpr std::size_t kNameBins = 11;  // 0..10, last bin is ">= 10"
  static constexpr std::size_t kVerbBins = 21;  // 0..20

  std::vector<CueStat> cues;
  std::vector<std::size_t> name_histogram;
  std::vector<std::size_t> verb_histogram;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["cues"] = cues.size();
    j["name_histogram"] = name_histogram;
    j["verb_histogram"] = verb_histogram;
    auto per = nlohmann::json::array();
    for (const auto& c : cues)
      per.push_back({{"scene", c.scene}, {"index", c.index}, {"names", c.names}, {"verbs", c.verbs}});
    j["per_cue"] = std::move(per);
    return j;
  }
};

namespace detail {

inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    if (std::isalpha(u) || c == '\'' || c == '-' || u >= 0x80) {
      cur.push_back(c);
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

}  // namespace detail

// Character-name and verb counts per cue. Names are matched as whole token
// sequences against the script's speaker set, verbs against the lexicon.
inline StatsReport scene_stats(const Script& script, const PosLexicon& lexicon) {
  std::set<std::vector<std::string>> speakers;
  for (const auto& sc : script.scenes)
    for (const auto& l : sc.lines)
      if (l.kind == LineKind::Dialogue && l.speaker) {
        auto toks = detail::word_tokens(*l.speaker);
        if (!toks.empty()) speakers.insert(std::move(toks));
      }

  StatsReport rep;
  for (const auto& sc : script.scenes) {
    for (const auto& l : sc.lines) {
      if (l.kind != LineKind::Cue) continue;
      const auto toks = detail::word_tokens(l.text);
      CueStat st{sc.index, l.index, 0, 0};
      for (const auto& name : speakers) {
        if (name.size() > toks.size()) continue;
        for (std::size_t i = 0; i + name.size() <= toks.size(); ++i) {
          if (std::equal(name.begin(), name.end(), toks.begin() + static_cast<std::ptrdiff_t>(i))) {
            ++st.names;
            break;
          }
        }
      }
      for (const auto& t : toks) st.verbs += lexicon.is_verb(fold_case(t));
      rep.cues.push_back(st);
    }
  }
  if (!rep.cues.empty()) {
    rep.name_histogram.assign(StatsReport::kNameBins, 0);
    rep.verb_histogram.assign(StatsReport::kVerbBins, 0);
    for (const auto& c : rep.cues) {
      ++rep.name_histogram[std::min(c.names, StatsReport::kNameBins - 1)];
      ++rep.verb_histogram[std::min(c.verbs, StatsReport::kVerbBins - 1)];
    }
  }
  return rep;
}

}  // namespace cuegen::corpus
