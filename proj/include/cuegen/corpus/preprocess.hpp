#pragma once

#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cuegen/utf8.hpp"

namespace cuegen::corpus {

// Puts every punctuation character in its own whitespace-delimited slot and
// collapses whitespace runs to one space: "leaves.)" -> "leaves . )".
// Idempotent.
inline std::string preprocess(std::string_view text) {
  const auto cps = utf8::decode(text);
  std::string out;
  out.reserve(text.size() + text.size() / 4);
  bool pending_space = false;
  bool prev_punct = false;
  for (char32_t c : cps) {
    if (utf8::is_space(c)) {
      pending_space = true;
      continue;
    }
    const bool punct = utf8::is_punct(c);
    if (!out.empty() && (pending_space || punct || prev_punct)) out.push_back(' ');
    utf8::append(out, c);
    pending_space = false;
    prev_punct = punct;
  }
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                               text[i] == '\r' || text[i] == '\f' || text[i] == '\v'))
      ++i;
    std::size_t j = i;
    while (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == '\n' ||
                                text[j] == '\r' || text[j] == '\f' || text[j] == '\v'))
      ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::string join(const std::vector<std::string>& words, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += sep;
    out += words[i];
  }
  return out;
}

inline std::string fold_case(std::string_view text) {
  std::u32string cps = utf8::decode(text);
  for (auto& c : cps) c = utf8::fold_case(c);
  return utf8::encode(cps);
}

}  // namespace cuegen::corpus
