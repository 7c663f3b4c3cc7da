#pragma once

#include <string>
#include <vector>

#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/corpus/script.hpp"
#include "cuegen/textmodel/vocab.hpp"

namespace cuegen::eval {

// Every cue line's text, in corpus order.
inline std::vector<std::string> cue_lines(const std::vector<corpus::Script>& scripts) {
  std::vector<std::string> out;
  for (const auto& s : scripts)
    for (const auto& sc : s.scenes)
      for (const auto& l : sc.lines)
        if (l.kind == corpus::LineKind::Cue) out.push_back(l.text);
  return out;
}

// BOS plus the first `lines` lines of each scene that opens with that many
// spoken lines: the spot where a writer would ask for the next cue.
inline std::vector<std::vector<textmodel::TokenId>> dialogue_openings(const std::vector<corpus::Script>& scripts,
                                                                      const textmodel::Vocab& vocab,
                                                                      std::size_t lines) {
  std::vector<std::vector<textmodel::TokenId>> out;
  for (const auto& s : scripts)
    for (const auto& sc : s.scenes) {
      if (sc.lines.size() < lines) continue;
      std::vector<textmodel::TokenId> p{textmodel::Vocab::kBos};
      bool ok = true;
      for (std::size_t i = 0; i < lines && ok; ++i) {
        ok = sc.lines[i].kind == corpus::LineKind::Dialogue;
        const auto ids = vocab.encode(corpus::render_line(sc.lines[i]));
        p.insert(p.end(), ids.begin(), ids.end());
      }
      if (ok) out.push_back(std::move(p));
    }
  return out;
}

}  // namespace cuegen::eval
