#pragma once

#include <string>
#include <vector>

#include "cuegen/attributes/head.hpp"
#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/corpus/script.hpp"

namespace cuegen::attributes {

inline const std::vector<std::string>& cue_classes() {
  static const std::vector<std::string> classes{"cue", "dialogue"};
  return classes;
}

inline constexpr std::size_t kCueClass = 0;
inline constexpr std::size_t kDialogueClass = 1;

inline HeadSpec cue_head_spec() { return {cue_classes(), HeadMode::Softmax}; }

// Every line of the corpus as a cue/dialogue example, in model-facing form.
inline std::vector<LabeledExample> cue_dialogue_examples(const std::vector<corpus::Script>& scripts) {
  std::vector<LabeledExample> out;
  for (const auto& s : scripts)
    for (const auto& sc : s.scenes)
      for (const auto& l : sc.lines)
        out.push_back({corpus::render_line(l), {l.kind == corpus::LineKind::Cue ? kCueClass : kDialogueClass}});
  return out;
}

}  // namespace cuegen::attributes
