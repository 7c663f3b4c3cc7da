#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cuegen/corpus/preprocess.hpp"
#include "cuegen/error.hpp"
#include "cuegen/eval/metrics.hpp"
#include "cuegen/utf8.hpp"

namespace cuegen::eval {

// Comparison form: preprocessed, leading "SPEAKER ." / "SPEAKER :" removed,
// case-folded.
inline std::string normalize_for_eval(std::string_view text) {
  auto words = corpus::split_whitespace(corpus::preprocess(text));
  std::size_t name = 0;
  auto is_name_word = [](const std::string& w) {
    bool upper = false;
    for (char32_t c : utf8::decode(w)) {
      if (utf8::fold_case(c) != c) upper = true;
      else if (c != U'\'' && c != U'-') return false;
    }
    return upper;
  };
  while (name < words.size() && name < 4 && is_name_word(words[name])) ++name;
  if (name > 0 && name < words.size() && (words[name] == "." || words[name] == ":"))
    words.erase(words.begin(), words.begin() + static_cast<std::ptrdiff_t>(name + 1));
  return corpus::fold_case(corpus::join(words));
}

struct Neighbor {
  std::size_t index = 0;  // into the reference list
  std::size_t distance = 0;
};

inline bool operator==(const Neighbor& a, const Neighbor& b) {
  return a.index == b.index && a.distance == b.distance;
}

inline bool closer(const Neighbor& a, const Neighbor& b) {
  return a.distance != b.distance ? a.distance < b.distance : a.index < b.index;
}

// Normalized reference cues with character histograms for pruned neighbor search.
class ReferenceIndex {
 public:
  ReferenceIndex() = default;
  explicit ReferenceIndex(const std::vector<std::string>& refs, bool normalize = true) {
    texts_.reserve(refs.size());
    for (const auto& r : refs) texts_.push_back(utf8::decode(normalize ? normalize_for_eval(r) : r));
    hist_.reserve(texts_.size());
    for (std::size_t i = 0; i < texts_.size(); ++i) {
      hist_.push_back(histogram(texts_[i]));
    }
  }

  // Character counts folded into 32 bins, saturating. Folding and saturation
  // only shrink count differences, so the bound below stays a lower bound.
  using Histogram = std::array<std::uint8_t, 32>;
  static Histogram histogram(std::u32string_view s) {
    Histogram h{};
    for (char32_t c : s) {
      auto& b = h[c & 31u];
      if (b < 255) ++b;
    }
    return h;
  }
  // Every edit fixes at most one surplus and one deficit.
  static std::size_t histogram_bound(const Histogram& a, const Histogram& b) {
    int surplus = 0, deficit = 0;
    for (std::size_t i = 0; i < 32; ++i) {
      const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
      surplus += d > 0 ? d : 0;
      deficit += d < 0 ? -d : 0;
    }
    return static_cast<std::size_t>(std::max(surplus, deficit));
  }
  const Histogram& hist(std::size_t i) const { return hist_[i]; }

  std::size_t size() const { return texts_.size(); }
  bool empty() const { return texts_.empty(); }
  const std::u32string& text(std::size_t i) const { return texts_[i]; }

 private:
  std::vector<std::u32string> texts_;
  std::vector<Histogram> hist_;
};

// Reference full scan: every distance computed exactly.
inline std::vector<Neighbor> nearest_cues_naive(std::u32string_view sample, const ReferenceIndex& refs,
                                                std::size_t top_r) {
  if (refs.empty()) fail(Errc::EmptyReferences, "no reference cues");
  std::vector<Neighbor> all;
  all.reserve(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) all.push_back({i, levenshtein(sample, refs.text(i))});
  const std::size_t r = std::min(top_r, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(r), all.end(), closer);
  all.resize(r);
  return all;
}

// Visits references in increasing order of a character-histogram lower bound
// (never below the length difference) and stops once that bound exceeds the
// current r-th best distance. Each distance reuses the sample's bit pattern
// and quits as soon as the r-th best is out of reach. Output equals
// nearest_cues_naive.
inline std::vector<Neighbor> nearest_cues(std::u32string_view sample, const ReferenceIndex& refs, std::size_t top_r) {
  if (refs.empty()) fail(Errc::EmptyReferences, "no reference cues");
  const std::size_t r = std::min(top_r, refs.size());
  if (r == 0) return {};
  const detail::BitPattern pattern(sample);
  const auto sample_hist = ReferenceIndex::histogram(sample);

  // Counting sort of reference ids by bound.
  const std::size_t n = refs.size();
  std::vector<std::uint32_t> bound(n);
  std::size_t max_bound = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bound[i] = static_cast<std::uint32_t>(ReferenceIndex::histogram_bound(sample_hist, refs.hist(i)));
    max_bound = std::max<std::size_t>(max_bound, bound[i]);
  }
  std::vector<std::size_t> start(max_bound + 2, 0);
  for (auto b : bound) ++start[b + 1];
  for (std::size_t b = 1; b < start.size(); ++b) start[b] += start[b - 1];
  std::vector<std::size_t> order(n);
  {
    auto fill = start;
    for (std::size_t i = 0; i < n; ++i) order[fill[bound[i]]++] = i;
  }

  std::vector<Neighbor> best;  // max-heap under `closer`, at most r entries
  best.reserve(r + 1);
  for (std::size_t idx : order) {
    const auto& ref = refs.text(idx);
    if (best.size() < r) {
      best.push_back({idx, pattern.distance(ref)});
      std::push_heap(best.begin(), best.end(), closer);
      continue;
    }
    const Neighbor& worst = best.front();
    if (bound[idx] > worst.distance) break;  // everything after is at least as far
    // Only strictly closer entries (distance, then index) can replace it.
    if (idx > worst.index && worst.distance == 0) continue;
    const std::size_t limit = idx < worst.index ? worst.distance : worst.distance - 1;
    if (bound[idx] > limit) continue;
    const std::size_t d = pattern.distance_bounded(ref, limit);
    if (d > limit) continue;
    const Neighbor cand{idx, d};
    if (!closer(cand, worst)) continue;
    std::pop_heap(best.begin(), best.end(), closer);
    best.back() = cand;
    std::push_heap(best.begin(), best.end(), closer);
  }
  std::sort(best.begin(), best.end(), closer);
  return best;
}

inline std::vector<Neighbor> nearest_cues(std::string_view sample, const ReferenceIndex& refs, std::size_t top_r) {
  return nearest_cues(utf8::decode(normalize_for_eval(sample)), refs, top_r);
}

// Uniform sample without replacement, in the original order; all of them when
// fewer than `size` exist.
inline std::vector<std::string> sample_references(const std::vector<std::string>& cues, std::size_t size,
                                                  std::uint64_t seed) {
  if (cues.size() <= size) return cues;
  std::vector<std::size_t> idx(cues.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < size; ++i) {
    const std::size_t j = i + rng() % (idx.size() - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(size);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  out.reserve(size);
  for (std::size_t i : idx) out.push_back(cues[i]);
  return out;
}

}  // namespace cuegen::eval
