#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cuegen/error.hpp"
#include "cuegen/utf8.hpp"

namespace cuegen::eval {

namespace detail {

// Myers/Hyyrö bit-vector edit distance, blocked over 64-row words. The
// pattern is the shorter string; the text is scanned once.
class BitPattern {
 public:
  explicit BitPattern(std::u32string_view p)
      : m_(p.size()), blocks_((p.size() + 63) / 64), ascii_(kAscii * blocks_, 0), none_(blocks_, 0) {
    for (std::size_t i = 0; i < m_; ++i) {
      std::uint64_t* row;
      if (p[i] < kAscii) {
        row = &ascii_[p[i] * blocks_];
      } else {
        auto& r = peq_[p[i]];
        if (r.empty()) r.assign(blocks_, 0);
        row = r.data();
      }
      row[i / 64] |= std::uint64_t{1} << (i % 64);
    }
  }

  std::size_t size() const { return m_; }

  std::size_t distance(std::u32string_view text) const { return scan(text, SIZE_MAX); }

  // Exact when <= k, otherwise k + 1. Stops once the last-row score minus the
  // columns still to come exceeds k: each column moves the score by at most one.
  std::size_t distance_bounded(std::u32string_view text, std::size_t k) const {
    const std::size_t n = text.size();
    if ((m_ > n ? m_ - n : n - m_) > k) return k + 1;
    return std::min(scan(text, k), k + 1);
  }

 private:
  static constexpr char32_t kAscii = 128;

  const std::uint64_t* row(char32_t c) const {
    if (c < kAscii) return &ascii_[c * blocks_];
    const auto it = peq_.find(c);
    return it == peq_.end() ? none_.data() : it->second.data();
  }

  std::size_t scan(std::u32string_view text, std::size_t k) const {
    if (m_ == 0) return text.size();
    const std::uint64_t last_bit = std::uint64_t{1} << ((m_ - 1) % 64);
    long long score = static_cast<long long>(m_);
    long long left = static_cast<long long>(text.size());
    const long long bound = k == SIZE_MAX ? std::numeric_limits<long long>::max() : static_cast<long long>(k);
    if (blocks_ == 1) {
      std::uint64_t pv = ~std::uint64_t{0}, mv = 0;
      for (char32_t c : text) {
        score += advance(pv, mv, row(c)[0], 1, last_bit);
        if (score - --left > bound) return k + 1;
      }
      return static_cast<std::size_t>(score);
    }
    std::vector<std::uint64_t> pv(blocks_, ~std::uint64_t{0}), mv(blocks_, 0);
    for (char32_t c : text) {
      const std::uint64_t* eq_row = row(c);
      int hin = 1;  // top boundary row grows by one per column
      for (std::size_t b = 0; b < blocks_; ++b) {
        const std::uint64_t high = b + 1 == blocks_ ? last_bit : std::uint64_t{1} << 63;
        hin = advance(pv[b], mv[b], eq_row[b], hin, high);
      }
      score += hin;
      if (score - --left > bound) return k + 1;
    }
    return static_cast<std::size_t>(score);
  }

  static int advance(std::uint64_t& pv, std::uint64_t& mv, std::uint64_t eq, int hin, std::uint64_t high) {
    const std::uint64_t xv = eq | mv;
    if (hin < 0) eq |= 1;
    const std::uint64_t xh = (((eq & pv) + pv) ^ pv) | eq;
    std::uint64_t ph = mv | ~(xh | pv);
    std::uint64_t mh = pv & xh;
    int hout = 0;
    if (ph & high) hout = 1;
    if (mh & high) hout = -1;
    ph <<= 1;
    mh <<= 1;
    if (hin < 0) mh |= 1;
    else if (hin > 0) ph |= 1;
    pv = mh | ~(xv | ph);
    mv = ph & xv;
    return hout;
  }

  std::size_t m_;
  std::size_t blocks_;
  std::vector<std::uint64_t> ascii_;  // [128, blocks]
  std::vector<std::uint64_t> none_;
  std::unordered_map<char32_t, std::vector<std::uint64_t>> peq_;
};

}  // namespace detail

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() > b.size()) std::swap(a, b);
  if (a.empty()) return b.size();
  return detail::BitPattern(a).distance(b);
}

// Exact distance when it is <= k, otherwise k + 1. Banded DP with early exit.
inline std::size_t levenshtein_bounded(std::u32string_view a, std::u32string_view b, std::size_t k) {
  if (a.size() > b.size()) std::swap(a, b);
  const std::size_t n = a.size(), m = b.size();
  if (m - n > k) return k + 1;
  if (n == 0) return m;
  const std::size_t inf = k + 1;
  // Row i covers columns j in [i - k, i + k] of the full (n+1) x (m+1) matrix.
  std::vector<std::size_t> prev(m + 1, inf), cur(m + 1, inf);
  for (std::size_t j = 0; j <= std::min(m, k); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    const std::size_t lo = i > k ? i - k : 0, hi = std::min(m, i + k);
    if (lo > 0) cur[lo - 1] = inf;
    std::size_t best = inf;
    for (std::size_t j = lo; j <= hi; ++j) {
      std::size_t v;
      if (j == 0) {
        v = i;
      } else {
        v = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
        v = std::min(v, cur[j - 1] + 1);
        v = std::min(v, prev[j] + 1);
      }
      cur[j] = std::min(v, inf);
      best = std::min(best, cur[j]);
    }
    if (hi < m) cur[hi + 1] = inf;
    if (best > k) return inf;
    std::swap(prev, cur);
  }
  return std::min(prev[m], inf);
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  return levenshtein(utf8::decode(a), utf8::decode(b));
}

inline std::size_t levenshtein_bounded(std::string_view a, std::string_view b, std::size_t k) {
  return levenshtein_bounded(utf8::decode(a), utf8::decode(b), k);
}

inline std::size_t lcs_length(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1, 0);
  for (char32_t ca : a) {
    std::size_t diag = 0;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = ca == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
      diag = up;
    }
  }
  return row.back();
}

// Longest common subsequence ratio over unicode scalar values.
inline double lcsr(std::u32string_view a, std::u32string_view b) {
  if (a.empty() && b.empty()) fail(Errc::BothEmpty, "lcsr of two empty strings");
  return static_cast<double>(lcs_length(a, b)) / static_cast<double>(std::max(a.size(), b.size()));
}

inline double lcsr(std::string_view a, std::string_view b) { return lcsr(utf8::decode(a), utf8::decode(b)); }

// Kondrak's BI-SIM: positional bigrams with one leading boundary symbol, partial
// credit for bigrams that agree in one position.
inline double bi_sim(std::u32string_view a, std::u32string_view b) {
  if (a.empty() && b.empty()) fail(Errc::BothEmpty, "bi_sim of two empty strings");
  if (a.empty() || b.empty()) return 0.0;
  constexpr char32_t kBoundary = 0x110000;  // outside the unicode range
  auto at = [&](std::u32string_view s, std::size_t i) { return i == 0 ? kBoundary : s[i - 1]; };
  const std::size_t n = a.size(), m = b.size();
  std::vector<double> prev(m + 1, 0.0), cur(m + 1, 0.0);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = 0.0;
    for (std::size_t j = 1; j <= m; ++j) {
      // bigram i of a is (at(a, i-1), at(a, i)), likewise for b
      const double s = ((at(a, i - 1) == at(b, j - 1)) + (at(a, i) == at(b, j))) / 2.0;
      cur[j] = std::max({prev[j - 1] + s, prev[j], cur[j - 1]});
    }
    std::swap(prev, cur);
  }
  return prev[m] / static_cast<double>(std::max(n, m));
}

inline double bi_sim(std::string_view a, std::string_view b) { return bi_sim(utf8::decode(a), utf8::decode(b)); }

enum class DistNorm { NgramCount, TokenCount };

inline std::string_view to_string(DistNorm d) { return d == DistNorm::NgramCount ? "ngram_count" : "token_count"; }

// Distinct n-grams across all texts over the total n-gram (or token) count.
inline double dist_n(const std::vector<std::vector<std::string>>& texts, std::size_t n,
                     DistNorm norm = DistNorm::NgramCount) {
  if (n == 0) fail(Errc::InvalidParams, "n must be >= 1");
  std::set<std::vector<std::string>> distinct;
  std::size_t ngrams = 0, tokens = 0;
  for (const auto& t : texts) {
    tokens += t.size();
    if (t.size() < n) continue;
    for (std::size_t i = 0; i + n <= t.size(); ++i) {
      distinct.emplace(t.begin() + static_cast<std::ptrdiff_t>(i), t.begin() + static_cast<std::ptrdiff_t>(i + n));
      ++ngrams;
    }
  }
  if (ngrams == 0) fail(Errc::NoNgrams, "no text has " + std::to_string(n) + " tokens");
  return static_cast<double>(distinct.size()) / static_cast<double>(norm == DistNorm::NgramCount ? ngrams : tokens);
}

}  // namespace cuegen::eval
