#pragma once

// Independent reference implementations shared by the unit tests and the
// acceptance run.

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace cuegen_test {

// Plain recursion straight from the definition.
inline std::size_t lev_recursive(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  const std::string ta = a.substr(1), tb = b.substr(1);
  if (a[0] == b[0]) return lev_recursive(ta, tb);
  return 1 + std::min({lev_recursive(ta, b), lev_recursive(a, tb), lev_recursive(ta, tb)});
}

inline std::size_t lev_matrix(const std::u32string& a, const std::u32string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

// All subsequences of s (as strings), by bitmask.
inline std::set<std::string> subsequences(const std::string& s) {
  std::set<std::string> out;
  for (unsigned mask = 0; mask < (1u << s.size()); ++mask) {
    std::string t;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (mask & (1u << i)) t += s[i];
    out.insert(t);
  }
  return out;
}

inline double lcsr_enumerated(const std::string& a, const std::string& b) {
  const auto sa = subsequences(a), sb = subsequences(b);
  std::size_t best = 0;
  for (const auto& t : sa)
    if (sb.count(t)) best = std::max(best, t.size());
  return static_cast<double>(best) / static_cast<double>(std::max(a.size(), b.size()));
}

// BI-SIM by exhaustive recursion over the same recurrence.
inline double bisim_recursive(const std::string& a, const std::string& b, std::size_t i, std::size_t j) {
  if (i == 0 || j == 0) return 0.0;
  auto at = [](const std::string& s, std::size_t k) { return k == 0 ? '\0' : s[k - 1]; };
  const double s = ((at(a, i - 1) == at(b, j - 1)) + (at(a, i) == at(b, j))) / 2.0;
  return std::max({bisim_recursive(a, b, i - 1, j - 1) + s, bisim_recursive(a, b, i - 1, j),
                   bisim_recursive(a, b, i, j - 1)});
}

inline std::vector<std::string> all_strings(std::size_t max_len, const std::string& alphabet = "ab") {
  std::vector<std::string> out{""};
  std::vector<std::string> layer{""};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<std::string> next;
    for (const auto& s : layer)
      for (char c : alphabet) next.push_back(s + c);
    out.insert(out.end(), next.begin(), next.end());
    layer = std::move(next);
  }
  return out;
}

inline std::string random_string(std::mt19937_64& rng, std::size_t max_len, const std::string& alphabet) {
  const std::size_t n = rng() % (max_len + 1);
  std::string s;
  for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
  return s;
}

inline std::u32string random_u32(std::mt19937_64& rng, std::size_t min_len, std::size_t max_len, std::size_t alphabet) {
  const std::size_t n = min_len + rng() % (max_len - min_len + 1);
  std::u32string s;
  for (std::size_t i = 0; i < n; ++i) s += static_cast<char32_t>(U'a' + rng() % alphabet);
  return s;
}

// Documents drawn from three disjoint 20-word topics ("t<k>_<w>"), with
// sparse per-document mixtures.
inline std::vector<std::vector<std::string>> three_topic_corpus(std::uint64_t seed, std::size_t docs, std::size_t len) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> gamma(0.3, 1.0);
  std::vector<std::vector<std::string>> out;
  for (std::size_t d = 0; d < docs; ++d) {
    double theta[3], s = 0;
    for (auto& t : theta) s += (t = gamma(rng) + 1e-12);
    std::vector<std::string> doc;
    for (std::size_t i = 0; i < len; ++i) {
      double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * s;
      int k = 0;
      while (k < 2 && u >= theta[k]) u -= theta[k++];
      // Zipf-ish skew inside each topic's 20-word vocabulary.
      const auto w = static_cast<int>(std::floor(20.0 * std::pow(static_cast<double>(rng() >> 11) * 0x1.0p-53, 1.5)));
      doc.push_back("t" + std::to_string(k) + "_" + std::to_string(w));
    }
    out.push_back(std::move(doc));
  }
  return out;
}

}  // namespace cuegen_test
