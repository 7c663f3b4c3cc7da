#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "cuegen/corpus/preprocess.hpp"
#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"
#include "cuegen/textmodel/container.hpp"
#include "cuegen/utf8.hpp"

namespace cuegen::attributes {

struct LdaParams {
  std::size_t topics = 10;
  std::size_t iters = 1000;
  double alpha = -1;  // <= 0 means 50 / topics
  double beta = 0.01;
  std::uint64_t seed = 0;
#ifdef NDEBUG
  bool check_invariants = false;
#else
  bool check_invariants = true;
#endif
  std::function<void(std::size_t sweep)> on_sweep;
};

// Collapsed Gibbs state. Word ids index `words` in first-seen order.
struct TopicModel {
  std::size_t K = 0;
  double alpha = 0, beta = 0;
  std::vector<std::string> words;
  std::vector<std::vector<std::int32_t>> docs;  // word ids
  std::vector<std::vector<std::int32_t>> z;     // topic per token
  std::vector<std::int64_t> nkw;                // [K, V]
  std::vector<std::int64_t> ndk;                // [D, K]
  std::vector<std::int64_t> nk;                 // [K]
  std::size_t sweeps = 0;

  std::size_t V() const { return words.size(); }
  std::size_t D() const { return docs.size(); }

  double phi(std::size_t k, std::size_t w) const {
    return (static_cast<double>(nkw[k * V() + w]) + beta) /
           (static_cast<double>(nk[k]) + static_cast<double>(V()) * beta);
  }

  // Recounts from z and compares; throws InvariantViolation on any mismatch.
  void verify() const {
    std::vector<std::int64_t> kw(K * V(), 0), dk(D() * K, 0), k_(K, 0);
    for (std::size_t d = 0; d < D(); ++d) {
      if (z[d].size() != docs[d].size()) fail(Errc::InvariantViolation, "assignment length differs from document");
      for (std::size_t i = 0; i < docs[d].size(); ++i) {
        const auto k = static_cast<std::size_t>(z[d][i]);
        if (k >= K) fail(Errc::InvariantViolation, "topic assignment out of range");
        ++kw[k * V() + static_cast<std::size_t>(docs[d][i])];
        ++dk[d * K + k];
        ++k_[k];
      }
    }
    if (kw != nkw || dk != ndk || k_ != nk) fail(Errc::InvariantViolation, "count matrices disagree with assignments");
    for (std::size_t d = 0; d < D(); ++d) {
      std::int64_t s = 0;
      for (std::size_t k = 0; k < K; ++k) s += ndk[d * K + k];
      if (s != static_cast<std::int64_t>(docs[d].size())) fail(Errc::InvariantViolation, "doc-topic row sum");
    }
    for (std::size_t k = 0; k < K; ++k) {
      std::int64_t s = 0;
      for (std::size_t w = 0; w < V(); ++w) {
        if (nkw[k * V() + w] < 0) fail(Errc::InvariantViolation, "negative count");
        s += nkw[k * V() + w];
      }
      if (s != nk[k]) fail(Errc::InvariantViolation, "topic-word row sum differs from topic total");
    }
  }

  textmodel::Container to_container() const {
    textmodel::Container c;
    c.meta = {{"format", "cuegen-lda"}, {"K", K}, {"alpha", alpha}, {"beta", beta}, {"words", words}, {"sweeps", sweeps}};
    std::vector<std::int32_t> flat_docs, flat_z, lengths;
    for (std::size_t d = 0; d < D(); ++d) {
      lengths.push_back(static_cast<std::int32_t>(docs[d].size()));
      flat_docs.insert(flat_docs.end(), docs[d].begin(), docs[d].end());
      flat_z.insert(flat_z.end(), z[d].begin(), z[d].end());
    }
    c.tensors.push_back(textmodel::make_blob("nkw", {K, V()}, nkw));
    c.tensors.push_back(textmodel::make_blob("ndk", {D(), K}, ndk));
    c.tensors.push_back(textmodel::make_blob("nk", {K}, nk));
    c.tensors.push_back(textmodel::make_blob("doc_lengths", {D()}, lengths));
    c.tensors.push_back(textmodel::make_blob("tokens", {flat_docs.size()}, flat_docs));
    c.tensors.push_back(textmodel::make_blob("z", {flat_z.size()}, flat_z));
    return c;
  }

  static TopicModel from_container(const textmodel::Container& c) {
    if (c.meta.value("format", "") != "cuegen-lda") fail(Errc::BadCheckpoint, "not a topic model");
    TopicModel m;
    m.K = c.meta.at("K").get<std::size_t>();
    m.alpha = c.meta.at("alpha").get<double>();
    m.beta = c.meta.at("beta").get<double>();
    m.words = c.meta.at("words").get<std::vector<std::string>>();
    m.sweeps = c.meta.value("sweeps", std::size_t{0});
    m.nkw = textmodel::blob_values<std::int64_t>(c.get("nkw"));
    m.ndk = textmodel::blob_values<std::int64_t>(c.get("ndk"));
    m.nk = textmodel::blob_values<std::int64_t>(c.get("nk"));
    const auto lengths = textmodel::blob_values<std::int32_t>(c.get("doc_lengths"));
    const auto toks = textmodel::blob_values<std::int32_t>(c.get("tokens"));
    const auto zs = textmodel::blob_values<std::int32_t>(c.get("z"));
    if (toks.size() != zs.size()) fail(Errc::BadCheckpoint, "token and assignment arrays differ");
    std::size_t off = 0;
    for (auto len : lengths) {
      const auto n = static_cast<std::size_t>(len);
      if (off + n > toks.size()) fail(Errc::BadCheckpoint, "document lengths exceed token array");
      m.docs.emplace_back(toks.begin() + static_cast<std::ptrdiff_t>(off), toks.begin() + static_cast<std::ptrdiff_t>(off + n));
      m.z.emplace_back(zs.begin() + static_cast<std::ptrdiff_t>(off), zs.begin() + static_cast<std::ptrdiff_t>(off + n));
      off += n;
    }
    if (m.nkw.size() != m.K * m.V() || m.ndk.size() != m.D() * m.K || m.nk.size() != m.K)
      fail(Errc::BadCheckpoint, "count matrix shapes do not match");
    m.verify();
    return m;
  }

  void save(const std::string& path) const { textmodel::write_file(path, textmodel::serialize(to_container())); }
  static TopicModel load(const std::string& path) {
    return from_container(textmodel::deserialize(textmodel::read_file(path)));
  }
};

namespace detail {

inline void lda_sweep(TopicModel& m, std::mt19937_64& rng, std::vector<double>& p) {
  const std::size_t K = m.K, V = m.V();
  const double vb = static_cast<double>(V) * m.beta;
  for (std::size_t d = 0; d < m.D(); ++d) {
    for (std::size_t i = 0; i < m.docs[d].size(); ++i) {
      const auto w = static_cast<std::size_t>(m.docs[d][i]);
      auto k = static_cast<std::size_t>(m.z[d][i]);
      --m.nkw[k * V + w];
      --m.ndk[d * K + k];
      --m.nk[k];
      double total = 0;
      for (std::size_t t = 0; t < K; ++t) {
        total += (static_cast<double>(m.ndk[d * K + t]) + m.alpha) * (static_cast<double>(m.nkw[t * V + w]) + m.beta) /
                 (static_cast<double>(m.nk[t]) + vb);
        p[t] = total;
      }
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53 * total;
      k = static_cast<std::size_t>(std::upper_bound(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(K), u) - p.begin());
      if (k >= K) k = K - 1;
      m.z[d][i] = static_cast<std::int32_t>(k);
      ++m.nkw[k * V + w];
      ++m.ndk[d * K + k];
      ++m.nk[k];
    }
  }
}

}  // namespace detail

inline TopicModel lda_fit(const std::vector<std::vector<std::string>>& docs, const LdaParams& params) {
  if (params.topics == 0) fail(Errc::InvalidParams, "topic count must be positive");
  if (docs.size() < params.topics)
    fail(Errc::TooFewDocs, std::to_string(docs.size()) + " documents for " + std::to_string(params.topics) + " topics");
  TopicModel m;
  m.K = params.topics;
  m.alpha = params.alpha > 0 ? params.alpha : 50.0 / static_cast<double>(params.topics);
  m.beta = params.beta;
  if (!(m.beta > 0)) fail(Errc::InvalidParams, "beta must be positive");

  std::unordered_map<std::string, std::int32_t> index;
  for (const auto& doc : docs) {
    auto& ids = m.docs.emplace_back();
    for (const auto& w : doc) {
      auto [it, added] = index.emplace(w, static_cast<std::int32_t>(m.words.size()));
      if (added) m.words.push_back(w);
      ids.push_back(it->second);
    }
  }
  const std::size_t K = m.K, V = m.V();
  m.nkw.assign(K * V, 0);
  m.ndk.assign(m.D() * K, 0);
  m.nk.assign(K, 0);
  std::mt19937_64 rng(params.seed);
  for (std::size_t d = 0; d < m.D(); ++d) {
    auto& zd = m.z.emplace_back(m.docs[d].size());
    for (std::size_t i = 0; i < zd.size(); ++i) {
      const auto k = static_cast<std::size_t>(rng() % K);
      zd[i] = static_cast<std::int32_t>(k);
      ++m.nkw[k * V + static_cast<std::size_t>(m.docs[d][i])];
      ++m.ndk[d * K + k];
      ++m.nk[k];
    }
  }
  if (params.check_invariants) m.verify();

  std::vector<double> p(K);
  for (std::size_t it = 0; it < params.iters; ++it) {
    detail::lda_sweep(m, rng, p);
    ++m.sweeps;
    if (params.check_invariants) m.verify();
    if (params.on_sweep) params.on_sweep(it + 1);
  }
  return m;
}

struct TopWord {
  std::string word;
  std::size_t id = 0;
  double phi = 0;
};

// The n highest-phi words of topic k; ties go to the smaller word id.
inline std::vector<TopWord> lda_top_words(const TopicModel& m, std::size_t k, std::size_t n) {
  if (k >= m.K) fail(Errc::TopicOutOfRange, "topic " + std::to_string(k) + " of " + std::to_string(m.K));
  std::vector<std::size_t> ids(m.V());
  std::iota(ids.begin(), ids.end(), 0);
  const std::size_t take = std::min(n, ids.size());
  std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(take), ids.end(),
                    [&](std::size_t a, std::size_t b) {
                      const auto ca = m.nkw[k * m.V() + a], cb = m.nkw[k * m.V() + b];
                      return ca != cb ? ca > cb : a < b;
                    });
  std::vector<TopWord> out;
  for (std::size_t i = 0; i < take; ++i) out.push_back({m.words[ids[i]], ids[i], m.phi(k, ids[i])});
  return out;
}

inline std::unordered_set<std::string> read_stopwords(std::istream& in) {
  std::unordered_set<std::string> out;
  std::string line;
  while (std::getline(in, line))
    for (auto& w : corpus::split_whitespace(line))
      if (w.front() != '#') out.insert(corpus::fold_case(w));
  return out;
}

inline std::unordered_set<std::string> read_stopwords_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  return read_stopwords(in);
}

// Cue lines as LDA documents: preprocessed, case-folded, punctuation and
// stopwords removed. Empty documents are skipped.
inline std::vector<std::vector<std::string>> cue_documents(const std::vector<corpus::Script>& scripts,
                                                           const std::unordered_set<std::string>& stopwords) {
  std::vector<std::vector<std::string>> docs;
  for (const auto& s : scripts)
    for (const auto& sc : s.scenes)
      for (const auto& l : sc.lines) {
        if (l.kind != corpus::LineKind::Cue) continue;
        std::vector<std::string> doc;
        for (auto& w : corpus::split_whitespace(corpus::fold_case(corpus::preprocess(l.text)))) {
          const auto cps = utf8::decode(w);
          if (cps.size() == 1 && utf8::is_punct(cps[0])) continue;
          if (stopwords.count(w)) continue;
          doc.push_back(std::move(w));
        }
        if (!doc.empty()) docs.push_back(std::move(doc));
      }
  return docs;
}

}  // namespace cuegen::attributes
