#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "cuegen/error.hpp"
#include "cuegen/textmodel/model.hpp"

namespace cuegen::textmodel {

// Numerically stable softmax in double precision.
template <class Real>
std::vector<double> softmax(std::span<const Real> logits, double temperature = 1.0) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double inv_t = 1.0 / temperature;
  double mx = -std::numeric_limits<double>::infinity();
  for (Real l : logits) mx = std::max(mx, static_cast<double>(l) * inv_t);
  double sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(static_cast<double>(logits[i]) * inv_t - mx);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

// log softmax(logits)[index], via log-sum-exp.
template <class Real>
double log_softmax_at(std::span<const Real> logits, std::size_t index) {
  double mx = -std::numeric_limits<double>::infinity();
  for (Real l : logits) mx = std::max(mx, static_cast<double>(l));
  double sum = 0;
  for (Real l : logits) sum += std::exp(static_cast<double>(l) - mx);
  return static_cast<double>(logits[index]) - mx - std::log(sum);
}

// Uniform double in [0, 1) from the top 53 bits; stable across standard libraries.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Keeps the top_k most probable ids (ties to the smaller id), renormalizes and
// draws one. top_k = 0 means no truncation.
inline TokenId sample_top_k(std::span<const double> probs, std::size_t top_k, std::mt19937_64& rng) {
  if (probs.empty()) fail(Errc::DegenerateDistribution, "empty distribution");
  const std::size_t k = top_k == 0 ? probs.size() : std::min(top_k, probs.size());
  std::vector<TokenId> idx(probs.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto by_prob = [&](TokenId a, TokenId b) {
    return probs[static_cast<std::size_t>(a)] != probs[static_cast<std::size_t>(b)]
               ? probs[static_cast<std::size_t>(a)] > probs[static_cast<std::size_t>(b)]
               : a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), by_prob);
  double mass = 0;
  for (std::size_t i = 0; i < k; ++i) mass += probs[static_cast<std::size_t>(idx[i])];
  if (!(mass > 0)) fail(Errc::DegenerateDistribution, "top-k mass is zero");
  const double u = uniform01(rng) * mass;
  double acc = 0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += probs[static_cast<std::size_t>(idx[i])];
    if (u < acc) return idx[i];
  }
  return idx[k - 1];
}

struct SampleOptions {
  std::size_t top_k = 10;
  double temperature = 1.0;
  std::size_t max_len = 40;
  std::uint64_t seed = 0;
};

// Runs all prefix tokens but the last through the model. Generation then feeds
// the last prefix token against the returned past.
template <class Real>
PastState<Real> prime(const LanguageModel<Real>& lm, std::span<const TokenId> prefix) {
  if (prefix.empty()) fail(Errc::InvalidParams, "prefix must contain at least one token");
  if (prefix.size() > lm.config().context)
    fail(Errc::ContextOverflow, "prefix of " + std::to_string(prefix.size()) + " tokens exceeds context");
  auto past = lm.empty_past();
  if (prefix.size() > 1) past = lm.forward(prefix.first(prefix.size() - 1), &past, LogitsMode::None).present;
  return past;
}

// Top-k multinomial continuation of `prefix`; stops at EOS (not emitted), at
// max_len, or when the context is full.
template <class Real>
std::vector<TokenId> sample(const LanguageModel<Real>& lm, std::span<const TokenId> prefix, const SampleOptions& opts) {
  std::vector<TokenId> out;
  auto past = prime(lm, prefix);
  std::mt19937_64 rng(opts.seed);
  TokenId last = prefix.back();
  while (out.size() < opts.max_len && past.length + 1 <= lm.config().context) {
    auto act = lm.forward(std::span<const TokenId>(&last, 1), &past, LogitsMode::Last);
    const auto p = softmax(act.last_logits(), opts.temperature);
    const TokenId tok = sample_top_k(p, opts.top_k, rng);
    past = std::move(act.present);
    if (tok == Vocab::kEos) break;
    out.push_back(tok);
    last = tok;
  }
  return out;
}

// Mean negative log-likelihood (nats) of `continuation` given `prefix`.
template <class Real>
double continuation_nll(const LanguageModel<Real>& lm, std::span<const TokenId> prefix,
                        std::span<const TokenId> continuation) {
  if (continuation.empty()) return 0.0;
  std::vector<TokenId> all(prefix.begin(), prefix.end());
  all.insert(all.end(), continuation.begin(), continuation.end());
  const std::size_t keep = std::min(all.size(), lm.config().context);
  std::span<const TokenId> window(all.data() + all.size() - keep, keep);
  const std::size_t scored = std::min(continuation.size(), keep - 1);
  auto act = lm.forward(window.first(keep - 1), nullptr, LogitsMode::All);
  const std::size_t V = lm.config().vocab;
  double nll = 0;
  for (std::size_t i = keep - 1 - scored; i < keep - 1; ++i) {
    nll -= log_softmax_at(std::span<const Real>(act.logits.data() + i * V, V), static_cast<std::size_t>(window[i + 1]));
  }
  return nll / static_cast<double>(scored);
}

}  // namespace cuegen::textmodel
