#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"
#include "cuegen/textmodel/checkpoint.hpp"
#include "cuegen/textmodel/model.hpp"
#include "cuegen/textmodel/sample.hpp"

namespace cuegen::textmodel {

// <bos> scene tokens <eos>, scene after scene.
inline std::vector<TokenId> encode_corpus(const std::vector<corpus::Script>& scripts, const Vocab& vocab) {
  std::vector<TokenId> stream;
  for (const auto& s : scripts) {
    for (const auto& sc : s.scenes) {
      stream.push_back(Vocab::kBos);
      for (const auto& l : sc.lines) {
        const auto ids = vocab.encode(corpus::render_line(l));
        stream.insert(stream.end(), ids.begin(), ids.end());
      }
      stream.push_back(Vocab::kEos);
    }
  }
  return stream;
}

struct TrainHyper {
  std::size_t steps = 500;
  double lr = 3e-3;
  std::size_t batch = 8;
  std::size_t seq_len = 0;  // 0: model context
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double val_fraction = 0.1;
  std::size_t log_every = 0;
  std::function<void(std::size_t step, double loss)> on_step;
};

struct TrainReport {
  std::vector<double> losses;
  double val_perplexity = 0;
  double val_tokens = 0;
};

// Mean next-token cross entropy (nats) over non-overlapping windows.
template <class Real>
double stream_nll(const LanguageModel<Real>& lm, std::span<const TokenId> stream, std::size_t window) {
  const std::size_t V = lm.config().vocab;
  window = std::min(window, lm.config().context);
  double nll = 0;
  std::size_t count = 0;
  for (std::size_t start = 0; start + 1 < stream.size(); start += window) {
    const std::size_t len = std::min(window, stream.size() - 1 - start);
    auto act = lm.forward(stream.subspan(start, len));
    for (std::size_t i = 0; i < len; ++i) {
      nll -= log_softmax_at(std::span<const Real>(act.logits.data() + i * V, V),
                            static_cast<std::size_t>(stream[start + i + 1]));
      ++count;
    }
  }
  return count ? nll / static_cast<double>(count) : std::numeric_limits<double>::quiet_NaN();
}

// A mean loss this many times the uniform-guess loss means training blew up
// even if the arithmetic is still finite.
inline constexpr double kDivergenceFactor = 3.0;

// Cross-entropy training from scratch with Adam and global-norm clipping.
// Deterministic for a given config seed.
template <class Real>
BasicCheckpoint<Real> train_lm(std::span<const TokenId> stream, const Vocab& vocab, LMConfig cfg,
                               const TrainHyper& hp, TrainReport* report = nullptr) {
  cfg.vocab = vocab.size();
  LanguageModel<Real> lm(cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);
  TrainReport rep;

  const auto val_len = static_cast<std::size_t>(static_cast<double>(stream.size()) * hp.val_fraction);
  auto train = stream.first(stream.size() - val_len);
  auto val = stream.subspan(stream.size() - val_len);
  std::size_t seq = hp.seq_len ? std::min(hp.seq_len, cfg.context) : cfg.context;
  if (hp.steps > 0 && train.size() < 2) fail(Errc::EmptyCorpus, "training stream too short");
  seq = std::min(seq, train.size() > 1 ? train.size() - 1 : 1);

  const std::size_t np = lm.num_params(), V = cfg.vocab;
  std::vector<Real> grad(np), m(np, Real(0)), v(np, Real(0));
  std::vector<Real> dlogits(seq * V);
  for (std::size_t step = 1; step <= hp.steps; ++step) {
    std::fill(grad.begin(), grad.end(), Real(0));
    double loss = 0;
    for (std::size_t b = 0; b < hp.batch; ++b) {
      const std::size_t off = rng() % (train.size() - seq);
      auto inputs = train.subspan(off, seq);
      auto act = lm.forward(inputs, nullptr, LogitsMode::All, true);
      const double norm = 1.0 / static_cast<double>(hp.batch * seq);
      for (std::size_t i = 0; i < seq; ++i) {
        const std::span<const Real> row(act.logits.data() + i * V, V);
        const auto p = softmax(row);
        const auto target = static_cast<std::size_t>(train[off + i + 1]);
        loss -= log_softmax_at(row, target) * norm;
        for (std::size_t k = 0; k < V; ++k) dlogits[i * V + k] = static_cast<Real>(p[k] * norm);
        dlogits[i * V + target] -= static_cast<Real>(norm);
      }
      lm.backward(act, dlogits, {}, nullptr, grad.data());
    }
    if (!std::isfinite(loss)) fail(Errc::DivergedLoss, "loss became non-finite at step " + std::to_string(step));
    if (loss > kDivergenceFactor * std::log(static_cast<double>(V)))
      fail(Errc::DivergedLoss, "loss " + std::to_string(loss) + " far above the uniform baseline at step " +
                                   std::to_string(step));
    double gnorm = 0;
    for (Real g : grad) gnorm += static_cast<double>(g) * static_cast<double>(g);
    gnorm = std::sqrt(gnorm);
    if (!std::isfinite(gnorm)) fail(Errc::DivergedLoss, "gradient became non-finite at step " + std::to_string(step));
    const double clip = hp.clip_norm > 0 && gnorm > hp.clip_norm ? hp.clip_norm / gnorm : 1.0;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(step));
    auto& P = lm.params();
    for (std::size_t i = 0; i < np; ++i) {
      const double g = static_cast<double>(grad[i]) * clip;
      m[i] = static_cast<Real>(hp.beta1 * m[i] + (1 - hp.beta1) * g);
      v[i] = static_cast<Real>(hp.beta2 * v[i] + (1 - hp.beta2) * g * g);
      const double mh = m[i] / bc1, vh = v[i] / bc2;
      P[i] = static_cast<Real>(P[i] - hp.lr * mh / (std::sqrt(vh) + 1e-8));
    }
    rep.losses.push_back(loss);
    if (hp.on_step && (hp.log_every == 0 || step % hp.log_every == 0 || step == hp.steps)) hp.on_step(step, loss);
  }

  if (val.size() >= 2) {
    rep.val_perplexity = std::exp(stream_nll(lm, val, seq));
    rep.val_tokens = static_cast<double>(val.size() - 1);
  } else {
    rep.val_perplexity = std::numeric_limits<double>::quiet_NaN();
  }
  if (hp.steps > 0 && !std::isfinite(rep.val_perplexity) && val.size() >= 2)
    fail(Errc::DivergedLoss, "validation loss is non-finite");
  if (report) *report = std::move(rep);
  return BasicCheckpoint<Real>{std::move(lm), vocab, hp.steps, rng_state_string(rng)};
}

}  // namespace cuegen::textmodel
