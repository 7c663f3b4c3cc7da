#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/attributes/attribute.hpp"
#include "cuegen/error.hpp"
#include "cuegen/textmodel/model.hpp"
#include "cuegen/textmodel/sample.hpp"
#include "cuegen/textmodel/vocab.hpp"

namespace cuegen::steering {

using attributes::Attribute;
using textmodel::LanguageModel;
using textmodel::LogitsMode;
using textmodel::PastState;
using textmodel::TokenId;

inline constexpr double kProbFloor = 1e-12;
inline constexpr double kNormEps = 1e-10;

struct SteeringParams {
  double alpha = 0.04;      // step size
  double gamma = 1.0;       // gradient-norm exponent
  double kl_scale = 0.01;   // lambda_KL
  double gm_scale = 0.95;   // gamma_gm, post-norm fusion
  std::size_t iterations = 1;  // m
  std::size_t top_k = 10;
  double temperature = 1.0;
  std::size_t max_len = 40;
  std::size_t horizon = 1;
  std::uint64_t seed = 0;

  void validate() const {
    auto bad = [](const std::string& why) { fail(Errc::InvalidParams, why); };
    if (!(alpha >= 0) || !std::isfinite(alpha)) bad("alpha must be >= 0");
    if (!std::isfinite(gamma)) bad("gamma must be finite");
    if (!(kl_scale >= 0) || !std::isfinite(kl_scale)) bad("kl_scale must be >= 0");
    if (!(gm_scale >= 0 && gm_scale <= 1)) bad("gm_scale must lie in [0, 1]");
    if (iterations < 1) bad("iterations must be >= 1");
    if (!(temperature > 0) || !std::isfinite(temperature)) bad("temperature must be > 0");
  }
};

inline void to_json(nlohmann::json& j, const SteeringParams& p) {
  j = {{"alpha", p.alpha},       {"gamma", p.gamma}, {"kl_scale", p.kl_scale},       {"gm_scale", p.gm_scale},
       {"iterations", p.iterations}, {"top_k", p.top_k}, {"temperature", p.temperature}, {"max_len", p.max_len},
       {"horizon", p.horizon},   {"seed", p.seed}};
}

// Missing keys keep their current values; unknown keys are rejected.
inline void merge_params(SteeringParams& p, const nlohmann::json& j) {
  if (!j.is_object()) fail(Errc::InvalidParams, "steering params must be an object");
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "alpha") p.alpha = v.get<double>();
      else if (k == "gamma") p.gamma = v.get<double>();
      else if (k == "kl_scale") p.kl_scale = v.get<double>();
      else if (k == "gm_scale") p.gm_scale = v.get<double>();
      else if (k == "iterations") p.iterations = v.get<std::size_t>();
      else if (k == "top_k") p.top_k = v.get<std::size_t>();
      else if (k == "temperature") p.temperature = v.get<double>();
      else if (k == "max_len") p.max_len = v.get<std::size_t>();
      else if (k == "horizon") p.horizon = v.get<std::size_t>();
      else if (k == "seed") p.seed = v.get<std::uint64_t>();
      else fail(Errc::InvalidParams, "unknown steering parameter " + k);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidParams, e.what());
  }
  p.validate();
}

inline void from_json(const nlohmann::json& j, SteeringParams& p) {
  p = {};
  merge_params(p, j);
}

// normalize(p_mod^g * p_unmod^(1-g)). The endpoints and identical inputs are
// returned unchanged so no rounding is introduced there.
inline std::vector<double> fuse(std::span<const double> p_mod, std::span<const double> p_unmod, double gm_scale) {
  if (p_mod.size() != p_unmod.size()) fail(Errc::DimensionMismatch, "fused distributions differ in size");
  if (!(gm_scale >= 0 && gm_scale <= 1)) fail(Errc::InvalidParams, "gm_scale must lie in [0, 1]");
  for (auto p : {p_mod, p_unmod}) {
    double s = 0;
    for (double v : p) s += v;
    if (std::abs(s - 1.0) > 1e-6) fail(Errc::DegenerateDistribution, "input distribution sums to " + std::to_string(s));
  }
  if (gm_scale == 1.0) return {p_mod.begin(), p_mod.end()};
  if (gm_scale == 0.0 || std::equal(p_mod.begin(), p_mod.end(), p_unmod.begin()))
    return {p_unmod.begin(), p_unmod.end()};
  std::vector<double> out(p_mod.size());
  double s = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (p_mod[i] > 0 && p_unmod[i] > 0)
                 ? std::exp(gm_scale * std::log(p_mod[i]) + (1 - gm_scale) * std::log(p_unmod[i]))
                 : 0.0;
    s += out[i];
  }
  if (!(s > 0) || !std::isfinite(s)) fail(Errc::DegenerateDistribution, "fused distribution has no mass");
  for (auto& v : out) v /= s;
  return out;
}

// KL(q || p) with both floored at kProbFloor inside the logarithm.
inline double kl_divergence(std::span<const double> q, std::span<const double> p) {
  double kl = 0;
  for (std::size_t i = 0; i < q.size(); ++i)
    if (q[i] > 0) kl += q[i] * (std::log(std::max(q[i], kProbFloor)) - std::log(std::max(p[i], kProbFloor)));
  return std::max(0.0, kl);
}

// Running sum of unperturbed final hidden states over the context; the
// discriminator sees their mean together with the horizon states.
struct PoolContext {
  std::vector<double> sum;
  std::size_t count = 0;
};

struct SteeringLoss {
  double attribute = 0;  // -log p(a | .)
  double kl = 0;         // KL(p_mod || p_unmod)
  double total = 0;
  bool sentinel = false;  // bag had zero mass
  std::vector<double> p_mod;  // next-token distribution under the perturbed past
};

namespace detail {

// d/dlogits from d/dp through a softmax.
inline std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> dp) {
  double dot = 0;
  for (std::size_t i = 0; i < p.size(); ++i) dot += p[i] * dp[i];
  std::vector<double> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] * (dp[i] - dot);
  return out;
}

template <class Real>
std::vector<Real> to_real(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

template <class Real>
void check_attribute(const LanguageModel<Real>& lm, const Attribute& attr) {
  if (attr.is_head()) {
    if (attr.head().dim != lm.config().dim)
      fail(Errc::DimensionMismatch, "head width " + std::to_string(attr.head().dim) + " differs from model width " +
                                        std::to_string(lm.config().dim));
    if (attr.target >= attr.head().num_classes()) fail(Errc::LabelOutOfRange, "attribute target out of range");
  } else {
    if (attr.bow().ids.empty()) fail(Errc::EmptyBag, "bag of words is empty");
    for (auto id : attr.bow().ids)
      if (id < 0 || static_cast<std::size_t>(id) >= lm.config().vocab)
        fail(Errc::DimensionMismatch, "bag id outside the model vocabulary");
  }
}

}  // namespace detail

// Steering objective at past + delta for the next position after `last`.
// Bag attributes score the next-token distribution directly. Head attributes
// score the mean of `pool` (which must already cover `last`, unperturbed) and
// `horizon` further states obtained by feeding the expected embedding
// sum_w p(w) e_w onto the unperturbed cache `anchor` that holds `last`. The
// head therefore reaches delta only through the next-token distribution.
// `grad` receives d total / d delta; `present` receives the perturbed cache
// after feeding `last`.
template <class Real>
SteeringLoss steering_loss(const LanguageModel<Real>& lm, const PastState<Real>& past, const PastState<Real>* delta,
                           TokenId last, const PastState<Real>& anchor, const Attribute& attr,
                           const PoolContext& pool, std::span<const double> p_unmod, double kl_scale,
                           std::size_t horizon, PastState<Real>* grad = nullptr, PastState<Real>* present = nullptr) {
  const auto& cfg = lm.config();
  const std::size_t d = cfg.dim, V = cfg.vocab;
  const bool want_grad = grad != nullptr;
  PastState<Real> pert = past;
  if (delta) pert += *delta;

  const auto act = lm.forward(std::span<const TokenId>(&last, 1), &pert, LogitsMode::Last, want_grad);
  SteeringLoss out;
  out.p_mod = textmodel::softmax(act.last_logits());
  out.kl = kl_divergence(out.p_mod, p_unmod);
  std::vector<double> dp(V, 0.0);  // d total / d p_mod

  if (attr.is_head()) {
    const auto& head = attr.head();
    const std::size_t room = anchor.length < cfg.context ? cfg.context - anchor.length : 0;
    const std::size_t H = std::min(horizon, room);
    const Real* table = lm.embedding_table();
    std::vector<textmodel::Activations<Real>> chain;
    std::vector<std::vector<double>> probs{out.p_mod};
    for (std::size_t j = 0; j < H; ++j) {
      std::vector<Real> emb(d, Real(0));
      for (std::size_t w = 0; w < V; ++w) {
        const auto pw = static_cast<Real>(probs[j][w]);
        if (pw == Real(0)) continue;
        for (std::size_t k = 0; k < d; ++k) emb[k] += pw * table[w * d + k];
      }
      const auto* prev = j == 0 ? &anchor : &chain.back().present;
      const auto mode = j + 1 < H ? LogitsMode::Last : LogitsMode::None;
      chain.push_back(lm.forward_embedded(emb, prev, mode, want_grad));
      if (j + 1 < H) probs.push_back(textmodel::softmax(chain.back().last_logits()));
    }
    std::vector<double> pooled(pool.sum);
    pooled.resize(d, 0.0);
    for (const auto& c : chain)
      for (std::size_t k = 0; k < d; ++k) pooled[k] += static_cast<double>(c.hidden[k]);
    const double denom = static_cast<double>(std::max<std::size_t>(1, pool.count + chain.size()));
    for (auto& v : pooled) v /= denom;
    std::vector<double> g;
    out.attribute = -attributes::head_log_prob(head, pooled, attr.target, want_grad ? &g : nullptr);
    if (want_grad && !chain.empty()) {
      std::vector<Real> dh(d);
      for (std::size_t k = 0; k < d; ++k) dh[k] = static_cast<Real>(-g[k] / denom);
      // Backward through the horizon; only the input embeddings carry gradient
      // back to the distributions that produced them.
      PastState<Real> dpresent;
      std::vector<double> dp_in;  // d total / d probs[j] from later links
      for (std::size_t j = chain.size(); j-- > 0;) {
        std::vector<Real> dlogits;
        if (!dp_in.empty()) dlogits = detail::to_real<Real>(detail::softmax_backward(probs[j + 1], dp_in));
        auto res = lm.backward(chain[j], dlogits, dh, j + 1 < chain.size() ? &dpresent : nullptr, nullptr);
        dp_in.assign(V, 0.0);
        for (std::size_t w = 0; w < V; ++w) {
          double s = 0;
          for (std::size_t k = 0; k < d; ++k)
            s += static_cast<double>(table[w * d + k]) * static_cast<double>(res.dinputs[k]);
          dp_in[w] = s;
        }
        dpresent = std::move(res.dpast);
      }
      dp = std::move(dp_in);
    }
  } else {
    std::vector<double> g;
    const auto s = attributes::bow_log_prob(attr.bow(), out.p_mod, want_grad ? &g : nullptr);
    out.attribute = -s.value;
    out.sentinel = s.sentinel;
    if (want_grad)
      for (std::size_t w = 0; w < V; ++w) dp[w] = -g[w];
  }
  out.total = out.attribute + kl_scale * out.kl;
  if (present) *present = act.present;
  if (!want_grad) return out;

  // d KL / d q_w is log(q_w / p_w) + 1 above the floor and log(floor / p_w)
  // below it. Shifting by the constant 1 leaves the softmax backward unchanged
  // and keeps the gradient exactly zero when q == p.
  if (kl_scale > 0) {
    const auto& q = out.p_mod;
    for (std::size_t w = 0; w < V; ++w) {
      if (q[w] <= 0) continue;
      dp[w] += kl_scale * (std::log(std::max(q[w], kProbFloor)) - std::log(std::max(p_unmod[w], kProbFloor)) -
                           (q[w] < kProbFloor ? 1.0 : 0.0));
    }
  }
  const auto dlogits = detail::to_real<Real>(detail::softmax_backward(out.p_mod, dp));
  *grad = lm.backward(act, dlogits, {}, nullptr, nullptr).dpast;
  return out;
}

template <class Real>
struct Perturbation {
  PastState<Real> delta;
  double loss_before = 0;  // attribute loss at delta = 0
  double loss_after = 0;   // attribute loss after the final update
  double kl = 0;           // KL(p_mod || p_unmod) after the final update
  std::vector<double> iteration_losses;  // attribute loss at the start of each iteration
  std::vector<double> delta_norm;        // per layer, keys and values together
  std::vector<double> p_mod;
  PastState<Real> present;  // cache after feeding `last` on past + delta
};

template <class Real>
std::vector<double> layer_norms(const PastState<Real>& s) {
  std::vector<double> out;
  for (const auto& l : s.layers) {
    double n = 0;
    for (Real v : l.keys) n += static_cast<double>(v) * static_cast<double>(v);
    for (Real v : l.values) n += static_cast<double>(v) * static_cast<double>(v);
    out.push_back(std::sqrt(n));
  }
  return out;
}

// m gradient steps on delta (initialised to zero), each normalised per layer
// and per kind: delta -= alpha * g / (|g| + eps)^gamma.
// `pool` covers the context before `last`. `anchor` is the unperturbed forward
// of `last` (its cache and hidden state); when null it is computed from `past`.
template <class Real>
Perturbation<Real> perturb_past(const LanguageModel<Real>& lm, const PastState<Real>& past, TokenId last,
                                const Attribute& attr, const PoolContext& pool, std::span<const double> p_unmod,
                                const SteeringParams& params,
                                const textmodel::Activations<Real>* anchor = nullptr) {
  params.validate();
  detail::check_attribute(lm, attr);
  if (!past.all_finite()) fail(Errc::NonFiniteGradient, "past state is not finite");
  textmodel::Activations<Real> own_anchor;
  if (!anchor) {
    own_anchor = lm.forward(std::span<const TokenId>(&last, 1), &past, LogitsMode::None);
    anchor = &own_anchor;
  }
  PoolContext full = pool;
  full.sum.resize(lm.config().dim, 0.0);
  for (std::size_t k = 0; k < full.sum.size(); ++k) full.sum[k] += static_cast<double>(anchor->hidden[k]);
  ++full.count;
  Perturbation<Real> out;
  out.delta = PastState<Real>::zeros_like(past);
  PastState<Real> grad;
  for (std::size_t it = 0; it < params.iterations; ++it) {
    const auto loss = steering_loss(lm, past, &out.delta, last, anchor->present, attr, full, p_unmod,
                                    params.kl_scale, params.horizon, &grad);
    if (!std::isfinite(loss.total)) fail(Errc::NonFiniteGradient, "steering loss is not finite");
    if (!grad.all_finite()) fail(Errc::NonFiniteGradient, "steering gradient is not finite");
    out.iteration_losses.push_back(loss.attribute);
    if (params.alpha == 0) continue;
    auto step = [&](std::vector<Real>& dst, const std::vector<Real>& g) {
      double n = 0;
      for (Real v : g) n += static_cast<double>(v) * static_cast<double>(v);
      const double scale = params.alpha / std::pow(std::sqrt(n) + kNormEps, params.gamma);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] -= static_cast<Real>(scale * static_cast<double>(g[i]));
    };
    for (std::size_t l = 0; l < out.delta.layers.size(); ++l) {
      step(out.delta.layers[l].keys, grad.layers[l].keys);
      step(out.delta.layers[l].values, grad.layers[l].values);
    }
  }
  if (!out.delta.all_finite()) fail(Errc::NonFiniteGradient, "perturbation is not finite");
  const auto final_loss = steering_loss(lm, past, &out.delta, last, anchor->present, attr, full, p_unmod,
                                        params.kl_scale, params.horizon, static_cast<PastState<Real>*>(nullptr),
                                        &out.present);
  out.loss_before = out.iteration_losses.front();
  out.loss_after = final_loss.attribute;
  out.kl = final_loss.kl;
  out.p_mod = final_loss.p_mod;
  out.delta_norm = layer_norms(out.delta);
  return out;
}

// normalize(p^(1/T)), the same distribution as softmax(logits / T).
inline std::vector<double> temper(std::span<const double> p, double temperature) {
  std::vector<double> out(p.size());
  double s = 0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (out[i] = p[i] > 0 ? std::pow(p[i], 1.0 / temperature) : 0.0);
  for (auto& v : out) v /= s;
  return out;
}

struct StepRecord {
  TokenId token = 0;
  double loss_before = 0;
  double loss_after = 0;
  double kl = 0;
  std::vector<double> delta_norm;
  std::vector<double> iteration_losses;
  bool fallback = false;  // perturbation failed; the unmodified distribution was used
};

struct StepTrace {
  std::vector<StepRecord> steps;

  std::size_t size() const { return steps.size(); }
  double mean_kl() const {
    if (steps.empty()) return 0;
    double s = 0;
    for (const auto& r : steps) s += r.kl;
    return s / static_cast<double>(steps.size());
  }
  std::size_t fallbacks() const {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [](const auto& r) { return r.fallback; }));
  }
};

inline void to_json(nlohmann::json& j, const StepRecord& r) {
  j = {{"token", r.token},
       {"loss_before", r.loss_before},
       {"loss_after", r.loss_after},
       {"kl", r.kl},
       {"delta_norm", r.delta_norm},
       {"iteration_losses", r.iteration_losses},
       {"fallback", r.fallback}};
}

struct SteeredOutput {
  std::vector<TokenId> tokens;
  std::string text;
  StepTrace trace;
};

// Token loop: unmodified forward -> perturb_past -> modified forward -> fuse ->
// top-k sample. Perturbations persist in the steered cache from step to step.
template <class Real>
SteeredOutput generate_steered(const LanguageModel<Real>& lm, const textmodel::Vocab& vocab,
                               std::span<const TokenId> prefix, const Attribute& attr, const SteeringParams& params) {
  params.validate();
  detail::check_attribute(lm, attr);
  if (prefix.empty()) fail(Errc::InvalidParams, "prefix must contain at least one token");
  if (prefix.size() > lm.config().context)
    fail(Errc::ContextOverflow, "prefix of " + std::to_string(prefix.size()) + " tokens exceeds context");
  SteeredOutput out;
  const std::size_t d = lm.config().dim;
  PoolContext pool;
  pool.sum.assign(d, 0.0);
  auto past_u = lm.empty_past();
  if (prefix.size() > 1) {
    auto act = lm.forward(prefix.first(prefix.size() - 1), &past_u, LogitsMode::None);
    for (std::size_t i = 0; i < act.n; ++i)
      for (std::size_t k = 0; k < d; ++k) pool.sum[k] += static_cast<double>(act.hidden[i * d + k]);
    pool.count = act.n;
    past_u = std::move(act.present);
  }
  auto past_s = past_u;
  std::mt19937_64 rng(params.seed);
  TokenId last = prefix.back();
  const bool steer = params.alpha > 0;

  while (out.tokens.size() < params.max_len && past_u.length + 1 <= lm.config().context) {
    auto act_u = lm.forward(std::span<const TokenId>(&last, 1), &past_u, LogitsMode::Last);
    const auto p_unmod_t = textmodel::softmax(act_u.last_logits(), params.temperature);
    StepRecord rec;
    std::vector<double> p_mod_t;
    if (steer) {
      const auto p_unmod = params.temperature == 1.0 ? p_unmod_t : textmodel::softmax(act_u.last_logits());
      try {
        auto pert = perturb_past(lm, past_s, last, attr, pool, p_unmod, params, &act_u);
        rec.loss_before = pert.loss_before;
        rec.loss_after = pert.loss_after;
        rec.kl = pert.kl;
        rec.delta_norm = std::move(pert.delta_norm);
        rec.iteration_losses = std::move(pert.iteration_losses);
        p_mod_t = params.temperature == 1.0 ? std::move(pert.p_mod) : temper(pert.p_mod, params.temperature);
        past_s = std::move(pert.present);
      } catch (const Error& e) {
        if (e.code() != Errc::NonFiniteGradient) throw;
        rec.fallback = true;
        auto act_s = lm.forward(std::span<const TokenId>(&last, 1), &past_s, LogitsMode::None);
        past_s = std::move(act_s.present);
        p_mod_t = p_unmod_t;
      }
    } else {
      past_s = act_u.present;
      p_mod_t = p_unmod_t;
    }
    const auto fused = fuse(p_mod_t, p_unmod_t, params.gm_scale);
    const TokenId tok = textmodel::sample_top_k(fused, params.top_k, rng);
    for (std::size_t k = 0; k < d; ++k) pool.sum[k] += static_cast<double>(act_u.hidden[k]);
    ++pool.count;
    past_u = std::move(act_u.present);
    if (tok == textmodel::Vocab::kEos) break;
    rec.token = tok;
    out.tokens.push_back(tok);
    out.trace.steps.push_back(std::move(rec));
    last = tok;
  }
  out.text = vocab.decode(out.tokens);
  return out;
}

}  // namespace cuegen::steering
