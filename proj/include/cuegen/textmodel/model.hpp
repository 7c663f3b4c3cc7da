#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cuegen/error.hpp"
#include "cuegen/textmodel/config.hpp"
#include "cuegen/textmodel/vocab.hpp"

namespace cuegen::textmodel {

// Per-layer attention keys and values for `length` processed positions, each
// stored row-major as [length, dim]. This is the state steering perturbs.
template <class Real>
struct PastState {
  struct Layer {
    std::vector<Real> keys;
    std::vector<Real> values;
  };
  std::vector<Layer> layers;
  std::size_t length = 0;
  std::size_t dim = 0;

  static PastState empty(std::size_t num_layers, std::size_t dim) {
    PastState p;
    p.layers.resize(num_layers);
    p.dim = dim;
    return p;
  }

  static PastState zeros_like(const PastState& other) {
    PastState p = other;
    for (auto& l : p.layers) {
      std::fill(l.keys.begin(), l.keys.end(), Real(0));
      std::fill(l.values.begin(), l.values.end(), Real(0));
    }
    return p;
  }

  PastState& operator+=(const PastState& rhs) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
      for (std::size_t i = 0; i < layers[l].keys.size(); ++i) layers[l].keys[i] += rhs.layers[l].keys[i];
      for (std::size_t i = 0; i < layers[l].values.size(); ++i) layers[l].values[i] += rhs.layers[l].values[i];
    }
    return *this;
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      for (Real v : l.keys)
        if (!std::isfinite(v)) return false;
      for (Real v : l.values)
        if (!std::isfinite(v)) return false;
    }
    return true;
  }

  // Leading `len` positions.
  PastState prefix(std::size_t len) const {
    PastState p = empty(layers.size(), dim);
    p.length = len;
    for (std::size_t l = 0; l < layers.size(); ++l) {
      p.layers[l].keys.assign(layers[l].keys.begin(), layers[l].keys.begin() + static_cast<std::ptrdiff_t>(len * dim));
      p.layers[l].values.assign(layers[l].values.begin(), layers[l].values.begin() + static_cast<std::ptrdiff_t>(len * dim));
    }
    return p;
  }
};

struct ParamView {
  std::string name;
  std::vector<std::size_t> shape;
  std::size_t offset = 0;
  std::size_t size = 0;
};

enum class LogitsMode { All, Last, None };

template <class Real>
struct LayerCache {
  std::vector<Real> x_in, ln1_xhat, ln1_rstd, ln1_out, q, att, att_out, x_mid;
  std::vector<Real> ln2_xhat, ln2_rstd, ln2_out, fc_pre, fc_act;
};

template <class Real>
struct Activations {
  std::size_t n = 0;
  std::size_t past_len = 0;
  std::vector<TokenId> tokens;  // empty when fed with embeddings
  LogitsMode logits_mode = LogitsMode::All;
  std::vector<Real> logits;  // [n, V] or [V]
  std::vector<Real> hidden;  // final-norm output [n, d]
  PastState<Real> present;   // past plus the new positions
  bool cached = false;
  std::vector<LayerCache<Real>> layers;
  std::vector<Real> final_x, lnf_xhat, lnf_rstd;

  std::span<const Real> last_logits() const {
    const std::size_t v = logits_mode == LogitsMode::All ? logits.size() / n : logits.size();
    return {logits.data() + logits.size() - v, v};
  }
  std::span<const Real> hidden_row(std::size_t i) const {
    const std::size_t d = hidden.size() / n;
    return {hidden.data() + i * d, d};
  }
};

template <class Real>
struct BackwardResult {
  PastState<Real> dpast;       // gradient w.r.t. the incoming past
  std::vector<Real> dinputs;   // gradient w.r.t. the input embedding rows [n, d]
};

namespace kernels {

// Lets dot-product loops vectorize when built with -fopenmp-simd; a no-op otherwise.
#define CUEGEN_SIMD_SUM _Pragma("omp simd reduction(+ : s)")

// out[n,m] = a[n,k] * w[k,m] + b[m]
template <class Real>
void matmul(const Real* a, const Real* w, const Real* b, Real* out, std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    Real* o = out + i * m;
    if (b) std::copy(b, b + m, o);
    else std::fill(o, o + m, Real(0));
    const Real* ai = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = ai[p];
      const Real* wp = w + p * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += av * wp[j];
    }
  }
}

// da += dout * w^T ; dw += a^T * dout ; db += sum_rows(dout)
template <class Real>
void matmul_backward(const Real* a, const Real* w, const Real* dout, Real* da, Real* dw, Real* db,
                     std::size_t n, std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const Real* di = dout + i * m;
    if (da) {
      Real* dai = da + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const Real* wp = w + p * m;
        Real s = 0;
        CUEGEN_SIMD_SUM
        for (std::size_t j = 0; j < m; ++j) s += di[j] * wp[j];
        dai[p] += s;
      }
    }
    if (dw) {
      const Real* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const Real av = ai[p];
        Real* dwp = dw + p * m;
        for (std::size_t j = 0; j < m; ++j) dwp[j] += av * di[j];
      }
    }
    if (db)
      for (std::size_t j = 0; j < m; ++j) db[j] += di[j];
  }
}

template <class Real>
void layernorm(const Real* x, const Real* g, const Real* b, Real* out, Real* xhat, Real* rstd, std::size_t n,
               std::size_t d) {
  constexpr Real eps = Real(1e-5);
  for (std::size_t i = 0; i < n; ++i) {
    const Real* xi = x + i * d;
    Real mean = 0;
    for (std::size_t j = 0; j < d; ++j) mean += xi[j];
    mean /= Real(d);
    Real var = 0;
    for (std::size_t j = 0; j < d; ++j) var += (xi[j] - mean) * (xi[j] - mean);
    var /= Real(d);
    const Real r = Real(1) / std::sqrt(var + eps);
    rstd[i] = r;
    for (std::size_t j = 0; j < d; ++j) {
      const Real h = (xi[j] - mean) * r;
      xhat[i * d + j] = h;
      out[i * d + j] = h * g[j] + b[j];
    }
  }
}

// dx += layernorm'(dout); dg, db accumulated when non-null.
template <class Real>
void layernorm_backward(const Real* dout, const Real* xhat, const Real* rstd, const Real* g, Real* dx, Real* dg,
                        Real* db, std::size_t n, std::size_t d) {
  for (std::size_t i = 0; i < n; ++i) {
    const Real* dyi = dout + i * d;
    const Real* hi = xhat + i * d;
    Real mean_dh = 0, mean_dh_h = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const Real dh = dyi[j] * g[j];
      mean_dh += dh;
      mean_dh_h += dh * hi[j];
      if (dg) dg[j] += dyi[j] * hi[j];
      if (db) db[j] += dyi[j];
    }
    mean_dh /= Real(d);
    mean_dh_h /= Real(d);
    for (std::size_t j = 0; j < d; ++j) {
      const Real dh = dyi[j] * g[j];
      dx[i * d + j] += rstd[i] * (dh - mean_dh - hi[j] * mean_dh_h);
    }
  }
}

template <class Real>
Real gelu(Real x) {
  constexpr Real c = Real(0.7978845608028654);  // sqrt(2/pi)
  return Real(0.5) * x * (Real(1) + std::tanh(c * (x + Real(0.044715) * x * x * x)));
}

template <class Real>
Real gelu_grad(Real x) {
  constexpr Real c = Real(0.7978845608028654);
  const Real u = c * (x + Real(0.044715) * x * x * x);
  const Real t = std::tanh(u);
  const Real du = c * (Real(1) + Real(3 * 0.044715) * x * x);
  return Real(0.5) * (Real(1) + t) + Real(0.5) * x * (Real(1) - t * t) * du;
}

}  // namespace kernels

// Pre-norm decoder-only transformer with learned positions and an output
// projection tied to the token embedding. Parameters live in one flat array so
// optimizers and checkpoints treat them uniformly.
template <class Real>
class LanguageModel {
 public:
  struct LayerOffsets {
    std::size_t ln1_g, ln1_b, w_qkv, b_qkv, w_o, b_o, ln2_g, ln2_b, w_fc, b_fc, w_proj, b_proj;
  };

  explicit LanguageModel(const LMConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    build_layout();
    init_params();
  }

  LanguageModel(const LMConfig& cfg, std::vector<Real> params) : cfg_(cfg) {
    cfg_.validate();
    build_layout();
    if (params.size() != params_.size())
      fail(Errc::BadCheckpoint, "parameter count mismatch: expected " + std::to_string(params_.size()) +
                                    ", got " + std::to_string(params.size()));
    params_ = std::move(params);
  }

  const LMConfig& config() const { return cfg_; }
  std::vector<Real>& params() { return params_; }
  const std::vector<Real>& params() const { return params_; }
  const std::vector<ParamView>& layout() const { return layout_; }
  std::size_t num_params() const { return params_.size(); }

  template <class Other>
  LanguageModel<Other> cast() const {
    return LanguageModel<Other>(cfg_, std::vector<Other>(params_.begin(), params_.end()));
  }

  std::span<const Real> token_embedding(TokenId id) const {
    return {params_.data() + wte_ + static_cast<std::size_t>(id) * cfg_.dim, cfg_.dim};
  }
  const Real* embedding_table() const { return params_.data() + wte_; }
  std::size_t embedding_offset() const { return wte_; }

  PastState<Real> empty_past() const { return PastState<Real>::empty(cfg_.layers, cfg_.dim); }

  Activations<Real> forward(std::span<const TokenId> tokens, const PastState<Real>* past = nullptr,
                            LogitsMode mode = LogitsMode::All, bool cache = false) const {
    const std::size_t d = cfg_.dim;
    std::vector<Real> x(tokens.size() * d);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      const TokenId t = tokens[i];
      if (t < 0 || static_cast<std::size_t>(t) >= cfg_.vocab)
        fail(Errc::InvalidConfig, "token id " + std::to_string(t) + " outside vocabulary");
      std::copy_n(params_.data() + wte_ + static_cast<std::size_t>(t) * d, d, x.data() + i * d);
    }
    auto act = run(std::move(x), tokens.size(), past, mode, cache);
    act.tokens.assign(tokens.begin(), tokens.end());
    return act;
  }

  // Feeds arbitrary input embedding rows [n, d] (positions are still added).
  Activations<Real> forward_embedded(std::span<const Real> inputs, const PastState<Real>* past = nullptr,
                                     LogitsMode mode = LogitsMode::All, bool cache = false) const {
    if (inputs.size() % cfg_.dim != 0) fail(Errc::DimensionMismatch, "embedding rows must have model width");
    return run(std::vector<Real>(inputs.begin(), inputs.end()), inputs.size() / cfg_.dim, past, mode, cache);
  }

  // Backpropagates through a cached forward. dlogits is [n,V] for LogitsMode::All
  // or [V] for LogitsMode::Last; dhidden is [n,d]; dpresent carries upstream
  // gradients on the returned present state (e.g. from a later forward that used
  // it as past). Parameter gradients are accumulated into dparams when non-null.
  BackwardResult<Real> backward(const Activations<Real>& act, std::span<const Real> dlogits,
                                std::span<const Real> dhidden, const PastState<Real>* dpresent,
                                Real* dparams) const {
    if (!act.cached) fail(Errc::InvalidConfig, "backward needs a forward run with cache=true");
    const std::size_t n = act.n, t = act.past_len, d = cfg_.dim, V = cfg_.vocab, H = cfg_.heads;
    const std::size_t dh = cfg_.head_dim(), tt = t + n, f = cfg_.ffn;
    const Real* P = params_.data();
    auto G = [&](std::size_t off) { return dparams ? dparams + off : nullptr; };

    std::vector<Real> dh_final(n * d, Real(0));
    if (!dhidden.empty()) std::copy(dhidden.begin(), dhidden.end(), dh_final.begin());
    if (!dlogits.empty()) {
      const std::size_t first = dlogits.size() == V ? n - 1 : 0;
      for (std::size_t i = first; i < n; ++i) {
        const Real* dl = dlogits.data() + (i - first) * V;
        const Real* hi = act.hidden.data() + i * d;
        Real* dhi = dh_final.data() + i * d;
        for (std::size_t v = 0; v < V; ++v) {
          const Real g = dl[v];
          if (g == Real(0)) continue;
          const Real* e = P + wte_ + v * d;
          for (std::size_t j = 0; j < d; ++j) dhi[j] += g * e[j];
          if (dparams) {
            Real* de = dparams + wte_ + v * d;
            for (std::size_t j = 0; j < d; ++j) de[j] += g * hi[j];
          }
        }
      }
    }

    std::vector<Real> dx(n * d, Real(0));
    kernels::layernorm_backward(dh_final.data(), act.lnf_xhat.data(), act.lnf_rstd.data(), P + lnf_g_, dx.data(),
                                G(lnf_g_), G(lnf_b_), n, d);

    BackwardResult<Real> res;
    res.dpast = PastState<Real>::empty(cfg_.layers, d);
    res.dpast.length = t;
    const Real scale = Real(1) / std::sqrt(Real(dh));

    std::vector<Real> dmid(n * d), dfc(n * f), dln2(n * d), datt(n * d), dqkv(n * 3 * d), dln1(n * d);
    std::vector<Real> dK(tt * d), dV(tt * d), dP(tt);
    for (std::size_t li = cfg_.layers; li-- > 0;) {
      const auto& o = lo_[li];
      const auto& c = act.layers[li];
      const auto& K = act.present.layers[li].keys;
      const auto& Vv = act.present.layers[li].values;

      // MLP branch: x_out = x_mid + proj(gelu(fc(ln2(x_mid))))
      std::fill(dfc.begin(), dfc.end(), Real(0));
      kernels::matmul_backward(c.fc_act.data(), P + o.w_proj, dx.data(), dfc.data(), G(o.w_proj), G(o.b_proj), n, f, d);
      for (std::size_t i = 0; i < n * f; ++i) dfc[i] *= kernels::gelu_grad(c.fc_pre[i]);
      std::fill(dln2.begin(), dln2.end(), Real(0));
      kernels::matmul_backward(c.ln2_out.data(), P + o.w_fc, dfc.data(), dln2.data(), G(o.w_fc), G(o.b_fc), n, d, f);
      dmid = dx;
      kernels::layernorm_backward(dln2.data(), c.ln2_xhat.data(), c.ln2_rstd.data(), P + o.ln2_g, dmid.data(),
                                  G(o.ln2_g), G(o.ln2_b), n, d);

      // Attention branch: x_mid = x_in + out_proj(attn(ln1(x_in)))
      std::fill(datt.begin(), datt.end(), Real(0));
      kernels::matmul_backward(c.att_out.data(), P + o.w_o, dmid.data(), datt.data(), G(o.w_o), G(o.b_o), n, d, d);
      std::fill(dK.begin(), dK.end(), Real(0));
      std::fill(dV.begin(), dV.end(), Real(0));
      std::fill(dqkv.begin(), dqkv.end(), Real(0));
      if (dpresent) {
        const auto& up = dpresent->layers[li];
        std::copy(up.keys.begin(), up.keys.end(), dK.begin());
        std::copy(up.values.begin(), up.values.end(), dV.begin());
      }
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t ho = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t span = t + i + 1;
          const Real* a = c.att.data() + (h * n + i) * tt;
          const Real* doi = datt.data() + i * d + ho;
          Real dot = 0;
          for (std::size_t j = 0; j < span; ++j) {
            const Real* vj = Vv.data() + j * d + ho;
            Real s = 0;
            CUEGEN_SIMD_SUM
            for (std::size_t e = 0; e < dh; ++e) s += doi[e] * vj[e];
            dP[j] = s;
            dot += s * a[j];
            Real* dvj = dV.data() + j * d + ho;
            for (std::size_t e = 0; e < dh; ++e) dvj[e] += a[j] * doi[e];
          }
          const Real* qi = c.q.data() + i * d + ho;
          Real* dqi = dqkv.data() + i * 3 * d + ho;
          for (std::size_t j = 0; j < span; ++j) {
            const Real ds = a[j] * (dP[j] - dot) * scale;
            if (ds == Real(0)) continue;
            const Real* kj = K.data() + j * d + ho;
            Real* dkj = dK.data() + j * d + ho;
            for (std::size_t e = 0; e < dh; ++e) {
              dqi[e] += ds * kj[e];
              dkj[e] += ds * qi[e];
            }
          }
        }
      }
      auto& dp = res.dpast.layers[li];
      dp.keys.assign(dK.begin(), dK.begin() + static_cast<std::ptrdiff_t>(t * d));
      dp.values.assign(dV.begin(), dV.begin() + static_cast<std::ptrdiff_t>(t * d));
      for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(dK.data() + (t + i) * d, d, dqkv.data() + i * 3 * d + d);
        std::copy_n(dV.data() + (t + i) * d, d, dqkv.data() + i * 3 * d + 2 * d);
      }
      std::fill(dln1.begin(), dln1.end(), Real(0));
      kernels::matmul_backward(c.ln1_out.data(), P + o.w_qkv, dqkv.data(), dln1.data(), G(o.w_qkv), G(o.b_qkv), n, d,
                               3 * d);
      dx = dmid;
      kernels::layernorm_backward(dln1.data(), c.ln1_xhat.data(), c.ln1_rstd.data(), P + o.ln1_g, dx.data(),
                                  G(o.ln1_g), G(o.ln1_b), n, d);
    }

    if (dparams) {
      for (std::size_t i = 0; i < n; ++i) {
        Real* dp = dparams + wpe_ + (t + i) * d;
        for (std::size_t j = 0; j < d; ++j) dp[j] += dx[i * d + j];
        if (!act.tokens.empty()) {
          Real* de = dparams + wte_ + static_cast<std::size_t>(act.tokens[i]) * d;
          for (std::size_t j = 0; j < d; ++j) de[j] += dx[i * d + j];
        }
      }
    }
    res.dinputs = std::move(dx);
    return res;
  }

 private:
  Activations<Real> run(std::vector<Real> x, std::size_t n, const PastState<Real>* past, LogitsMode mode,
                        bool cache) const {
    const std::size_t d = cfg_.dim, H = cfg_.heads, dh = cfg_.head_dim(), f = cfg_.ffn, V = cfg_.vocab;
    const std::size_t t = past ? past->length : 0;
    if (past && (past->layers.size() != cfg_.layers || past->dim != d))
      fail(Errc::DimensionMismatch, "past state does not match model shape");
    if (t + n > cfg_.context)
      fail(Errc::ContextOverflow, std::to_string(t + n) + " positions exceed context " + std::to_string(cfg_.context));
    const std::size_t tt = t + n;
    const Real* P = params_.data();

    Activations<Real> act;
    act.n = n;
    act.past_len = t;
    act.cached = cache;
    act.logits_mode = mode;
    act.present = past ? *past : empty_past();
    act.present.length = tt;
    if (cache) act.layers.resize(cfg_.layers);

    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) x[i * d + j] += P[wpe_ + (t + i) * d + j];

    const Real scale = Real(1) / std::sqrt(Real(dh));
    std::vector<Real> xhat(n * d), rstd(n), ln(n * d), qkv(n * 3 * d), att(H * n * tt), ao(n * d), tmp(n * d);
    std::vector<Real> fc(n * f), fca(n * f);
    for (std::size_t li = 0; li < cfg_.layers; ++li) {
      const auto& o = lo_[li];
      if (cache) act.layers[li].x_in = x;
      kernels::layernorm(x.data(), P + o.ln1_g, P + o.ln1_b, ln.data(), xhat.data(), rstd.data(), n, d);
      kernels::matmul(ln.data(), P + o.w_qkv, P + o.b_qkv, qkv.data(), n, d, 3 * d);
      auto& K = act.present.layers[li].keys;
      auto& Vv = act.present.layers[li].values;
      K.resize(tt * d);
      Vv.resize(tt * d);
      for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(qkv.data() + i * 3 * d + d, d, K.data() + (t + i) * d);
        std::copy_n(qkv.data() + i * 3 * d + 2 * d, d, Vv.data() + (t + i) * d);
      }
      std::fill(ao.begin(), ao.end(), Real(0));
      std::fill(att.begin(), att.end(), Real(0));
      for (std::size_t h = 0; h < H; ++h) {
        const std::size_t ho = h * dh;
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t span = t + i + 1;
          const Real* qi = qkv.data() + i * 3 * d + ho;
          Real* a = att.data() + (h * n + i) * tt;
          Real mx = -std::numeric_limits<Real>::infinity();
          for (std::size_t j = 0; j < span; ++j) {
            const Real* kj = K.data() + j * d + ho;
            Real s = 0;
            CUEGEN_SIMD_SUM
            for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
            a[j] = s * scale;
            mx = std::max(mx, a[j]);
          }
          Real sum = 0;
          for (std::size_t j = 0; j < span; ++j) {
            a[j] = std::exp(a[j] - mx);
            sum += a[j];
          }
          Real* oi = ao.data() + i * d + ho;
          for (std::size_t j = 0; j < span; ++j) {
            a[j] /= sum;
            const Real* vj = Vv.data() + j * d + ho;
            for (std::size_t e = 0; e < dh; ++e) oi[e] += a[j] * vj[e];
          }
        }
      }
      kernels::matmul(ao.data(), P + o.w_o, P + o.b_o, tmp.data(), n, d, d);
      for (std::size_t i = 0; i < n * d; ++i) x[i] += tmp[i];
      if (cache) {
        auto& c = act.layers[li];
        c.ln1_xhat = xhat;
        c.ln1_rstd = rstd;
        c.ln1_out = ln;
        c.q.resize(n * d);
        for (std::size_t i = 0; i < n; ++i) std::copy_n(qkv.data() + i * 3 * d, d, c.q.data() + i * d);
        c.att = att;
        c.att_out = ao;
        c.x_mid = x;
      }
      kernels::layernorm(x.data(), P + o.ln2_g, P + o.ln2_b, ln.data(), xhat.data(), rstd.data(), n, d);
      kernels::matmul(ln.data(), P + o.w_fc, P + o.b_fc, fc.data(), n, d, f);
      for (std::size_t i = 0; i < n * f; ++i) fca[i] = kernels::gelu(fc[i]);
      kernels::matmul(fca.data(), P + o.w_proj, P + o.b_proj, tmp.data(), n, f, d);
      for (std::size_t i = 0; i < n * d; ++i) x[i] += tmp[i];
      if (cache) {
        auto& c = act.layers[li];
        c.ln2_xhat = xhat;
        c.ln2_rstd = rstd;
        c.ln2_out = ln;
        c.fc_pre = fc;
        c.fc_act = fca;
      }
    }

    act.hidden.resize(n * d);
    std::vector<Real> fx(n * d), frstd(n);
    kernels::layernorm(x.data(), P + lnf_g_, P + lnf_b_, act.hidden.data(), fx.data(), frstd.data(), n, d);
    if (cache) {
      act.final_x = x;
      act.lnf_xhat = std::move(fx);
      act.lnf_rstd = std::move(frstd);
    }

    if (mode != LogitsMode::None && n > 0) {
      const std::size_t first = mode == LogitsMode::Last ? n - 1 : 0;
      act.logits.resize((n - first) * V);
      for (std::size_t i = first; i < n; ++i) {
        const Real* hi = act.hidden.data() + i * d;
        Real* out = act.logits.data() + (i - first) * V;
        for (std::size_t v = 0; v < V; ++v) {
          const Real* e = P + wte_ + v * d;
          Real s = 0;
          CUEGEN_SIMD_SUM
          for (std::size_t j = 0; j < d; ++j) s += hi[j] * e[j];
          out[v] = s;
        }
      }
    }
    return act;
  }

  void build_layout() {
    const std::size_t d = cfg_.dim, f = cfg_.ffn;
    std::size_t off = 0;
    auto add = [&](std::string name, std::vector<std::size_t> shape) {
      std::size_t sz = 1;
      for (auto s : shape) sz *= s;
      layout_.push_back({std::move(name), std::move(shape), off, sz});
      off += sz;
      return off - sz;
    };
    wte_ = add("wte", {cfg_.vocab, d});
    wpe_ = add("wpe", {cfg_.context, d});
    lo_.resize(cfg_.layers);
    for (std::size_t l = 0; l < cfg_.layers; ++l) {
      const std::string p = "h" + std::to_string(l) + ".";
      auto& o = lo_[l];
      o.ln1_g = add(p + "ln1.g", {d});
      o.ln1_b = add(p + "ln1.b", {d});
      o.w_qkv = add(p + "attn.w_qkv", {d, 3 * d});
      o.b_qkv = add(p + "attn.b_qkv", {3 * d});
      o.w_o = add(p + "attn.w_o", {d, d});
      o.b_o = add(p + "attn.b_o", {d});
      o.ln2_g = add(p + "ln2.g", {d});
      o.ln2_b = add(p + "ln2.b", {d});
      o.w_fc = add(p + "mlp.w_fc", {d, f});
      o.b_fc = add(p + "mlp.b_fc", {f});
      o.w_proj = add(p + "mlp.w_proj", {f, d});
      o.b_proj = add(p + "mlp.b_proj", {d});
    }
    lnf_g_ = add("lnf.g", {d});
    lnf_b_ = add("lnf.b", {d});
    params_.assign(off, Real(0));
  }

  void init_params() {
    std::mt19937_64 rng(cfg_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double proj_std = 0.02 / std::sqrt(2.0 * static_cast<double>(cfg_.layers));
    for (const auto& v : layout_) {
      const auto& nm = v.name;
      auto ends_with = [&](std::string_view s) {
        return nm.size() >= s.size() && nm.compare(nm.size() - s.size(), s.size(), s) == 0;
      };
      double std_dev = 0.0;
      Real fill = 0;
      if (ends_with(".g")) fill = 1;
      else if (ends_with("w_o") || ends_with("w_proj")) std_dev = proj_std;
      else if (nm == "wte" || nm == "wpe" || ends_with("w_qkv") || ends_with("w_fc")) std_dev = 0.02;
      for (std::size_t i = 0; i < v.size; ++i)
        params_[v.offset + i] = std_dev > 0 ? static_cast<Real>(normal(rng) * std_dev) : fill;
    }
  }

  LMConfig cfg_;
  std::vector<Real> params_;
  std::vector<ParamView> layout_;
  std::vector<LayerOffsets> lo_;
  std::size_t wte_ = 0, wpe_ = 0, lnf_g_ = 0, lnf_b_ = 0;
};

}  // namespace cuegen::textmodel
