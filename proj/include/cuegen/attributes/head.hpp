#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/error.hpp"
#include "cuegen/textmodel/model.hpp"
#include "cuegen/textmodel/vocab.hpp"

namespace cuegen::attributes {

using textmodel::TokenId;

enum class HeadMode { Softmax, Sigmoid };

inline std::string_view to_string(HeadMode m) { return m == HeadMode::Softmax ? "softmax" : "sigmoid"; }

inline HeadMode parse_head_mode(std::string_view s) {
  if (s == "softmax") return HeadMode::Softmax;
  if (s == "sigmoid") return HeadMode::Sigmoid;
  fail(Errc::InvalidParams, "unknown head mode " + std::string(s));
}

// Single linear layer over a mean-pooled final hidden state. Parameters are
// kept in double regardless of the LM precision; the head is tiny.
struct LinearHead {
  std::vector<std::string> classes;
  HeadMode mode = HeadMode::Softmax;
  std::size_t dim = 0;
  std::vector<double> weights;  // [classes, dim]
  std::vector<double> bias;     // [classes]

  LinearHead() = default;
  LinearHead(std::vector<std::string> cls, HeadMode m, std::size_t d)
      : classes(std::move(cls)), mode(m), dim(d), weights(classes.size() * d, 0.0), bias(classes.size(), 0.0) {}

  std::size_t num_classes() const { return classes.size(); }

  std::size_t class_index(std::string_view name) const {
    for (std::size_t i = 0; i < classes.size(); ++i)
      if (classes[i] == name) return i;
    fail(Errc::LabelOutOfRange, "unknown class " + std::string(name));
  }

  std::vector<double> logits(std::span<const double> x) const {
    if (x.size() != dim)
      fail(Errc::DimensionMismatch, "head expects width " + std::to_string(dim) + ", got " + std::to_string(x.size()));
    std::vector<double> z(bias);
    for (std::size_t c = 0; c < z.size(); ++c) {
      const double* w = weights.data() + c * dim;
      for (std::size_t j = 0; j < dim; ++j) z[c] += w[j] * x[j];
    }
    return z;
  }

  // Class probabilities (softmax) or independent label probabilities (sigmoid).
  std::vector<double> probs(std::span<const double> x) const {
    auto z = logits(x);
    if (mode == HeadMode::Sigmoid) {
      for (auto& v : z) v = 1.0 / (1.0 + std::exp(-v));
      return z;
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (auto& v : z) s += (v = std::exp(v - mx));
    for (auto& v : z) v /= s;
    return z;
  }

  bool all_finite() const {
    return std::all_of(weights.begin(), weights.end(), [](double v) { return std::isfinite(v); }) &&
           std::all_of(bias.begin(), bias.end(), [](double v) { return std::isfinite(v); });
  }

  nlohmann::json to_json() const {
    return {{"format", "cuegen-head"}, {"classes", classes}, {"mode", to_string(mode)},
            {"dim", dim},              {"weights", weights}, {"bias", bias}};
  }

  static LinearHead from_json(const nlohmann::json& j) {
    LinearHead h;
    try {
      if (j.value("format", "") != "cuegen-head") fail(Errc::BadCheckpoint, "not a head file");
      h.classes = j.at("classes").get<std::vector<std::string>>();
      h.mode = parse_head_mode(j.at("mode").get<std::string>());
      h.dim = j.at("dim").get<std::size_t>();
      h.weights = j.at("weights").get<std::vector<double>>();
      h.bias = j.at("bias").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::BadCheckpoint, e.what());
    }
    if (h.weights.size() != h.classes.size() * h.dim || h.bias.size() != h.classes.size())
      fail(Errc::BadCheckpoint, "head tensor sizes do not match classes x dim");
    return h;
  }
};

// log p(target | x). softmax: log-softmax of the target class; sigmoid: log of
// the target label's own sigmoid. When grad is non-null it receives d/dx.
inline double head_log_prob(const LinearHead& head, std::span<const double> x, std::size_t target,
                            std::vector<double>* grad = nullptr) {
  if (target >= head.num_classes())
    fail(Errc::LabelOutOfRange, "target " + std::to_string(target) + " >= " + std::to_string(head.num_classes()));
  const auto z = head.logits(x);
  const std::size_t d = head.dim;
  double lp = 0;
  if (head.mode == HeadMode::Softmax) {
    const double mx = *std::max_element(z.begin(), z.end());
    double s = 0;
    for (double v : z) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    lp = z[target] - lse;
    if (grad) {
      grad->assign(d, 0.0);
      for (std::size_t c = 0; c < z.size(); ++c) {
        const double coef = (c == target ? 1.0 : 0.0) - std::exp(z[c] - lse);
        const double* w = head.weights.data() + c * d;
        for (std::size_t j = 0; j < d; ++j) (*grad)[j] += coef * w[j];
      }
    }
  } else {
    const double zt = z[target];
    // log sigmoid(z) = -softplus(-z)
    lp = zt >= 0 ? -std::log1p(std::exp(-zt)) : zt - std::log1p(std::exp(zt));
    if (grad) {
      const double coef = 1.0 / (1.0 + std::exp(zt));
      const double* w = head.weights.data() + target * d;
      grad->assign(w, w + d);
      for (auto& g : *grad) g *= coef;
    }
  }
  return lp;
}

// BOS + tokens, truncated to the model context.
inline std::vector<TokenId> head_input(const textmodel::Vocab& vocab, std::string_view text, std::size_t context) {
  std::vector<TokenId> ids{textmodel::Vocab::kBos};
  for (TokenId t : vocab.encode(text)) {
    if (ids.size() >= context) break;
    ids.push_back(t);
  }
  return ids;
}

// Mean of the final-layer hidden states over all positions.
template <class Real>
std::vector<double> pooled_hidden(const textmodel::LanguageModel<Real>& lm, std::span<const TokenId> tokens) {
  const std::size_t d = lm.config().dim;
  std::vector<double> out(d, 0.0);
  if (tokens.empty()) return out;
  const auto act = lm.forward(tokens, nullptr, textmodel::LogitsMode::None);
  for (std::size_t i = 0; i < act.n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[j] += static_cast<double>(act.hidden[i * d + j]);
  for (auto& v : out) v /= static_cast<double>(act.n);
  return out;
}

struct LabeledExample {
  std::string text;
  std::vector<std::size_t> labels;  // exactly one in softmax mode
};

struct HeadSpec {
  std::vector<std::string> classes;
  HeadMode mode = HeadMode::Softmax;
};

struct HeadHyper {
  std::size_t epochs = 30;
  double lr = 1e-2;
  std::size_t batch = 16;
  double holdout = 0.2;
  std::uint64_t seed = 0;
};

struct HeadReport {
  double holdout_accuracy = 0;
  double train_accuracy = 0;
  std::size_t train_size = 0;
  std::size_t holdout_size = 0;
  std::vector<double> epoch_loss;
  std::vector<std::string> warnings;
};

namespace detail {

inline bool correct(const LinearHead& h, std::span<const double> x, const std::vector<std::size_t>& labels) {
  const auto p = h.probs(x);
  if (h.mode == HeadMode::Softmax) {
    const auto best = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
    return best == labels.front();
  }
  for (std::size_t c = 0; c < p.size(); ++c) {
    const bool on = std::find(labels.begin(), labels.end(), c) != labels.end();
    if ((p[c] >= 0.5) != on) return false;
  }
  return true;
}

}  // namespace detail

// Trains only the head on frozen pooled features; the LM is never written.
template <class Real>
LinearHead train_head(const std::vector<LabeledExample>& data, const textmodel::LanguageModel<Real>& lm,
                      const textmodel::Vocab& vocab, const HeadSpec& spec, const HeadHyper& hp,
                      HeadReport* report = nullptr) {
  if (data.empty()) fail(Errc::EmptyDataset, "no labeled examples");
  if (spec.classes.empty()) fail(Errc::InvalidParams, "head needs at least one class");
  const std::size_t C = spec.classes.size(), d = lm.config().dim;
  std::vector<std::size_t> seen(C, 0);
  for (const auto& ex : data) {
    if (ex.labels.empty() || (spec.mode == HeadMode::Softmax && ex.labels.size() != 1))
      fail(Errc::LabelOutOfRange, "softmax heads need exactly one label per example");
    for (auto l : ex.labels) {
      if (l >= C) fail(Errc::LabelOutOfRange, "label " + std::to_string(l) + " >= " + std::to_string(C));
      ++seen[l];
    }
  }

  HeadReport rep;
  const auto present = std::count_if(seen.begin(), seen.end(), [](std::size_t n) { return n > 0; });
  if (present < 2) rep.warnings.push_back("dataset contains a single class; the head is trivial");

  std::vector<std::vector<double>> X;
  X.reserve(data.size());
  for (const auto& ex : data) X.push_back(pooled_hidden(lm, head_input(vocab, ex.text, lm.config().context)));

  std::mt19937_64 rng(hp.seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  auto n_hold = static_cast<std::size_t>(std::floor(static_cast<double>(data.size()) * hp.holdout));
  if (n_hold >= data.size()) n_hold = 0;
  std::vector<std::size_t> train(order.begin(), order.end() - static_cast<std::ptrdiff_t>(n_hold));
  std::vector<std::size_t> hold(order.end() - static_cast<std::ptrdiff_t>(n_hold), order.end());
  if (hold.empty()) rep.warnings.push_back("dataset too small for a holdout split; accuracy is measured on training data");

  LinearHead head(spec.classes, spec.mode, d);
  std::vector<double> gw(head.weights.size()), gb(C), mw(gw.size(), 0), vw(gw.size(), 0), mb(C, 0), vb(C, 0);
  const double b1 = 0.9, b2 = 0.999;
  std::size_t t = 0;
  const std::size_t bs = std::max<std::size_t>(1, hp.batch);
  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    for (std::size_t i = train.size(); i > 1; --i) std::swap(train[i - 1], train[rng() % i]);
    double epoch_loss = 0;
    for (std::size_t start = 0; start < train.size(); start += bs) {
      const std::size_t end = std::min(train.size(), start + bs);
      std::fill(gw.begin(), gw.end(), 0.0);
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t s = start; s < end; ++s) {
        const auto& x = X[train[s]];
        const auto& labels = data[train[s]].labels;
        const auto p = head.probs(x);
        for (std::size_t c = 0; c < C; ++c) {
          const double y = std::find(labels.begin(), labels.end(), c) != labels.end() ? 1.0 : 0.0;
          const double dz = (p[c] - y) / static_cast<double>(end - start);
          if (y > 0 || spec.mode == HeadMode::Sigmoid)
            epoch_loss -= std::log(std::max(y > 0 ? p[c] : 1.0 - p[c], 1e-300));
          gb[c] += dz;
          for (std::size_t j = 0; j < d; ++j) gw[c * d + j] += dz * x[j];
        }
      }
      ++t;
      const double c1 = 1 - std::pow(b1, static_cast<double>(t)), c2 = 1 - std::pow(b2, static_cast<double>(t));
      auto adam = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
        for (std::size_t i = 0; i < w.size(); ++i) {
          m[i] = b1 * m[i] + (1 - b1) * g[i];
          v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
          w[i] -= hp.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + 1e-8);
        }
      };
      adam(head.weights, gw, mw, vw);
      adam(head.bias, gb, mb, vb);
    }
    rep.epoch_loss.push_back(epoch_loss / static_cast<double>(std::max<std::size_t>(1, train.size())));
  }
  if (!head.all_finite()) fail(Errc::DivergedLoss, "head parameters became non-finite");

  auto accuracy = [&](const std::vector<std::size_t>& idx) {
    if (idx.empty()) return 0.0;
    std::size_t ok = 0;
    for (auto i : idx) ok += detail::correct(head, X[i], data[i].labels);
    return static_cast<double>(ok) / static_cast<double>(idx.size());
  };
  rep.train_size = train.size();
  rep.holdout_size = hold.size();
  rep.train_accuracy = accuracy(train);
  rep.holdout_accuracy = hold.empty() ? rep.train_accuracy : accuracy(hold);
  if (report) *report = std::move(rep);
  return head;
}

}  // namespace cuegen::attributes
