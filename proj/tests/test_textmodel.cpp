#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "cuegen/corpus/synthetic.hpp"
#include "cuegen/textmodel/checkpoint.hpp"
#include "cuegen/textmodel/sample.hpp"
#include "cuegen/textmodel/train.hpp"

using namespace cuegen;
using namespace cuegen::textmodel;

namespace {

LMConfig small_config(std::size_t vocab = 50) {
  LMConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 32;
  c.ffn = 64;
  c.context = 24;
  c.vocab = vocab;
  c.seed = 3;
  return c;
}

std::vector<TokenId> random_tokens(std::size_t n, std::size_t vocab, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TokenId> t(n);
  for (auto& x : t) x = static_cast<TokenId>(rng() % vocab);
  return t;
}

// Scalar loss: fixed random projection of all logits plus of the final present keys.
struct ProbeLoss {
  std::vector<double> wl, wk;

  template <class Real>
  double operator()(const LanguageModel<Real>& lm, std::span<const TokenId> toks) const {
    auto act = lm.forward(toks);
    double s = 0;
    for (std::size_t i = 0; i < act.logits.size(); ++i) s += wl[i] * act.logits[i];
    const auto& k = act.present.layers.back().keys;
    for (std::size_t i = 0; i < k.size(); ++i) s += wk[i] * k[i];
    return s;
  }
};

}  // namespace

TEST(tokenizer, frequency_order_and_ties) {
  const auto v = train_tokenizer({"a a b"}, 10);
  ASSERT_TRUE(v.contains("a") && v.contains("b"));
  EXPECT_LT(v.id("a"), v.id("b"));
  const auto x = train_tokenizer({"x"}, 10);
  EXPECT_EQ(x.size(), Vocab::kNumSpecials + 1);
  const auto t = train_tokenizer({"b a"}, 10);
  EXPECT_LT(t.id("a"), t.id("b"));
  EXPECT_EQ(t.id("zzz"), Vocab::kUnk);
}

TEST(tokenizer, truncation_and_errors) {
  const auto v = train_tokenizer({"c c c b b a"}, 2);
  EXPECT_EQ(v.size(), Vocab::kNumSpecials + 2);
  EXPECT_EQ(v.id("a"), Vocab::kUnk);
  EXPECT_THROW(train_tokenizer({}, 10), Error);
  EXPECT_THROW(train_tokenizer({"   "}, 10), Error);
}

TEST(tokenizer, specials_fixed_and_roundtrip) {
  const auto v = train_tokenizer({"Hello, world."}, 100);
  EXPECT_EQ(v.token(Vocab::kBos), "<bos>");
  EXPECT_EQ(v.token(Vocab::kEos), "<eos>");
  EXPECT_EQ(v.token(Vocab::kUnk), "<unk>");
  EXPECT_EQ(v.token(Vocab::kPad), "<pad>");
  EXPECT_EQ(v.decode(v.encode("Hello, world.")), "Hello , world .");
  EXPECT_EQ(Vocab::from_json(v.to_json()), v);
}

TEST(config, validation) {
  auto c = small_config();
  c.heads = 3;
  EXPECT_THROW(c.validate(), Error);
  c = small_config();
  c.layers = 0;
  EXPECT_THROW(LanguageModel<float>{c}, Error);
}

TEST(lm_forward, softmax_normalized_and_finite) {
  LanguageModel<float> lm(small_config());
  const auto toks = random_tokens(10, 50, 1);
  auto act = lm.forward(toks);
  for (std::size_t i = 0; i < toks.size(); ++i) {
    std::span<const float> row(act.logits.data() + i * 50, 50);
    for (float x : row) ASSERT_TRUE(std::isfinite(x));
    const auto p = softmax(row);
    double s = 0;
    for (double x : p) s += x;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(lm_forward, incremental_matches_full) {
  LanguageModel<float> lm(small_config());
  const auto toks = random_tokens(16, 50, 2);
  auto full = lm.forward(toks);
  auto past = lm.empty_past();
  double worst = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    auto step = lm.forward(std::span<const TokenId>(&toks[i], 1), &past, LogitsMode::Last);
    for (std::size_t v = 0; v < 50; ++v)
      worst = std::max(worst, std::abs(double(step.logits[v]) - double(full.logits[i * 50 + v])));
    past = std::move(step.present);
  }
  EXPECT_LE(worst, 1e-5);
  EXPECT_EQ(past.length, 16u);
}

TEST(lm_forward, context_overflow) {
  LanguageModel<float> lm(small_config());
  EXPECT_THROW(lm.forward(random_tokens(25, 50, 3)), Error);
  auto past = lm.forward(random_tokens(20, 50, 3)).present;
  try {
    lm.forward(random_tokens(5, 50, 4), &past);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ContextOverflow);
  }
}

TEST(lm_forward, causal) {
  LanguageModel<double> lm(small_config());
  auto a = random_tokens(12, 50, 5);
  auto b = a;
  for (std::size_t i = 7; i < b.size(); ++i) b[i] = static_cast<TokenId>((b[i] + 13) % 50);
  auto fa = lm.forward(a), fb = lm.forward(b);
  for (std::size_t i = 0; i < 7 * 50; ++i) EXPECT_EQ(fa.logits[i], fb.logits[i]);
  bool differs = false;
  for (std::size_t i = 7 * 50; i < fa.logits.size(); ++i) differs |= fa.logits[i] != fb.logits[i];
  EXPECT_TRUE(differs);
}

TEST(lm_backward, parameter_gradients_match_finite_differences) {
  LanguageModel<double> lm(small_config());
  // Perturb gains and biases away from their trivial initial values.
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& p : lm.params()) p += nd(rng) * 0.2;
  const auto toks = random_tokens(6, 50, 6);
  ProbeLoss loss;
  auto act = lm.forward(toks, nullptr, LogitsMode::All, true);
  loss.wl.resize(act.logits.size());
  loss.wk.resize(act.present.layers.back().keys.size());
  for (auto& w : loss.wl) w = nd(rng);
  for (auto& w : loss.wk) w = nd(rng);

  std::vector<double> grad(lm.num_params(), 0.0);
  std::vector<double> dl(loss.wl.begin(), loss.wl.end());
  auto dpresent = PastState<double>::zeros_like(act.present);
  dpresent.layers.back().keys = loss.wk;
  lm.backward(act, dl, {}, &dpresent, grad.data());

  std::size_t checked = 0;
  for (const auto& view : lm.layout()) {
    for (int s = 0; s < 20; ++s) {
      const std::size_t i = view.offset + rng() % view.size;
      const double h = 1e-5, keep = lm.params()[i];
      lm.params()[i] = keep + h;
      const double up = loss(lm, toks);
      lm.params()[i] = keep - h;
      const double dn = loss(lm, toks);
      lm.params()[i] = keep;
      const double fd = (up - dn) / (2 * h);
      const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      EXPECT_LE(std::abs(fd - grad[i]) / denom, 1e-3) << view.name << "[" << i - view.offset << "]";
      ++checked;
    }
  }
  EXPECT_EQ(checked, lm.layout().size() * 20);
}

TEST(lm_backward, past_and_input_gradients_match_finite_differences) {
  LanguageModel<double> lm(small_config());
  const auto ctx = random_tokens(5, 50, 7);
  const auto next = random_tokens(2, 50, 8);
  auto past = lm.forward(ctx).present;
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  std::vector<double> w(2 * 50);
  for (auto& x : w) x = nd(rng);
  auto f = [&](const PastState<double>& p) {
    auto a = lm.forward(next, &p);
    double s = 0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * a.logits[i];
    return s;
  };
  auto act = lm.forward(next, &past, LogitsMode::All, true);
  auto res = lm.backward(act, w, {}, nullptr, nullptr);
  for (std::size_t l = 0; l < 2; ++l) {
    for (int kind = 0; kind < 2; ++kind) {
      for (int s = 0; s < 10; ++s) {
        auto& arr = kind ? past.layers[l].values : past.layers[l].keys;
        const auto& g = kind ? res.dpast.layers[l].values : res.dpast.layers[l].keys;
        const std::size_t i = rng() % arr.size();
        const double keep = arr[i], h = 1e-5;
        arr[i] = keep + h;
        const double up = f(past);
        arr[i] = keep - h;
        const double dn = f(past);
        arr[i] = keep;
        const double fd = (up - dn) / (2 * h);
        EXPECT_LE(std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}), 1e-3);
      }
    }
  }
  EXPECT_EQ(res.dinputs.size(), 2u * 32u);
}

TEST(checkpoint, save_load_bit_exact) {
  const auto vocab = train_tokenizer({"a b c d e f g"}, 100);
  auto cfg = small_config(vocab.size());
  Checkpoint ck{LanguageModel<float>(cfg), vocab, 7, "state"};
  const auto bytes = ck.serialize();
  const auto back = Checkpoint::deserialize(bytes);
  EXPECT_EQ(back.model.params(), ck.model.params());
  EXPECT_EQ(back.vocab, ck.vocab);
  EXPECT_EQ(back.step, 7u);
  EXPECT_EQ(back.serialize(), bytes);
  const std::vector<TokenId> toks = {0, 4, 5, 6};
  EXPECT_EQ(back.model.forward(toks).logits, ck.model.forward(toks).logits);
  EXPECT_EQ(bytes.substr(0, 8), "CUEGENTC");
  EXPECT_THROW(Checkpoint::deserialize(bytes.substr(0, bytes.size() - 3)), Error);
  EXPECT_THROW(Checkpoint::deserialize("garbage"), Error);
}

class TrainedToy : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    corpus::synthetic::SynthOptions so;
    so.scripts = 10;
    scripts_ = corpus::synthetic::generate(so);
    std::vector<std::string> texts;
    for (const auto& s : scripts_)
      for (const auto& sc : s.scenes)
        for (const auto& l : sc.lines) texts.push_back(corpus::render_line(l));
    vocab_ = train_tokenizer(texts, 8000);
    stream_ = encode_corpus(scripts_, vocab_);
    cfg_ = small_config(vocab_.size());
    cfg_.context = 48;
    TrainHyper hp;
    hp.steps = 500;
    hp.batch = 4;
    hp.seq_len = 32;
    ck_ = std::make_unique<Checkpoint>(train_lm<float>(stream_, vocab_, cfg_, hp, &report_));
  }
  static void TearDownTestSuite() { ck_.reset(); }

  static inline std::vector<corpus::Script> scripts_;
  static inline Vocab vocab_;
  static inline std::vector<TokenId> stream_;
  static inline LMConfig cfg_;
  static inline TrainReport report_;
  static inline std::unique_ptr<Checkpoint> ck_;
};

TEST_F(TrainedToy, corpus_is_toy_sized) {
  EXPECT_GT(stream_.size(), 5000u);
  EXPECT_LT(stream_.size(), 15000u);
  EXPECT_EQ(stream_.front(), Vocab::kBos);
  EXPECT_EQ(stream_.back(), Vocab::kEos);
}

TEST_F(TrainedToy, validation_perplexity_beats_uniform) {
  EXPECT_EQ(report_.losses.size(), 500u);
  EXPECT_LT(report_.val_perplexity, static_cast<double>(vocab_.size()));
  EXPECT_LT(report_.losses.back(), report_.losses.front());
  EXPECT_EQ(ck_->step, 500u);
}

TEST_F(TrainedToy, zero_steps_equals_initialisation) {
  TrainHyper hp;
  hp.steps = 0;
  const auto ck = train_lm<float>(stream_, vocab_, cfg_, hp);
  EXPECT_EQ(ck.model.params(), LanguageModel<float>(ck.model.config()).params());
}

TEST_F(TrainedToy, training_is_deterministic) {
  TrainHyper hp;
  hp.steps = 5;
  hp.batch = 2;
  const auto a = train_lm<float>(stream_, vocab_, cfg_, hp);
  const auto b = train_lm<float>(stream_, vocab_, cfg_, hp);
  EXPECT_EQ(a.serialize(), b.serialize());
}

TEST_F(TrainedToy, huge_learning_rate_diverges) {
  TrainHyper hp;
  hp.steps = 200;
  hp.batch = 2;
  hp.seq_len = 16;
  hp.lr = 1e3;
  try {
    train_lm<float>(stream_, vocab_, cfg_, hp);
    FAIL() << "expected DivergedLoss";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DivergedLoss);
  }
}

TEST_F(TrainedToy, sampling) {
  const auto prefix = vocab_.encode("CAL. My mother is dead.");
  SampleOptions o;
  o.top_k = 1;
  o.seed = 1;
  const auto g1 = sample(ck_->model, prefix, o);
  o.seed = 99;
  EXPECT_EQ(sample(ck_->model, prefix, o), g1);
  o.max_len = 0;
  EXPECT_TRUE(sample(ck_->model, prefix, o).empty());
  o.top_k = 10;
  o.max_len = 20;
  for (std::uint64_t seed : {1u, 2u}) {
    o.seed = seed;
    const auto g = sample(ck_->model, prefix, o);
    EXPECT_EQ(sample(ck_->model, prefix, o), g);
    for (auto t : g) {
      EXPECT_GE(t, 0);
      EXPECT_LT(static_cast<std::size_t>(t), vocab_.size());
      EXPECT_NE(t, Vocab::kEos);
    }
  }
  EXPECT_THROW(sample(ck_->model, std::vector<TokenId>(49, 4), o), Error);
}

TEST(sample_top_k, tie_breaks_and_truncation) {
  std::mt19937_64 rng(0);
  const std::vector<double> p = {0.25, 0.25, 0.25, 0.25};
  for (int i = 0; i < 50; ++i) EXPECT_EQ(sample_top_k(p, 1, rng), 0);
  const std::vector<double> q = {0.1, 0.6, 0.3};
  for (int i = 0; i < 50; ++i) EXPECT_NE(sample_top_k(q, 2, rng), 0);
  EXPECT_THROW(sample_top_k(std::vector<double>{0, 0}, 1, rng), Error);
}
