#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "cuegen/attributes/attribute.hpp"
#include "cuegen/attributes/emotion.hpp"
#include "cuegen/attributes/lda.hpp"
#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/corpus/synthetic.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace cuegen;
using namespace cuegen::attributes;

namespace {

LinearHead random_head(HeadMode mode, std::size_t classes, std::size_t dim, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  LinearHead h(names, mode, dim);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& w : h.weights) w = nd(rng);
  for (auto& b : h.bias) b = nd(rng);
  return h;
}

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<double> v(n);
  for (auto& x : v) x = nd(rng);
  return v;
}

textmodel::LMConfig tiny_config(std::size_t vocab) {
  textmodel::LMConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 32;
  c.ffn = 64;
  c.context = 48;
  c.vocab = vocab;
  return c;
}

}  // namespace

TEST(head_log_prob, symmetric_zero_head) {
  LinearHead h({"cue", "dialogue"}, HeadMode::Softmax, 4);
  const std::vector<double> x = {1, -2, 3, 0.5};
  EXPECT_DOUBLE_EQ(head_log_prob(h, x, 0), std::log(0.5));
  EXPECT_DOUBLE_EQ(head_log_prob(h, x, 1), std::log(0.5));
  LinearHead s({"joy", "fear", "anger"}, HeadMode::Sigmoid, 4);
  for (std::size_t c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(head_log_prob(s, x, c), std::log(0.5));
}

TEST(head_log_prob, softmax_probabilities_normalised) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto h = random_head(HeadMode::Softmax, 5, 8, seed);
    const auto x = random_vec(8, seed + 100);
    double s = 0;
    for (std::size_t c = 0; c < 5; ++c) s += std::exp(head_log_prob(h, x, c));
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(head_log_prob, input_gradient_matches_finite_differences) {
  for (auto mode : {HeadMode::Softmax, HeadMode::Sigmoid}) {
    const auto h = random_head(mode, 3, 16, 7);
    auto x = random_vec(16, 8);
    for (std::size_t target = 0; target < 3; ++target) {
      std::vector<double> g;
      head_log_prob(h, x, target, &g);
      for (std::size_t j = 0; j < 16; ++j) {
        const double keep = x[j], eps = 1e-6;
        x[j] = keep + eps;
        const double up = head_log_prob(h, x, target);
        x[j] = keep - eps;
        const double dn = head_log_prob(h, x, target);
        x[j] = keep;
        const double fd = (up - dn) / (2 * eps);
        EXPECT_LE(std::abs(fd - g[j]) / std::max({std::abs(fd), std::abs(g[j]), 1e-8}), 1e-4);
      }
    }
  }
}

TEST(head_log_prob, errors) {
  LinearHead h({"a", "b"}, HeadMode::Softmax, 4);
  try {
    head_log_prob(h, std::vector<double>(3, 0.0), 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DimensionMismatch);
  }
  EXPECT_THROW(head_log_prob(h, std::vector<double>(4, 0.0), 2), Error);
}

TEST(head, json_round_trip) {
  const auto h = random_head(HeadMode::Sigmoid, 3, 5, 1);
  const auto back = LinearHead::from_json(nlohmann::json::parse(h.to_json().dump()));
  EXPECT_EQ(back.weights, h.weights);
  EXPECT_EQ(back.bias, h.bias);
  EXPECT_EQ(back.mode, HeadMode::Sigmoid);
  EXPECT_EQ(back.classes, h.classes);
}

class HeadTraining : public ::testing::Test {
 protected:
  void SetUp() override {
    corpus::synthetic::SynthOptions so;
    so.scripts = 4;
    const auto scripts = corpus::synthetic::generate(so);
    std::vector<std::string> texts;
    for (const auto& s : scripts)
      for (const auto& sc : s.scenes)
        for (const auto& l : sc.lines) {
          texts.push_back(corpus::render_line(l));
          data.push_back({texts.back(), {l.kind == corpus::LineKind::Cue ? 0u : 1u}});
        }
    vocab = textmodel::train_tokenizer(texts, 1000);
    lm = std::make_unique<textmodel::LanguageModel<float>>(tiny_config(vocab.size()));
  }

  std::vector<LabeledExample> data;
  textmodel::Vocab vocab;
  std::unique_ptr<textmodel::LanguageModel<float>> lm;
};

TEST_F(HeadTraining, separable_cue_dialogue) {
  const auto before = lm->params();
  HeadReport rep;
  const auto head = train_head(data, *lm, vocab, {{"cue", "dialogue"}, HeadMode::Softmax}, {}, &rep);
  EXPECT_GE(rep.holdout_accuracy, 0.95);
  EXPECT_GT(rep.holdout_size, 0u);
  EXPECT_TRUE(rep.warnings.empty());
  EXPECT_EQ(lm->params(), before);
  EXPECT_EQ(head.dim, 32u);
  EXPECT_TRUE(head.all_finite());
  // Deterministic for a fixed seed.
  const auto again = train_head(data, *lm, vocab, {{"cue", "dialogue"}, HeadMode::Softmax}, {});
  EXPECT_EQ(again.weights, head.weights);
}

TEST_F(HeadTraining, errors_and_degenerate_data) {
  try {
    train_head({}, *lm, vocab, {{"cue", "dialogue"}, HeadMode::Softmax}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyDataset);
  }
  try {
    train_head({{"x", {2}}}, *lm, vocab, {{"cue", "dialogue"}, HeadMode::Softmax}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelOutOfRange);
  }
  std::vector<LabeledExample> one_class;
  for (const auto& ex : data)
    if (ex.labels[0] == 0) one_class.push_back(ex);
  HeadReport rep;
  train_head(one_class, *lm, vocab, {{"cue", "dialogue"}, HeadMode::Softmax}, {}, &rep);
  EXPECT_DOUBLE_EQ(rep.holdout_accuracy, 1.0);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST_F(HeadTraining, sigmoid_multi_label) {
  // Label 0: line is a cue; label 1: line mentions a name.
  std::vector<LabeledExample> ml;
  for (const auto& ex : data) {
    LabeledExample e{ex.text, {}};
    if (ex.labels[0] == 0) e.labels.push_back(0);
    e.labels.push_back(1);
    ml.push_back(e);
  }
  HeadReport rep;
  const auto head = train_head(ml, *lm, vocab, {{"cue", "any"}, HeadMode::Sigmoid}, {}, &rep);
  EXPECT_GE(rep.holdout_accuracy, 0.9);
  EXPECT_EQ(head.mode, HeadMode::Sigmoid);
}

TEST(bow_log_prob, examples) {
  std::vector<std::string> words;
  for (int i = 0; i < 96; ++i) words.push_back("w" + std::to_string(i));
  const textmodel::Vocab vocab(words);
  ASSERT_EQ(vocab.size(), 100u);
  const std::vector<double> uniform(100, 0.01);

  std::vector<std::string> all(words);
  const auto whole = make_bow(all, vocab);
  // Specials are never bag members, so give them no mass here.
  std::vector<double> p(100, 0.0);
  for (std::size_t i = 4; i < 100; ++i) p[i] = 1.0 / 96.0;
  EXPECT_NEAR(bow_log_prob(whole, p).value, 0.0, 1e-12);

  const auto ten = make_bow({"w0", "w1", "w2", "w3", "w4", "w5", "w6", "w7", "w8", "w9"}, vocab);
  EXPECT_NEAR(bow_log_prob(ten, uniform).value, std::log(0.1), 1e-12);

  std::vector<double> q(100, 0.0);
  q[99] = 1.0;
  const auto s = bow_log_prob(ten, q);
  EXPECT_TRUE(s.sentinel);
  EXPECT_EQ(s.value, kLargeNegative);
}

TEST(bow_log_prob, errors_drops_and_gradient) {
  const textmodel::Vocab vocab({"sea", "ship", "storm"});
  try {
    make_bow({"desert", "camel"}, vocab);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyBag);
  }
  const auto b = make_bow({"sea", "ship", "sea", "anchor", "<unk>"}, vocab, BowSource::Manual, "nautical");
  EXPECT_EQ(b.ids.size(), 2u);
  EXPECT_EQ(b.dropped, 2u);
  BowAttribute empty;
  EXPECT_THROW(bow_log_prob(empty, std::vector<double>(7, 1.0 / 7)), Error);

  const std::vector<double> p = {0.1, 0.1, 0.1, 0.1, 0.2, 0.3, 0.1};
  std::vector<double> g;
  const auto s = bow_log_prob(b, p, &g);
  EXPECT_NEAR(s.value, std::log(0.5), 1e-12);
  EXPECT_NEAR(g[4], 2.0, 1e-12);
  EXPECT_NEAR(g[5], 2.0, 1e-12);
  EXPECT_EQ(g[6], 0.0);
}

TEST(bow_log_prob, never_positive) {
  std::vector<std::string> words;
  for (int i = 0; i < 20; ++i) words.push_back("w" + std::to_string(i));
  const textmodel::Vocab vocab(words);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> p(vocab.size());
    double s = 0;
    for (auto& x : p) s += (x = static_cast<double>(rng() % 1000));
    if (s == 0) continue;
    for (auto& x : p) x /= s;
    std::vector<std::string> bag;
    for (const auto& w : words)
      if (rng() % 3 == 0) bag.push_back(w);
    if (bag.empty()) bag.push_back("w0");
    const auto r = bow_log_prob(make_bow(bag, vocab), p);
    EXPECT_LE(r.value, 0.0);
    if (r.value == 0.0) {
      EXPECT_NEAR(r.mass, 1.0, 1e-12);
    }
  }
}

TEST(bow, word_list_format) {
  std::istringstream in("# topic words\nsea\n\n  ship  \nstorm\n");
  EXPECT_EQ(read_word_list(in), (std::vector<std::string>{"sea", "ship", "storm"}));
}

TEST(lda_fit, single_topic_is_smoothed_unigram) {
  const std::vector<std::vector<std::string>> docs = {{"a", "a", "b"}};
  LdaParams p;
  p.topics = 1;
  p.iters = 20;
  const auto m = lda_fit(docs, p);
  for (const auto& zd : m.z)
    for (auto k : zd) EXPECT_EQ(k, 0);
  EXPECT_NEAR(m.phi(0, 0), (2 + 0.01) / (3 + 2 * 0.01), 1e-12);
  EXPECT_NEAR(m.phi(0, 1), (1 + 0.01) / (3 + 2 * 0.01), 1e-12);
  const auto top = lda_top_words(m, 0, 1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].word, "a");
}

TEST(lda_fit, zero_iterations_is_the_initialisation) {
  const auto docs = cuegen_test::three_topic_corpus(1, 20, 15);
  LdaParams p;
  p.topics = 3;
  p.iters = 0;
  p.seed = 42;
  const auto m = lda_fit(docs, p);
  std::mt19937_64 rng(42);
  std::vector<std::int64_t> nk(3, 0);
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (std::size_t i = 0; i < docs[d].size(); ++i) {
      const auto k = static_cast<std::int32_t>(rng() % 3);
      ASSERT_EQ(m.z[d][i], k);
      ++nk[static_cast<std::size_t>(k)];
    }
  EXPECT_EQ(m.nk, nk);
  EXPECT_EQ(m.sweeps, 0u);
}

TEST(lda_fit, counts_consistent_after_every_sweep) {
  const auto docs = cuegen_test::three_topic_corpus(2, 40, 20);
  LdaParams p;
  p.topics = 4;
  p.iters = 30;
  p.check_invariants = true;
  std::size_t calls = 0;
  p.on_sweep = [&](std::size_t) { ++calls; };
  const auto m = lda_fit(docs, p);
  EXPECT_EQ(calls, 30u);
  EXPECT_NO_THROW(m.verify());
  auto broken = m;
  ++broken.nk[0];
  EXPECT_THROW(broken.verify(), Error);
}

TEST(lda_fit, recovers_three_planted_topics) {
  const auto docs = cuegen_test::three_topic_corpus(3, 300, 40);
  LdaParams p;
  p.topics = 3;
  p.iters = 500;
  p.check_invariants = false;
  const auto m = lda_fit(docs, p);
  std::set<char> owners;
  for (std::size_t k = 0; k < 3; ++k) {
    std::map<char, int> votes;
    for (const auto& tw : lda_top_words(m, k, 10)) ++votes[tw.word[1]];
    auto best = std::max_element(votes.begin(), votes.end(),
                                 [](const auto& a, const auto& b) { return a.second < b.second; });
    EXPECT_GE(best->second, 8) << "topic " << k;
    owners.insert(best->first);
  }
  EXPECT_EQ(owners.size(), 3u);
}

TEST(lda_fit, errors) {
  LdaParams p;
  p.topics = 5;
  try {
    lda_fit({{"a"}, {"b"}}, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewDocs);
  }
  p.topics = 1;
  p.iters = 1;
  const auto m = lda_fit({{"a"}}, p);
  try {
    lda_top_words(m, 1, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TopicOutOfRange);
  }
}

TEST(lda_top_words, ties_and_overlong_requests) {
  LdaParams p;
  p.topics = 1;
  p.iters = 2;
  const auto m = lda_fit({{"x", "y", "z", "y"}}, p);
  const auto all = lda_top_words(m, 0, 100);
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all[0].word, "y");
  EXPECT_EQ(all[1].word, "x");  // tied with z, smaller id
  EXPECT_EQ(all[2].word, "z");
}

TEST(lda, persistence_round_trip) {
  const auto docs = cuegen_test::three_topic_corpus(4, 30, 10);
  LdaParams p;
  p.topics = 3;
  p.iters = 5;
  const auto m = lda_fit(docs, p);
  const auto bytes = textmodel::serialize(m.to_container());
  const auto back = TopicModel::from_container(textmodel::deserialize(bytes));
  EXPECT_EQ(back.nkw, m.nkw);
  EXPECT_EQ(back.z, m.z);
  EXPECT_EQ(back.words, m.words);
  EXPECT_EQ(textmodel::serialize(back.to_container()), bytes);
}

TEST(lda, cue_documents_drop_stopwords_and_punctuation) {
  const auto stop = read_stopwords_file(cuegen_test::data_path("lexicon/stopwords.txt"));
  ASSERT_TRUE(stop.count("the"));
  const auto s = corpus::parse_script("ANNA: Hi.\n(She crosses to the window.)\n(Pause.)");
  const auto docs = cue_documents({s}, stop);
  ASSERT_EQ(docs.size(), 2u);
  EXPECT_EQ(docs[0], (std::vector<std::string>{"crosses", "window"}));
  EXPECT_EQ(docs[1], (std::vector<std::string>{"pause"}));
}

TEST(emotion, bundled_map) {
  const auto map = EmotionMap::load(cuegen_test::data_path("emotion/emoji_plutchik.json"));
  EXPECT_EQ(map.labels.size(), 8u);
  EXPECT_EQ(map.map.size(), 64u);
  std::istringstream in(
      "{\"text\":\"I miss her.\",\"emojis\":[\"😢\"]}\n"
      "{\"text\":\"Whatever.\",\"emojis\":[\"🦄\"]}\n"
      "{\"text\":\"Ha! Oh no.\",\"emojis\":[\"😂\",\"😢\",\"🦄\"]}\n");
  const auto ds = import_emotion_labels(in, map);
  ASSERT_EQ(ds.examples.size(), 2u);
  EXPECT_EQ(ds.dropped, 1u);
  EXPECT_EQ(ds.examples[0].labels, (std::vector<std::size_t>{map.label_index("sadness")}));
  EXPECT_EQ(ds.examples[1].labels.size(), 2u);
}

TEST(emotion, malformed_records) {
  const auto map = EmotionMap::load(cuegen_test::data_path("emotion/emoji_plutchik.json"));
  for (const char* bad : {"{\"text\":\"x\",\"emojis\":[]}", "{\"emojis\":[\"😢\"]}", "not json",
                          "{\"text\":\"x\",\"emojis\":[3]}"}) {
    std::istringstream in(bad);
    try {
      import_emotion_labels(in, map);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::MalformedRecord) << bad;
    }
  }
  EXPECT_THROW(EmotionMap::from_json({{"labels", {"joy"}}, {"map", {{"x", "rage"}}}}), Error);
}
