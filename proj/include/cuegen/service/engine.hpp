#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/attributes/attribute.hpp"
#include "cuegen/attributes/cue.hpp"
#include "cuegen/attributes/lda.hpp"
#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/steering/steer.hpp"
#include "cuegen/textmodel/checkpoint.hpp"
#include "cuegen/textmodel/sample.hpp"

namespace cuegen::service {

using textmodel::TokenId;

// One of {sentence_type: cue|dialogue}, {topic: k}, {emotion: label}.
struct AttributeSpec {
  enum class Kind { SentenceType, Topic, Emotion };
  Kind kind = Kind::SentenceType;
  std::string label = "cue";
  std::size_t topic = 0;

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

inline nlohmann::json to_json(const AttributeSpec& a) {
  switch (a.kind) {
    case AttributeSpec::Kind::SentenceType: return {{"sentence_type", a.label}};
    case AttributeSpec::Kind::Topic: return {{"topic", a.topic}};
    case AttributeSpec::Kind::Emotion: return {{"emotion", a.label}};
  }
  return nullptr;
}

inline std::string to_string(const AttributeSpec& a) {
  switch (a.kind) {
    case AttributeSpec::Kind::SentenceType: return a.label;
    case AttributeSpec::Kind::Topic: return "topic:" + std::to_string(a.topic);
    case AttributeSpec::Kind::Emotion: return "emotion:" + a.label;
  }
  return {};
}

inline AttributeSpec attribute_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(Errc::InvalidParams, "attribute must be an object");
  if (j.size() != 1) fail(Errc::InvalidParams, "attribute must name exactly one of sentence_type, topic, emotion");
  AttributeSpec a;
  const auto& [key, v] = *j.items().begin();
  if (key == "sentence_type") {
    if (!v.is_string() || (v != "cue" && v != "dialogue"))
      fail(Errc::InvalidParams, "sentence_type must be \"cue\" or \"dialogue\"");
    a.label = v.get<std::string>();
  } else if (key == "topic") {
    if (!v.is_number_integer() || v.get<long long>() < 0)
      fail(Errc::InvalidParams, "topic must be a non-negative integer");
    a.kind = AttributeSpec::Kind::Topic;
    a.topic = v.get<std::size_t>();
  } else if (key == "emotion") {
    if (!v.is_string() || v.get<std::string>().empty()) fail(Errc::InvalidParams, "emotion must be a label");
    a.kind = AttributeSpec::Kind::Emotion;
    a.label = v.get<std::string>();
  } else {
    fail(Errc::InvalidParams, "unknown attribute kind " + key);
  }
  return a;
}

// Command-line form: cue | dialogue | topic:<k> | emotion:<label>.
inline AttributeSpec parse_attribute(std::string_view s) {
  AttributeSpec a;
  if (s == "cue" || s == "dialogue") {
    a.label = std::string(s);
  } else if (s.starts_with("topic:")) {
    const auto num = s.substr(6);
    if (num.empty() || !std::all_of(num.begin(), num.end(), [](char c) { return c >= '0' && c <= '9'; }))
      fail(Errc::InvalidParams, "topic attribute needs a number: " + std::string(s));
    a.kind = AttributeSpec::Kind::Topic;
    a.topic = std::stoul(std::string(num));
  } else if (s.starts_with("emotion:") && s.size() > 8) {
    a.kind = AttributeSpec::Kind::Emotion;
    a.label = std::string(s.substr(8));
  } else {
    fail(Errc::InvalidParams, "attribute must be cue, dialogue, topic:<k> or emotion:<label>");
  }
  return a;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    fail(Errc::MalformedRecord, path + ": " + e.what());
  }
}

struct ModelPaths {
  std::string checkpoint;
  std::string sentence_head;  // cue/dialogue head JSON
  std::string emotion_head;
  std::string topics;  // LDA container
  std::size_t bow_words = 10;  // top words per topic used as the bag
};

// Everything a generation reads. Immutable once loaded and shared by all
// request handlers.
struct Models {
  std::shared_ptr<const textmodel::Checkpoint> checkpoint;
  std::string checkpoint_id;  // content digest of the checkpoint file
  std::optional<attributes::LinearHead> sentence_head;
  std::optional<attributes::LinearHead> emotion_head;
  std::optional<attributes::TopicModel> topics;
  std::size_t bow_words = 10;

  static Models load(const ModelPaths& p) {
    Models m;
    m.bow_words = p.bow_words;
    if (!p.checkpoint.empty()) {
      const auto bytes = textmodel::read_file(p.checkpoint);
      m.checkpoint = std::make_shared<const textmodel::Checkpoint>(textmodel::Checkpoint::deserialize(bytes));
      m.checkpoint_id = corpus::content_digest(bytes);
    }
    auto head = [&](const std::string& path) -> std::optional<attributes::LinearHead> {
      if (path.empty()) return std::nullopt;
      auto h = attributes::LinearHead::from_json(read_json_file(path));
      if (m.checkpoint && h.dim != m.checkpoint->model.config().dim)
        fail(Errc::DimensionMismatch, path + " was trained for width " + std::to_string(h.dim));
      return h;
    };
    m.sentence_head = head(p.sentence_head);
    m.emotion_head = head(p.emotion_head);
    if (!p.topics.empty()) m.topics = attributes::TopicModel::load(p.topics);
    return m;
  }

  bool has_checkpoint() const { return checkpoint != nullptr; }

  attributes::Attribute resolve(const AttributeSpec& spec) const {
    using Kind = AttributeSpec::Kind;
    if (spec.kind == Kind::Topic) {
      if (!topics) fail(Errc::InvalidParams, "no topic model is loaded");
      std::vector<std::string> words;
      for (const auto& w : attributes::lda_top_words(*topics, spec.topic, bow_words)) words.push_back(w.word);
      return attributes::Attribute::from_bow(attributes::make_bow(words, checkpoint->vocab, attributes::BowSource::Lda,
                                                                  to_string(spec), static_cast<int>(spec.topic)));
    }
    const auto& head = spec.kind == Kind::SentenceType ? sentence_head : emotion_head;
    if (!head) fail(Errc::InvalidParams, "no " + std::string(spec.kind == Kind::SentenceType ? "cue/dialogue" : "emotion") +
                                             " model is loaded");
    return attributes::Attribute::from_head(*head, head->class_index(spec.label));
  }

  nlohmann::json describe() const {
    nlohmann::json j;
    j["checkpoint"] = checkpoint ? nlohmann::json{{"id", checkpoint_id}, {"config", checkpoint->model.config()},
                                                  {"vocab", checkpoint->vocab.size()}}
                                 : nlohmann::json(nullptr);
    auto head = [](const std::optional<attributes::LinearHead>& h) {
      return h ? nlohmann::json{{"classes", h->classes}, {"mode", attributes::to_string(h->mode)}}
               : nlohmann::json(nullptr);
    };
    j["sentence_type"] = head(sentence_head);
    j["emotion"] = head(emotion_head);
    if (topics) {
      auto arr = nlohmann::json::array();
      for (std::size_t k = 0; k < topics->K; ++k) {
        std::vector<std::string> words;
        for (const auto& w : attributes::lda_top_words(*topics, k, bow_words)) words.push_back(w.word);
        arr.push_back({{"topic", k}, {"top_words", words}});
      }
      j["topics"] = std::move(arr);
    } else {
      j["topics"] = nullptr;
    }
    return j;
  }
};

// BOS + the encoded text, cut from the left (BOS kept) so that `room` tokens
// still fit in the context.
inline std::vector<TokenId> fit_prefix(std::vector<TokenId> ids, std::size_t context, std::size_t room) {
  const std::size_t limit = std::max<std::size_t>(1, context - std::min(room, context / 2));
  if (ids.size() <= limit) return ids;
  std::vector<TokenId> out{textmodel::Vocab::kBos};
  out.insert(out.end(), ids.end() - static_cast<std::ptrdiff_t>(limit - 1), ids.end());
  return out;
}

inline std::vector<TokenId> text_prefix(const textmodel::Vocab& vocab, std::string_view text) {
  std::vector<TokenId> ids{textmodel::Vocab::kBos};
  const auto body = vocab.encode(text);
  ids.insert(ids.end(), body.begin(), body.end());
  return ids;
}

// Scene lines 0..line rendered as in training.
inline std::vector<TokenId> scene_prefix(const textmodel::Vocab& vocab, const corpus::Scene& scene, std::size_t line) {
  std::vector<TokenId> ids{textmodel::Vocab::kBos};
  for (std::size_t i = 0; i <= line && i < scene.lines.size(); ++i) {
    const auto body = vocab.encode(corpus::render_line(scene.lines[i]));
    ids.insert(ids.end(), body.begin(), body.end());
  }
  return ids;
}

// Head attributes: log p(target | candidate text) under the head. Bags: mean
// over generated positions of the log bag mass under the unsteered model.
inline double attribute_log_likelihood(const textmodel::Checkpoint& ck, const attributes::Attribute& attr,
                                       std::span<const TokenId> prefix, std::span<const TokenId> tokens) {
  const auto& lm = ck.model;
  if (attr.is_head()) {
    const auto in = attributes::head_input(ck.vocab, ck.vocab.decode({tokens.begin(), tokens.end()}), lm.config().context);
    return attributes::head_log_prob(attr.head(), attributes::pooled_hidden(lm, std::span<const TokenId>(in)), attr.target);
  }
  std::vector<TokenId> all(prefix.begin(), prefix.end());
  all.insert(all.end(), tokens.begin(), tokens.end());
  const std::size_t keep = std::min(all.size(), lm.config().context);
  std::span<const TokenId> window(all.data() + all.size() - keep, keep);
  // Positions whose next-token distribution is scored: one per generated
  // token, or just the one after the prefix when nothing was generated.
  const std::size_t scored = std::max<std::size_t>(1, std::min(tokens.size(), keep));
  auto act = lm.forward(window, nullptr, textmodel::LogitsMode::All);
  const std::size_t V = lm.config().vocab;
  double total = 0;
  for (std::size_t i = keep - scored; i < keep; ++i) {
    const auto p = textmodel::softmax(std::span<const float>(act.logits.data() + i * V, V));
    total += attributes::bow_log_prob(attr.bow(), p).value;
  }
  return total / static_cast<double>(scored);
}

struct Candidate {
  std::string text;
  std::vector<TokenId> tokens;
  std::uint64_t seed = 0;
  double attribute_log_likelihood = 0;
  double mean_kl = 0;
  double perplexity = 1;
  std::size_t fallbacks = 0;
  // Attribute loss before/after perturbation, averaged over steps.
  double mean_loss_before = 0;
  double mean_loss_after = 0;
};

inline nlohmann::json to_json(const Candidate& c, bool with_probability) {
  nlohmann::json j{{"text", c.text},
                   {"seed", c.seed},
                   {"tokens", c.tokens.size()},
                   {"attribute_log_likelihood", c.attribute_log_likelihood},
                   {"mean_kl", c.mean_kl},
                   {"perplexity", c.perplexity},
                   {"fallbacks", c.fallbacks},
                   {"mean_loss_before", c.mean_loss_before},
                   {"mean_loss_after", c.mean_loss_after}};
  if (with_probability) j["attribute_probability"] = std::exp(c.attribute_log_likelihood);
  return j;
}

struct Generation {
  AttributeSpec attribute;
  steering::SteeringParams params;
  std::vector<TokenId> prefix;
  std::vector<Candidate> candidates;  // best attribute log-likelihood first
  Candidate unsteered;                // plain sampling with the base seed
  bool head_attribute = true;
};

inline nlohmann::json to_json(const Generation& g) {
  auto cands = nlohmann::json::array();
  for (std::size_t i = 0; i < g.candidates.size(); ++i) {
    auto c = to_json(g.candidates[i], g.head_attribute);
    c["index"] = i;
    cands.push_back(std::move(c));
  }
  return {{"attribute", to_json(g.attribute)},
          {"params", g.params},
          {"prefix_tokens", g.prefix.size()},
          {"candidates", std::move(cands)},
          {"unsteered", to_json(g.unsteered, g.head_attribute)}};
}

inline constexpr std::size_t kMaxCandidates = 16;

// Candidate i uses seed params.seed + i. Reentrant: reads only `models`.
inline Generation generate_candidates(const Models& models, std::vector<TokenId> prefix, const AttributeSpec& spec,
                                      const steering::SteeringParams& params, std::size_t num_candidates) {
  if (!models.has_checkpoint()) fail(Errc::InvalidParams, "no checkpoint is loaded");
  if (num_candidates < 1 || num_candidates > kMaxCandidates)
    fail(Errc::InvalidParams, "num_candidates must lie in [1, " + std::to_string(kMaxCandidates) + "]");
  params.validate();
  const auto& ck = *models.checkpoint;
  const auto attr = models.resolve(spec);
  Generation g;
  g.attribute = spec;
  g.params = params;
  g.head_attribute = attr.is_head();
  g.prefix = fit_prefix(std::move(prefix), ck.model.config().context, params.max_len);
  const std::span<const TokenId> pre(g.prefix);

  auto score = [&](Candidate& c) {
    c.text = ck.vocab.decode(c.tokens);
    c.attribute_log_likelihood = attribute_log_likelihood(ck, attr, pre, c.tokens);
    c.perplexity = std::exp(textmodel::continuation_nll(ck.model, pre, std::span<const TokenId>(c.tokens)));
  };
  for (std::size_t i = 0; i < num_candidates; ++i) {
    auto p = params;
    p.seed = params.seed + i;
    auto out = steering::generate_steered(ck.model, ck.vocab, pre, attr, p);
    Candidate c;
    c.tokens = std::move(out.tokens);
    c.seed = p.seed;
    c.mean_kl = out.trace.mean_kl();
    c.fallbacks = out.trace.fallbacks();
    for (const auto& r : out.trace.steps) {
      c.mean_loss_before += r.loss_before / static_cast<double>(out.trace.size());
      c.mean_loss_after += r.loss_after / static_cast<double>(out.trace.size());
    }
    score(c);
    g.candidates.push_back(std::move(c));
  }
  std::stable_sort(g.candidates.begin(), g.candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.attribute_log_likelihood > b.attribute_log_likelihood;
  });
  textmodel::SampleOptions so{params.top_k, params.temperature, params.max_len, params.seed};
  g.unsteered.tokens = textmodel::sample(ck.model, pre, so);
  g.unsteered.seed = params.seed;
  score(g.unsteered);
  return g;
}

}  // namespace cuegen::service
