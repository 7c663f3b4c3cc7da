#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cuegen/attributes/attribute.hpp"
#include "cuegen/attributes/cue.hpp"
#include "cuegen/attributes/head.hpp"
#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/corpus/synthetic.hpp"
#include "cuegen/eval/prompts.hpp"
#include "cuegen/textmodel/checkpoint.hpp"
#include "cuegen/textmodel/train.hpp"

namespace cuegen_test {

struct ToyOptions {
  std::size_t scripts = 12;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t dim = 48;
  std::size_t context = 64;
  std::size_t steps = 500;
  std::size_t seq_len = 48;
};

// Synthetic two-style corpus, an LM trained on it and a cue/dialogue head.
struct ToyWorld {
  std::vector<cuegen::corpus::Script> scripts;
  std::unique_ptr<cuegen::textmodel::Checkpoint> ck;
  cuegen::attributes::LinearHead head;
  cuegen::attributes::HeadReport head_report;
  cuegen::textmodel::TrainReport lm_report;

  const cuegen::textmodel::LanguageModel<float>& lm() const { return ck->model; }
  const cuegen::textmodel::Vocab& vocab() const { return ck->vocab; }
  cuegen::attributes::Attribute cue() const {
    return cuegen::attributes::Attribute::from_head(head, cuegen::attributes::kCueClass);
  }

  std::vector<std::vector<cuegen::textmodel::TokenId>> dialogue_openings(std::size_t lines) const {
    return cuegen::eval::dialogue_openings(scripts, vocab(), lines);
  }

  double p_cue(const std::string& text) const {
    const auto in = cuegen::attributes::head_input(vocab(), text, lm().config().context);
    return head.probs(cuegen::attributes::pooled_hidden(lm(), std::span<const cuegen::textmodel::TokenId>(in)))
        [cuegen::attributes::kCueClass];
  }
};

inline std::unique_ptr<ToyWorld> make_toy_world(const ToyOptions& o = {}) {
  using namespace cuegen;
  auto w = std::make_unique<ToyWorld>();
  corpus::synthetic::SynthOptions so;
  so.scripts = o.scripts;
  w->scripts = corpus::synthetic::generate(so);
  std::vector<std::string> texts;
  for (const auto& s : w->scripts)
    for (const auto& sc : s.scenes)
      for (const auto& l : sc.lines) texts.push_back(corpus::render_line(l));
  const auto vocab = textmodel::train_tokenizer(texts, 8000);
  const auto stream = textmodel::encode_corpus(w->scripts, vocab);
  textmodel::LMConfig cfg;
  cfg.layers = o.layers;
  cfg.heads = o.heads;
  cfg.dim = o.dim;
  cfg.ffn = 4 * o.dim;
  cfg.context = o.context;
  textmodel::TrainHyper hp;
  hp.steps = o.steps;
  hp.batch = 8;
  hp.seq_len = o.seq_len;
  w->ck = std::make_unique<textmodel::Checkpoint>(textmodel::train_lm<float>(stream, vocab, cfg, hp, &w->lm_report));
  w->head = attributes::train_head(attributes::cue_dialogue_examples(w->scripts), w->ck->model, w->ck->vocab,
                                   attributes::cue_head_spec(), {}, &w->head_report);
  return w;
}

}  // namespace cuegen_test
