// cuegen: corpus preparation, training, steered generation, evaluation and
// the HTTP service behind one subcommand-style binary.
//
// Exit status: 0 success, 1 domain error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cuegen/attributes/cue.hpp"
#include "cuegen/attributes/emotion.hpp"
#include "cuegen/attributes/lda.hpp"
#include "cuegen/corpus/jsonl.hpp"
#include "cuegen/corpus/parse.hpp"
#include "cuegen/corpus/split.hpp"
#include "cuegen/corpus/stats.hpp"
#include "cuegen/corpus/synthetic.hpp"
#include "cuegen/eval/prompts.hpp"
#include "cuegen/eval/run.hpp"
#include "cuegen/service/server.hpp"
#include "cuegen/textmodel/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cuegen;

namespace {

// --config file.json: {"flag": value, "<subcommand>": {"flag": value}}.
// Command-line flags win over the file.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
    json j;
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw CLI::ConversionError(std::string("config file: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    walk(j, {}, items);
    return items;
  }

 private:
  static void walk(const json& j, const std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, v] : j.items()) {
      if (v.is_object()) {
        auto p = parents;
        p.push_back(key);
        walk(v, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (v.is_array()) {
        for (const auto& e : v) item.inputs.push_back(scalar(e));
      } else {
        item.inputs.push_back(scalar(v));
      }
      out.push_back(std::move(item));
    }
  }
  static std::string scalar(const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }
};

std::string default_data(const std::string& rel) { return std::string(CUEGEN_DATA_DIR) + "/" + rel; }

struct Globals {
  bool json_out = false;
  std::uint64_t seed = 0;
};

// One subcommand: its option storage lives in the closure.
using Action = std::function<json(std::ostream& text)>;

void write_text_file(const std::string& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out << data;
  if (!out) fail(Errc::IoError, "short write to " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

textmodel::Vocab load_vocab(const std::string& path) {
  return textmodel::Vocab::from_json(service::read_json_file(path));
}

json corpus_summary(const std::vector<corpus::Script>& scripts) {
  std::size_t lines = 0, cues = 0, scenes = 0;
  for (const auto& s : scripts) {
    lines += s.line_count();
    cues += s.count(corpus::LineKind::Cue);
    scenes += s.scenes.size();
  }
  return {{"scripts", scripts.size()}, {"scenes", scenes}, {"lines", lines}, {"dialogue", lines - cues}, {"cue", cues}};
}

// Steering flags shared by generate and eval, defaulting to SteeringParams{}.
void add_steering_flags(CLI::App* sub, steering::SteeringParams& p) {
  sub->add_option("--alpha", p.alpha, "Step size of the hidden-state update")->capture_default_str();
  sub->add_option("--gamma", p.gamma, "Gradient-norm exponent")->capture_default_str();
  sub->add_option("--kl-scale", p.kl_scale, "Weight of the KL term")->capture_default_str();
  sub->add_option("--gm-scale", p.gm_scale, "Geometric-mean fusion weight of the steered distribution")
      ->capture_default_str();
  sub->add_option("--iterations", p.iterations, "Update iterations per token")->capture_default_str();
  sub->add_option("--top-k", p.top_k, "Sample from the k most likely tokens")->capture_default_str();
  sub->add_option("--temperature", p.temperature, "Sampling temperature")->capture_default_str();
  sub->add_option("--max-len", p.max_len, "Maximum generated tokens")->capture_default_str();
  sub->add_option("--horizon", p.horizon, "Look-ahead steps for classifier attributes")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steered cue generation for scripts: corpus tools, training, generation, evaluation, service."};
  app.require_subcommand(1);
  app.fallthrough();
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON file with default flag values, per subcommand");
  Globals g;
  app.add_flag("--json", g.json_out, "Machine-readable JSON on stdout");
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();

  std::map<CLI::App*, Action> actions;

  // synth ------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("synth", "Write the bundled synthetic two-style corpus");
    auto out = std::make_shared<std::string>();
    auto text_dir = std::make_shared<std::string>();
    auto opts = std::make_shared<corpus::synthetic::SynthOptions>();
    sub->add_option("--out", *out, "Corpus JSONL to write")->required();
    sub->add_option("--text-dir", *text_dir, "Also write each play as raw script text here");
    sub->add_option("--scripts", opts->scripts, "Number of plays")->capture_default_str();
    sub->add_option("--scenes", opts->scenes_per_script, "Scenes per play")->capture_default_str();
    actions[sub] = [=, &g](std::ostream& text) {
      opts->seed = g.seed;
      const auto texts = corpus::synthetic::generate_texts(*opts);
      std::vector<corpus::Script> scripts;
      for (std::size_t n = 0; n < texts.size(); ++n) {
        corpus::ParseOptions po;
        po.id = "synth-" + std::to_string(n + 1);
        scripts.push_back(corpus::parse_script(texts[n], po));
        if (!text_dir->empty()) {
          fs::create_directories(*text_dir);
          write_text_file((fs::path(*text_dir) / (po.id + ".txt")).string(), texts[n]);
        }
      }
      corpus::write_jsonl_file(*out, scripts);
      auto summary = corpus_summary(scripts);
      text << "wrote " << scripts.size() << " scripts (" << summary["lines"] << " lines, " << summary["cue"]
           << " cues) to " << *out << "\n";
      return summary;
    };
  }

  // parse ------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("parse", "Parse plain-text scripts into the JSONL corpus format");
    auto in = std::make_shared<std::vector<std::string>>();
    auto out = std::make_shared<std::string>();
    auto opts = std::make_shared<corpus::ParseOptions>();
    sub->add_option("--in", *in, "Script text file(s)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", *out, "Corpus JSONL to write")->required();
    sub->add_option("--id", opts->id, "Script id (single input only; default derives from the content)");
    sub->add_option("--title", opts->title, "Title (default: first front-matter line)");
    sub->add_option("--page-lines", opts->page_lines, "Lines per page when the text has no form feeds")
        ->capture_default_str();
    actions[sub] = [=](std::ostream& text) {
      if (!opts->id.empty() && in->size() > 1) fail(Errc::InvalidParams, "--id needs a single --in file");
      std::vector<corpus::Script> scripts;
      auto files = json::array();
      for (const auto& path : *in) {
        corpus::ParseReport rep;
        scripts.push_back(corpus::parse_script(read_text_file(path), *opts, &rep));
        const auto& s = scripts.back();
        files.push_back({{"file", path},
                         {"id", s.id},
                         {"title", s.title},
                         {"scenes", s.scenes.size()},
                         {"dialogue", s.count(corpus::LineKind::Dialogue)},
                         {"cue", s.count(corpus::LineKind::Cue)},
                         {"dropped_pages", rep.dropped_pages},
                         {"skipped_segments", rep.skipped_segments}});
        text << path << ": " << s.scenes.size() << " scenes, " << s.count(corpus::LineKind::Dialogue)
             << " dialogue, " << s.count(corpus::LineKind::Cue) << " cues";
        if (rep.dropped_pages) text << ", " << rep.dropped_pages << " pages dropped";
        text << "\n";
      }
      corpus::write_jsonl_file(*out, scripts);
      return json{{"out", *out}, {"files", files}};
    };
  }

  // split ------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("split", "Partition a corpus by script into train/attribute/test");
    auto in = std::make_shared<std::string>();
    auto dir = std::make_shared<std::string>();
    auto spec = std::make_shared<corpus::SplitSpec>();
    sub->add_option("--in", *in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", *dir, "Directory for train.jsonl, attribute.jsonl, test.jsonl")->required();
    sub->add_option("--train", spec->train, "Train fraction")->capture_default_str();
    sub->add_option("--attribute", spec->attribute, "Attribute-model fraction")->capture_default_str();
    sub->add_option("--test", spec->test, "Test fraction")->capture_default_str();
    actions[sub] = [=, &g](std::ostream& text) {
      spec->seed = g.seed;
      const auto parts = corpus::split(corpus::read_jsonl_file(*in), *spec);
      fs::create_directories(*dir);
      json out;
      for (const auto& [name, scripts] : {std::pair{"train", &parts.train}, std::pair{"attribute", &parts.attribute},
                                          std::pair{"test", &parts.test}}) {
        corpus::write_jsonl_file((fs::path(*dir) / (std::string(name) + ".jsonl")).string(), *scripts);
        std::vector<std::string> ids;
        for (const auto& s : *scripts) ids.push_back(s.id);
        out[name] = ids;
        text << name << ": " << scripts->size() << " scripts\n";
      }
      return out;
    };
  }

  // stats ------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("stats", "Character-name and verb counts per cue");
    auto in = std::make_shared<std::string>();
    auto lexicon = std::make_shared<std::string>(default_data("lexicon/pos_lexicon.txt"));
    auto out = std::make_shared<std::string>();
    sub->add_option("--in", *in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--lexicon", *lexicon, "Part-of-speech lexicon")->capture_default_str();
    sub->add_option("--out", *out, "Also write the JSON report here");
    actions[sub] = [=](std::ostream& text) {
      const auto lex = corpus::PosLexicon::from_file(*lexicon);
      json scripts = json::array();
      for (const auto& s : corpus::read_jsonl_file(*in)) {
        const auto rep = corpus::scene_stats(s, lex);
        auto j = rep.to_json();
        j["id"] = s.id;
        scripts.push_back(j);
        text << s.id << ": " << rep.cues.size() << " cues\n  names/cue histogram:";
        for (auto c : rep.name_histogram) text << ' ' << c;
        text << "\n  verbs/cue histogram:";
        for (auto c : rep.verb_histogram) text << ' ' << c;
        text << "\n";
      }
      json report{{"scripts", scripts}};
      if (!out->empty()) write_text_file(*out, report.dump(2) + "\n");
      return report;
    };
  }

  // train-tokenizer --------------------------------------------------------
  {
    auto* sub = app.add_subcommand("train-tokenizer", "Build the word vocabulary from a corpus");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto max_vocab = std::make_shared<std::size_t>(8000);
    sub->add_option("--in", *in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", *out, "Vocabulary JSON to write")->required();
    sub->add_option("--max-vocab", *max_vocab, "Words kept, specials excluded")->capture_default_str();
    actions[sub] = [=](std::ostream& text) {
      std::vector<std::string> texts;
      for (const auto& s : corpus::read_jsonl_file(*in))
        for (const auto& sc : s.scenes)
          for (const auto& l : sc.lines) texts.push_back(corpus::render_line(l));
      const auto vocab = textmodel::train_tokenizer(texts, *max_vocab);
      write_text_file(*out, vocab.to_json().dump() + "\n");
      text << "vocabulary of " << vocab.size() << " tokens written to " << *out << "\n";
      return json{{"out", *out}, {"size", vocab.size()}};
    };
  }

  // train-lm ---------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("train-lm", "Train the decoder-only language model from scratch");
    auto in = std::make_shared<std::string>();
    auto vocab_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto cfg = std::make_shared<textmodel::LMConfig>();
    auto hp = std::make_shared<textmodel::TrainHyper>();
    hp->log_every = 50;
    sub->add_option("--in", *in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--vocab", *vocab_path, "Vocabulary JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", *out, "Checkpoint to write")->required();
    sub->add_option("--layers", cfg->layers)->capture_default_str();
    sub->add_option("--heads", cfg->heads)->capture_default_str();
    sub->add_option("--dim", cfg->dim)->capture_default_str();
    sub->add_option("--ffn", cfg->ffn)->capture_default_str();
    sub->add_option("--context", cfg->context)->capture_default_str();
    sub->add_option("--steps", hp->steps)->capture_default_str();
    sub->add_option("--lr", hp->lr)->capture_default_str();
    sub->add_option("--batch", hp->batch)->capture_default_str();
    sub->add_option("--seq-len", hp->seq_len, "Training window (0: context)")->capture_default_str();
    sub->add_option("--clip", hp->clip_norm, "Global gradient-norm clip")->capture_default_str();
    sub->add_option("--val-fraction", hp->val_fraction)->capture_default_str();
    sub->add_option("--log-every", hp->log_every, "Progress line every n steps on stderr (0: off)")
        ->capture_default_str();
    actions[sub] = [=, &g](std::ostream& text) {
      cfg->seed = g.seed;
      const auto vocab = load_vocab(*vocab_path);
      const auto stream = textmodel::encode_corpus(corpus::read_jsonl_file(*in), vocab);
      hp->on_step = [&](std::size_t step, double loss) {
        if (hp->log_every && step % hp->log_every == 0) std::cerr << "step " << step << " loss " << loss << "\n";
      };
      textmodel::TrainReport rep;
      const auto ck = textmodel::train_lm<float>(stream, vocab, *cfg, *hp, &rep);
      ck.save(*out);
      text << "trained " << hp->steps << " steps; final loss "
           << (rep.losses.empty() ? 0.0 : rep.losses.back()) << ", validation perplexity " << rep.val_perplexity
           << "\ncheckpoint written to " << *out << "\n";
      return json{{"out", *out},
                  {"config", ck.model.config()},
                  {"steps", hp->steps},
                  {"final_loss", rep.losses.empty() ? 0.0 : rep.losses.back()},
                  {"val_perplexity", rep.val_perplexity},
                  {"stream_tokens", stream.size()}};
    };
  }

  // train-attr -------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("train-attr", "Train a cue/dialogue or emotion head on the frozen model");
    auto kind = std::make_shared<std::string>("cue");
    auto lm_path = std::make_shared<std::string>();
    auto in = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto map_path = std::make_shared<std::string>(default_data("emotion/emoji_plutchik.json"));
    auto out = std::make_shared<std::string>();
    auto hp = std::make_shared<attributes::HeadHyper>();
    sub->add_option("--kind", *kind, "cue or emotion")->check(CLI::IsMember({"cue", "emotion"}))->capture_default_str();
    sub->add_option("--lm", *lm_path, "Model checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--in", *in, "Corpus JSONL (cue heads)");
    sub->add_option("--labels", *labels, "Emotion records JSONL {text, emojis} (emotion heads)");
    sub->add_option("--map", *map_path, "Emoji to emotion map")->capture_default_str();
    sub->add_option("--out", *out, "Head JSON to write")->required();
    sub->add_option("--epochs", hp->epochs)->capture_default_str();
    sub->add_option("--lr", hp->lr)->capture_default_str();
    sub->add_option("--batch", hp->batch)->capture_default_str();
    sub->add_option("--holdout", hp->holdout, "Held-out fraction")->capture_default_str();
    actions[sub] = [=, &g](std::ostream& text) {
      hp->seed = g.seed;
      const auto ck = textmodel::Checkpoint::load(*lm_path);
      std::vector<attributes::LabeledExample> data;
      attributes::HeadSpec spec;
      std::size_t dropped = 0;
      if (*kind == "cue") {
        if (in->empty()) fail(Errc::InvalidParams, "cue heads need --in corpus.jsonl");
        data = attributes::cue_dialogue_examples(corpus::read_jsonl_file(*in));
        spec = attributes::cue_head_spec();
      } else {
        if (labels->empty()) fail(Errc::InvalidParams, "emotion heads need --labels records.jsonl");
        std::ifstream lf(*labels);
        if (!lf) fail(Errc::IoError, "cannot open " + *labels);
        auto ds = attributes::import_emotion_labels(lf, attributes::EmotionMap::load(*map_path));
        data = std::move(ds.examples);
        dropped = ds.dropped;
        spec = {ds.labels, attributes::HeadMode::Sigmoid};
      }
      attributes::HeadReport rep;
      const auto head = attributes::train_head(data, ck.model, ck.vocab, spec, *hp, &rep);
      write_text_file(*out, head.to_json().dump() + "\n");
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
      text << *kind << " head: holdout accuracy " << rep.holdout_accuracy << " (" << rep.holdout_size
           << " examples), train accuracy " << rep.train_accuracy << "\nhead written to " << *out << "\n";
      return json{{"out", *out},
                  {"kind", *kind},
                  {"classes", head.classes},
                  {"holdout_accuracy", rep.holdout_accuracy},
                  {"train_accuracy", rep.train_accuracy},
                  {"train_size", rep.train_size},
                  {"holdout_size", rep.holdout_size},
                  {"dropped_records", dropped},
                  {"warnings", rep.warnings}};
    };
  }

  // lda --------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("lda", "Fit a topic model over cue lines");
    auto in = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto stop = std::make_shared<std::string>(default_data("lexicon/stopwords.txt"));
    auto params = std::make_shared<attributes::LdaParams>();
    auto top = std::make_shared<std::size_t>(10);
    auto check = std::make_shared<bool>(false);
    sub->add_option("--in", *in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", *out, "Topic model file to write")->required();
    sub->add_option("--topics", params->topics)->capture_default_str();
    sub->add_option("--iters", params->iters, "Gibbs sweeps")->capture_default_str();
    sub->add_option("--alpha", params->alpha, "Document-topic prior (<= 0: 50 / topics)")->capture_default_str();
    sub->add_option("--beta", params->beta, "Topic-word prior")->capture_default_str();
    sub->add_option("--stopwords", *stop)->capture_default_str();
    sub->add_option("--top", *top, "Top words shown per topic")->capture_default_str();
    sub->add_flag("--check-invariants", *check, "Recount after every sweep");
    actions[sub] = [=, &g](std::ostream& text) {
      params->seed = g.seed;
      params->check_invariants = *check;
      const auto docs = attributes::cue_documents(corpus::read_jsonl_file(*in), attributes::read_stopwords_file(*stop));
      const auto model = attributes::lda_fit(docs, *params);
      model.save(*out);
      json topics = json::array();
      for (std::size_t k = 0; k < model.K; ++k) {
        std::vector<std::string> words;
        for (const auto& w : attributes::lda_top_words(model, k, *top)) words.push_back(w.word);
        text << "topic " << k << ":";
        for (const auto& w : words) text << ' ' << w;
        text << "\n";
        topics.push_back({{"topic", k}, {"top_words", words}});
      }
      return json{{"out", *out}, {"documents", docs.size()}, {"vocabulary", model.V()}, {"topics", topics}};
    };
  }

  // generate ---------------------------------------------------------------
  service::ModelPaths gen_paths;
  {
    auto* sub = app.add_subcommand("generate", "Steered continuation of a prefix");
    auto prefix = std::make_shared<std::string>();
    auto attribute = std::make_shared<std::string>("cue");
    auto params = std::make_shared<steering::SteeringParams>();
    auto n = std::make_shared<std::size_t>(1);
    sub->add_option("--lm", gen_paths.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    sub->add_option("--prefix", *prefix, "Text to continue")->required();
    sub->add_option("--attribute", *attribute, "cue | dialogue | topic:<k> | emotion:<label>")->capture_default_str();
    sub->add_option("--cue-head", gen_paths.sentence_head, "Cue/dialogue head JSON")->check(CLI::ExistingFile);
    sub->add_option("--emotion-head", gen_paths.emotion_head, "Emotion head JSON")->check(CLI::ExistingFile);
    sub->add_option("--topics", gen_paths.topics, "Topic model file")->check(CLI::ExistingFile);
    sub->add_option("--bow-words", gen_paths.bow_words, "Top words per topic used as the bag")->capture_default_str();
    sub->add_option("--num-candidates", *n, "Candidates (seeds seed, seed+1, ...)")->capture_default_str();
    add_steering_flags(sub, *params);
    actions[sub] = [=, &g, &gen_paths](std::ostream& text) {
      params->seed = g.seed;
      const auto spec = service::parse_attribute(*attribute);
      const auto models = service::Models::load(gen_paths);
      const auto gen = service::generate_candidates(models, service::text_prefix(models.checkpoint->vocab, *prefix),
                                                    spec, *params, *n);
      for (std::size_t i = 0; i < gen.candidates.size(); ++i) {
        const auto& c = gen.candidates[i];
        text << "[" << i << "] " << c.text << "\n    attribute log-likelihood " << c.attribute_log_likelihood
             << ", mean KL " << c.mean_kl << ", perplexity " << c.perplexity << ", seed " << c.seed << "\n"
             << "    trace: " << c.tokens.size() << " steps, attribute loss " << c.mean_loss_before << " -> "
             << c.mean_loss_after << " per step, " << c.fallbacks << " fallbacks\n";
      }
      text << "unsteered: " << gen.unsteered.text << "\n    attribute log-likelihood "
           << gen.unsteered.attribute_log_likelihood << ", perplexity " << gen.unsteered.perplexity << "\n";
      auto j = service::to_json(gen);
      j["prefix"] = *prefix;
      return j;
    };
  }

  // eval -------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("eval", "Similarity to reference cues and Dist-n diversity");
    auto generator = std::make_shared<std::string>("steered");
    auto refs_path = std::make_shared<std::string>();
    auto prompts_path = std::make_shared<std::string>();
    auto paths = std::make_shared<service::ModelPaths>();
    auto cfg = std::make_shared<eval::EvalConfig>();
    auto params = std::make_shared<steering::SteeringParams>();
    auto prompt_lines = std::make_shared<std::size_t>(3);
    auto dist_norm = std::make_shared<std::string>("ngram_count");
    auto samples_out = std::make_shared<std::string>();
    params->max_len = 24;
    sub->add_option("--generator", *generator, "echo | lm | steered")
        ->check(CLI::IsMember({"echo", "lm", "steered"}))
        ->capture_default_str();
    sub->add_option("--refs", *refs_path, "Corpus JSONL whose cues form the reference set")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--prompts", *prompts_path, "Corpus JSONL for generation prompts (default: --refs)")
        ->check(CLI::ExistingFile);
    sub->add_option("--lm", paths->checkpoint, "Model checkpoint (lm, steered)")->check(CLI::ExistingFile);
    sub->add_option("--cue-head", paths->sentence_head, "Cue/dialogue head JSON (steered)")->check(CLI::ExistingFile);
    sub->add_option("--num-samples", cfg->num_samples)->capture_default_str();
    sub->add_option("--reference-size", cfg->reference_size)->capture_default_str();
    sub->add_option("--top-r", cfg->top_r, "Nearest references per sample")->capture_default_str();
    sub->add_option("--threads", cfg->threads, "Worker threads (0: all cores)")->capture_default_str();
    sub->add_option("--dist-norm", *dist_norm, "ngram_count | token_count")
        ->check(CLI::IsMember({"ngram_count", "token_count"}))
        ->capture_default_str();
    sub->add_option("--prompt-lines", *prompt_lines, "Opening dialogue lines per prompt")->capture_default_str();
    sub->add_option("--samples-out", *samples_out, "Write the full report with per-sample neighbors here");
    add_steering_flags(sub, *params);
    actions[sub] = [=, &g](std::ostream& text) {
      cfg->seed = g.seed;
      cfg->dist_norm = *dist_norm == "token_count" ? eval::DistNorm::TokenCount : eval::DistNorm::NgramCount;
      cfg->validate();
      const auto ref_scripts = corpus::read_jsonl_file(*refs_path);
      const auto refs = eval::sample_references(eval::cue_lines(ref_scripts), cfg->reference_size, cfg->seed);
      if (refs.empty()) fail(Errc::EmptyReferences, *refs_path + " holds no cues");
      const eval::ReferenceIndex index(refs);

      eval::Generator gen;
      gen.name = *generator;
      service::Models models;
      std::vector<std::vector<textmodel::TokenId>> prompts;
      std::optional<attributes::Attribute> attr;
      if (*generator == "echo") {
        gen.generate = [&refs](std::size_t, std::uint64_t seed) {
          std::mt19937_64 rng(seed);
          return refs[rng() % refs.size()];
        };
      } else {
        if (paths->checkpoint.empty()) fail(Errc::InvalidParams, "--lm is required for the " + *generator + " generator");
        if (*generator == "steered" && paths->sentence_head.empty())
          fail(Errc::InvalidParams, "--cue-head is required for the steered generator");
        models = service::Models::load(*paths);
        const auto& ck = *models.checkpoint;
        prompts = eval::dialogue_openings(
            prompts_path->empty() ? ref_scripts : corpus::read_jsonl_file(*prompts_path), ck.vocab, *prompt_lines);
        if (prompts.empty()) fail(Errc::EmptyCorpus, "no scene opens with " + std::to_string(*prompt_lines) + " spoken lines");
        for (auto& p : prompts) p = service::fit_prefix(std::move(p), ck.model.config().context, params->max_len);
        if (*generator == "steered") {
          attr = models.resolve(service::parse_attribute("cue"));
          params->validate();
        }
        gen.generate = [&](std::size_t i, std::uint64_t seed) {
          const std::span<const textmodel::TokenId> pre(prompts[i % prompts.size()]);
          if (!attr) {
            textmodel::SampleOptions so{params->top_k, params->temperature, params->max_len, seed};
            return ck.vocab.decode(textmodel::sample(ck.model, pre, so));
          }
          auto p = *params;
          p.seed = seed;
          return steering::generate_steered(ck.model, ck.vocab, pre, *attr, p).text;
        };
      }
      const auto rep = eval::run_eval(gen, index, *cfg);
      if (!samples_out->empty()) write_text_file(*samples_out, eval::to_json(rep).dump(2) + "\n");
      text << eval::format_table({rep}) << "Dist-n normalization: " << eval::to_string(rep.dist_norm) << "; "
           << rep.num_samples << " samples, " << rep.reference_size << " references, top-" << rep.top_r
           << "; generation " << rep.generation_seconds << " s, search " << rep.search_seconds << " s on "
           << rep.threads << " threads\n";
      return eval::to_json(rep, false);
    };
  }

  // serve ------------------------------------------------------------------
  {
    auto* sub = app.add_subcommand("serve", "Run the /v1 HTTP service");
    auto opts = std::make_shared<service::ServerOptions>();
    auto store_dir = std::make_shared<std::string>("cuegen-store");
    auto paths = std::make_shared<service::ModelPaths>();
    sub->add_option("--host", opts->host)->envname("CUEGEN_HOST")->capture_default_str();
    sub->add_option("--port", opts->port)->envname("CUEGEN_PORT")->capture_default_str();
    sub->add_option("--store", *store_dir, "Store directory")->envname("CUEGEN_STORE")->capture_default_str();
    sub->add_option("--checkpoint", paths->checkpoint, "Model checkpoint")->envname("CUEGEN_CHECKPOINT");
    sub->add_option("--cue-head", paths->sentence_head)->envname("CUEGEN_CUE_HEAD");
    sub->add_option("--emotion-head", paths->emotion_head)->envname("CUEGEN_EMOTION_HEAD");
    sub->add_option("--topics", paths->topics)->envname("CUEGEN_TOPICS");
    sub->add_option("--bow-words", paths->bow_words)->capture_default_str();
    actions[sub] = [=](std::ostream&) -> json {
      auto models = std::make_shared<const service::Models>(service::Models::load(*paths));
      service::Store store(*store_dir);
      service::Server server(store, models);
      std::cerr << "serving /v1 on " << opts->host << ":" << opts->port << " (store " << *store_dir << ")\n";
      server.run(*opts);
      return json::object();
    };
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  std::ostringstream text;
  try {
    const auto result = actions.at(chosen)(text);
    if (g.json_out) std::cout << result.dump(2) << "\n";
    else std::cout << text.str();
    return 0;
  } catch (const Error& e) {
    if (g.json_out) std::cout << json{{"error", e.name()}, {"detail", e.detail()}}.dump(2) << "\n";
    std::cerr << "error: " << e.name() << ": " << e.detail() << "\n";
    return 1;
  } catch (const std::exception& e) {
    if (g.json_out) std::cout << json{{"error", "IoError"}, {"detail", e.what()}}.dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
