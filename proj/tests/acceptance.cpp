// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Thresholds live in the `Tol` block below.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "cuegen/attributes/cue.hpp"
#include "cuegen/attributes/lda.hpp"
#include "cuegen/corpus/parse.hpp"
#include "cuegen/eval/metrics.hpp"
#include "cuegen/eval/neighbors.hpp"
#include "cuegen/eval/prompts.hpp"
#include "cuegen/eval/run.hpp"
#include "cuegen/steering/steer.hpp"
#include "oracles.hpp"
#include "test_support.hpp"
#include "toy_world.hpp"

using namespace cuegen;
using textmodel::TokenId;

namespace {

namespace Tol {
constexpr double kGradRel = 1e-3;
constexpr double kGradSeconds = 60;
constexpr double kFuseSum = 1e-6;
constexpr double kSpeedup = 3.0;
constexpr double kHeadAccuracy = 0.95;
constexpr int kPairedWins = 80;  // of 100
constexpr std::size_t kTopicHits = 8;  // of 10
constexpr double kLdaSeconds = 60;
}  // namespace Tol

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1 -------------------------------------------------------------------------
Outcome metric_oracles() {
  const auto strs = cuegen_test::all_strings(5);
  std::size_t pairs = 0, lev_bad = 0, lcsr_bad = 0;
  for (const auto& a : strs)
    for (const auto& b : strs) {
      ++pairs;
      lev_bad += eval::levenshtein(a, b) != cuegen_test::lev_recursive(a, b);
      if (a.empty() && b.empty()) continue;
      lcsr_bad += eval::lcsr(a, b) != cuegen_test::lcsr_enumerated(a, b);
    }
  return {lev_bad == 0 && lcsr_bad == 0,
          fmt("%zu pairs over {a,b} up to length 5: %zu Levenshtein and %zu LCSR mismatches", pairs, lev_bad, lcsr_bad)};
}

// 2 -------------------------------------------------------------------------
Outcome metric_properties() {
  std::mt19937_64 rng(2024);
  std::size_t violations = 0, pairs = 0;
  while (pairs < 10000) {
    const auto a = cuegen_test::random_string(rng, 16, "abcde"), b = cuegen_test::random_string(rng, 16, "abcde");
    if (a.empty() && b.empty()) continue;
    ++pairs;
    violations += eval::levenshtein(a, b) != eval::levenshtein(b, a);
    for (auto f : {static_cast<double (*)(std::string_view, std::string_view)>(eval::lcsr),
                   static_cast<double (*)(std::string_view, std::string_view)>(eval::bi_sim)}) {
      const double x = f(a, b);
      violations += x != f(b, a);
      violations += x < 0 || x > 1;
      if (!a.empty()) violations += f(a, a) != 1.0;
    }
  }
  const auto small = cuegen_test::all_strings(4);
  const std::size_t n = small.size();
  std::vector<std::size_t> d(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = eval::levenshtein(small[i], small[j]);
  std::size_t triangle = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k) triangle += d[i * n + k] > d[i * n + j] + d[j * n + k];
  return {violations == 0 && triangle == 0,
          fmt("%zu random pairs: %zu symmetry/range/identity violations; %zu triples: %zu triangle violations", pairs,
              violations, n * n * n, triangle)};
}

// 3 -------------------------------------------------------------------------
std::vector<std::string> cue_like_strings(std::size_t count, std::uint64_t seed) {
  static const char* words[] = {"she", "he", "they", "anna", "ben", "crosses", "to", "the", "window", "door",
                                "sits", "down", "stands", "slowly", "quietly", "pause", "exits", "enters",
                                "looks", "at", "him", "her", "table", "chair", "lights", "fade", "music",
                                "silence", "laughs", "turns", "away", "a", "long", "beat", "picks", "up",
                                "letter", "reads", "it", "again", "stage", "left", "right", "rain", "outside"};
  constexpr std::size_t kWords = sizeof words / sizeof *words;
  std::mt19937_64 rng(seed);
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = 2 + rng() % 10;
    std::string s = "(";
    for (std::size_t w = 0; w < len; ++w) {
      if (w) s += ' ';
      s += words[rng() % kWords];
    }
    out.push_back(s + ".)");
  }
  return out;
}

Outcome pruned_search() {
  std::mt19937_64 rng(6);
  std::vector<std::string> refs;
  for (int i = 0; i < 1000; ++i) {
    std::string s;
    for (auto c : cuegen_test::random_u32(rng, 0, 40, 5)) s += static_cast<char>(c);
    refs.push_back(s);
  }
  const eval::ReferenceIndex small(refs, false);
  std::size_t mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const auto q = cuegen_test::random_u32(rng, 0, 45, 5);
    const std::size_t r = 1 + rng() % 12;
    mismatches += eval::nearest_cues(q, small, r) != eval::nearest_cues_naive(q, small, r);
  }

  const eval::ReferenceIndex big(cue_like_strings(50000, 7));
  std::vector<std::u32string> samples;
  for (const auto& s : cue_like_strings(600, 8)) samples.push_back(utf8::decode(eval::normalize_for_eval(s)));
  auto t0 = Clock::now();
  std::vector<std::vector<eval::Neighbor>> fast;
  for (const auto& s : samples) fast.push_back(eval::nearest_cues(s, big, 10));
  const double t_pruned = since(t0);
  t0 = Clock::now();
  std::size_t big_mismatch = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) big_mismatch += eval::nearest_cues_naive(samples[i], big, 10) != fast[i];
  const double t_naive = since(t0);
  const double speedup = t_naive / t_pruned;
  return {mismatches == 0 && big_mismatch == 0 && speedup >= Tol::kSpeedup,
          fmt("200x1000 exact (%zu mismatches); 600x50000 (%zu mismatches): naive %.2f s, pruned %.2f s, "
              "speedup %.1fx (want >= %.0fx)",
              mismatches, big_mismatch, t_naive, t_pruned, speedup, Tol::kSpeedup)};
}

// 4 -------------------------------------------------------------------------
textmodel::LMConfig grad_config() {
  textmodel::LMConfig c;
  c.layers = 2;
  c.heads = 2;
  c.dim = 32;
  c.ffn = 64;
  c.context = 24;
  c.vocab = 40;
  c.seed = 5;
  return c;
}

double rel_err(double fd, double an, double floor) {
  return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), floor});
}

attributes::LinearHead random_head(std::size_t classes, std::size_t d, std::uint64_t seed) {
  std::vector<std::string> names;
  for (std::size_t c = 0; c < classes; ++c) names.push_back("c" + std::to_string(c));
  attributes::LinearHead h(names, attributes::HeadMode::Softmax, d);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& w : h.weights) w = nd(rng);
  for (auto& b : h.bias) b = nd(rng) * 0.1;
  return h;
}

double lm_param_gradients(std::size_t& checked) {
  textmodel::LanguageModel<double> lm(grad_config());
  std::mt19937_64 rng(11);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& p : lm.params()) p += nd(rng) * 0.2;
  std::vector<TokenId> toks(6);
  for (auto& t : toks) t = static_cast<TokenId>(rng() % 40);
  auto act = lm.forward(toks, nullptr, textmodel::LogitsMode::All, true);
  std::vector<double> w(act.logits.size());
  for (auto& x : w) x = nd(rng);
  auto loss = [&] {
    const auto a = lm.forward(toks);
    return std::inner_product(w.begin(), w.end(), a.logits.begin(), 0.0);
  };
  std::vector<double> grad(lm.num_params(), 0.0);
  lm.backward(act, w, {}, nullptr, grad.data());
  double worst = 0;
  for (const auto& view : lm.layout())
    for (int s = 0; s < 10; ++s) {
      const std::size_t i = view.offset + rng() % view.size;
      const double keep = lm.params()[i], h = 1e-5;
      lm.params()[i] = keep + h;
      const double up = loss();
      lm.params()[i] = keep - h;
      const double dn = loss();
      lm.params()[i] = keep;
      worst = std::max(worst, rel_err((up - dn) / (2 * h), grad[i], 1e-6));
      ++checked;
    }
  return worst;
}

double head_input_gradients(std::size_t& checked) {
  const auto h = random_head(2, 32, 7);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd;
  std::vector<double> x(32);
  for (auto& v : x) v = nd(rng);
  double worst = 0;
  for (std::size_t target = 0; target < 2; ++target) {
    std::vector<double> g;
    attributes::head_log_prob(h, x, target, &g);
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double keep = x[j], eps = 1e-6;
      x[j] = keep + eps;
      const double up = attributes::head_log_prob(h, x, target);
      x[j] = keep - eps;
      const double dn = attributes::head_log_prob(h, x, target);
      x[j] = keep;
      worst = std::max(worst, rel_err((up - dn) / (2 * eps), g[j], 1e-8));
      ++checked;
    }
  }
  return worst;
}

double delta_gradients(std::size_t& checked) {
  using textmodel::PastState;
  textmodel::LanguageModel<double> lm(grad_config());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd(0.0, 0.1);
  for (auto& p : lm.params()) p += nd(rng);
  std::vector<TokenId> ctx(6);
  for (auto& t : ctx) t = static_cast<TokenId>(rng() % 40);
  const auto act = lm.forward(ctx, nullptr, textmodel::LogitsMode::None);
  const auto past = act.present;
  const TokenId last = 3;
  const auto anchor = lm.forward(std::span<const TokenId>(&last, 1), &past, textmodel::LogitsMode::Last);
  const auto p_unmod = textmodel::softmax(anchor.last_logits());
  steering::PoolContext pool;
  pool.sum.assign(32, 0.0);
  for (std::size_t i = 0; i < act.n; ++i)
    for (std::size_t k = 0; k < 32; ++k) pool.sum[k] += act.hidden[i * 32 + k];
  for (std::size_t k = 0; k < 32; ++k) pool.sum[k] += anchor.hidden[k];
  pool.count = act.n + 1;

  const auto attr = attributes::Attribute::from_head(random_head(2, 32, 7), 0);
  std::normal_distribution<double> small(0.0, 0.05);
  auto delta = PastState<double>::zeros_like(past);
  for (auto& l : delta.layers) {
    for (auto& v : l.keys) v = small(rng);
    for (auto& v : l.values) v = small(rng);
  }
  PastState<double> grad;
  steering::steering_loss(lm, past, &delta, last, anchor.present, attr, pool, p_unmod, 0.01, 1, &grad);
  auto f = [&] {
    return steering::steering_loss(lm, past, &delta, last, anchor.present, attr, pool, p_unmod, 0.01, 1).total;
  };
  double worst = 0;
  for (std::size_t l = 0; l < delta.layers.size(); ++l)
    for (int kind = 0; kind < 2; ++kind) {
      auto& arr = kind ? delta.layers[l].values : delta.layers[l].keys;
      const auto& g = kind ? grad.layers[l].values : grad.layers[l].keys;
      for (int k = 0; k < 16; ++k) {
        const std::size_t i = rng() % arr.size();
        const double keep = arr[i], h = 1e-5;
        arr[i] = keep + h;
        const double up = f();
        arr[i] = keep - h;
        const double dn = f();
        arr[i] = keep;
        worst = std::max(worst, rel_err((up - dn) / (2 * h), g[i], 1e-7));
        ++checked;
      }
    }
  return worst;
}

Outcome gradient_checks() {
  const auto t0 = Clock::now();
  std::size_t na = 0, nb = 0, nc = 0;
  const double a = lm_param_gradients(na), b = head_input_gradients(nb), c = delta_gradients(nc);
  const double secs = since(t0);
  return {a <= Tol::kGradRel && b <= Tol::kGradRel && c <= Tol::kGradRel && secs < Tol::kGradSeconds,
          fmt("worst relative error: LM parameters %.2e (%zu coords), head input %.2e (%zu), delta-H %.2e (%zu); "
              "%.1f s",
              a, na, b, nb, c, nc, secs)};
}

// 5 -------------------------------------------------------------------------
Outcome fusion() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd(0.0, 3.0);
  std::uniform_real_distribution<double> ug(0.0, 1.0);
  double worst_sum = 0;
  std::size_t fixed_bad = 0, endpoint_bad = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> la(n), lb(n);
    for (auto& x : la) x = nd(rng);
    for (auto& x : lb) x = nd(rng);
    const auto p = textmodel::softmax(std::span<const double>(la));
    const auto q = textmodel::softmax(std::span<const double>(lb));
    const double g = ug(rng);
    const auto f = steering::fuse(p, q, g);
    worst_sum = std::max(worst_sum, std::abs(std::accumulate(f.begin(), f.end(), 0.0) - 1.0));
    fixed_bad += steering::fuse(p, p, g) != p;
    endpoint_bad += steering::fuse(p, q, 1.0) != p;
    endpoint_bad += steering::fuse(p, q, 0.0) != q;
  }
  return {worst_sum <= Tol::kFuseSum && fixed_bad == 0 && endpoint_bad == 0,
          fmt("1000 random pairs: worst |sum-1| %.1e; fixed point mismatches %zu; endpoint mismatches %zu", worst_sum,
              fixed_bad, endpoint_bad)};
}

// 6, 7 ----------------------------------------------------------------------
struct Desk {
  std::unique_ptr<cuegen_test::ToyWorld> world;
  double train_seconds = 0;
};

Desk& desk() {
  static Desk d = [] {
    Desk out;
    cuegen_test::ToyOptions o;
    o.layers = 4;
    o.heads = 4;
    o.dim = 128;
    o.context = 64;
    o.steps = 1000;
    o.seq_len = 48;
    const auto t0 = Clock::now();
    out.world = cuegen_test::make_toy_world(o);
    out.train_seconds = since(t0);
    return out;
  }();
  return d;
}

struct PairedRun {
  int wins = 0;
  double p_steered = 0, p_plain = 0;
  double lcsr_steered = 0, lcsr_plain = 0;
  double seconds = 0;
};

PairedRun paired_seeds(const cuegen_test::ToyWorld& w, double alpha, std::size_t iterations, int seeds) {
  const auto attr = w.cue();
  const auto openings = w.dialogue_openings(3);
  std::vector<std::string> steered, plain;
  PairedRun r;
  const auto t0 = Clock::now();
  for (int seed = 0; seed < seeds; ++seed) {
    steering::SteeringParams p;
    p.alpha = alpha;
    p.iterations = iterations;
    p.max_len = 24;
    p.seed = static_cast<std::uint64_t>(seed);
    const auto& ctx = openings[static_cast<std::size_t>(seed) % openings.size()];
    const auto s = steering::generate_steered(w.lm(), w.vocab(), ctx, attr, p);
    p.alpha = 0;
    const auto u = steering::generate_steered(w.lm(), w.vocab(), ctx, attr, p);
    const double a = w.p_cue(s.text), b = w.p_cue(u.text);
    r.wins += a > b;
    r.p_steered += a / seeds;
    r.p_plain += b / seeds;
    steered.push_back(s.text);
    plain.push_back(u.text);
  }
  r.seconds = since(t0);
  // Reference cues from a corpus the LM never saw.
  corpus::synthetic::SynthOptions so;
  so.seed = 99;
  const eval::ReferenceIndex refs(eval::cue_lines(corpus::synthetic::generate(so)));
  eval::EvalConfig cfg;
  cfg.reference_size = refs.size();
  cfg.threads = 1;
  r.lcsr_steered = eval::evaluate_samples("steered", steered, refs, cfg).mean_lcsr;
  r.lcsr_plain = eval::evaluate_samples("unsteered", plain, refs, cfg).mean_lcsr;
  return r;
}

Outcome steering_efficacy() {
  auto& d = desk();
  const auto& w = *d.world;
  const double acc = w.head_report.holdout_accuracy;
  const auto strong = paired_seeds(w, 1.0, 10, 100);
  const auto gentle = paired_seeds(w, 0.04, 1, 100);
  std::ostringstream os;
  os << fmt("desk LM L4/h4/d128 trained in %.0f s (val ppl %.2f); head holdout accuracy %.3f; ", d.train_seconds,
            w.lm_report.val_perplexity, acc)
     << fmt("alpha=1 m=10: %d/100 wins, mean P(cue) %.3f vs %.3f, LCSR %.4f vs %.4f (%.0f s); ", strong.wins,
            strong.p_steered, strong.p_plain, strong.lcsr_steered, strong.lcsr_plain, strong.seconds)
     << fmt("library defaults alpha=0.04 m=1 (informational): %d/100 wins, P(cue) %.3f vs %.3f, LCSR %.4f vs %.4f",
            gentle.wins, gentle.p_steered, gentle.p_plain, gentle.lcsr_steered, gentle.lcsr_plain);
  return {acc >= Tol::kHeadAccuracy && strong.wins >= Tol::kPairedWins && strong.lcsr_steered > strong.lcsr_plain,
          os.str()};
}

Outcome kl_trend() {
  const auto& w = *desk().world;
  const auto& lm = w.lm();
  const auto attr = w.cue();
  const auto stream = textmodel::encode_corpus(w.scripts, w.vocab());
  std::mt19937_64 rng(21);
  std::vector<std::vector<TokenId>> ctxs;
  while (ctxs.size() < 50) {
    const std::size_t len = 4 + rng() % 20;
    const std::size_t at = rng() % (stream.size() - len);
    std::vector<TokenId> c(stream.begin() + static_cast<std::ptrdiff_t>(at),
                           stream.begin() + static_cast<std::ptrdiff_t>(at + len));
    if (std::find(c.begin(), c.end(), textmodel::Vocab::kEos) == c.end()) ctxs.push_back(std::move(c));
  }
  const std::size_t dim = lm.config().dim;
  std::vector<double> mean_kl;
  for (double lambda : {0.0, 0.01, 0.1}) {
    steering::SteeringParams params;
    params.kl_scale = lambda;
    params.alpha = 0.3;
    params.iterations = 3;
    double s = 0;
    for (const auto& ctx : ctxs) {
      steering::PoolContext pool;
      pool.sum.assign(dim, 0.0);
      auto act = lm.forward(std::span<const TokenId>(ctx).first(ctx.size() - 1), nullptr, textmodel::LogitsMode::None);
      for (std::size_t i = 0; i < act.n; ++i)
        for (std::size_t k = 0; k < dim; ++k) pool.sum[k] += act.hidden[i * dim + k];
      pool.count = act.n;
      const TokenId last = ctx.back();
      const auto anchor = lm.forward(std::span<const TokenId>(&last, 1), &act.present, textmodel::LogitsMode::Last);
      const auto p_unmod = textmodel::softmax(anchor.last_logits());
      s += steering::perturb_past(lm, act.present, last, attr, pool, p_unmod, params, &anchor).kl;
    }
    mean_kl.push_back(s / static_cast<double>(ctxs.size()));
  }
  return {mean_kl[1] <= mean_kl[0] && mean_kl[2] <= mean_kl[1],
          fmt("mean per-step KL over 50 contexts (alpha=0.3, m=3): lambda 0 -> %.4e, 0.01 -> %.4e, 0.1 -> %.4e",
              mean_kl[0], mean_kl[1], mean_kl[2])};
}

// 8 -------------------------------------------------------------------------
Outcome lda() {
  const auto docs = cuegen_test::three_topic_corpus(3, 300, 40);
  attributes::LdaParams p;
  p.topics = 3;
  p.iters = 500;
  p.check_invariants = true;
  std::size_t verified = 0;
  p.on_sweep = [&](std::size_t) { ++verified; };
  const auto t0 = Clock::now();
  std::string error;
  attributes::TopicModel m;
  try {
    m = attributes::lda_fit(docs, p);
  } catch (const Error& e) {
    error = e.what();
  }
  const double secs = since(t0);
  if (!error.empty()) return {false, "invariant check failed: " + error};
  std::set<char> owners;
  std::size_t worst = 10;
  std::string hits;
  for (std::size_t k = 0; k < 3; ++k) {
    std::map<char, std::size_t> votes;
    for (const auto& tw : attributes::lda_top_words(m, k, 10)) ++votes[tw.word[1]];
    const auto best = std::max_element(votes.begin(), votes.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
    worst = std::min(worst, best->second);
    owners.insert(best->first);
    hits += (k ? ", " : "") + std::to_string(best->second);
  }
  return {worst >= Tol::kTopicHits && owners.size() == 3 && verified == 500 && secs < Tol::kLdaSeconds,
          fmt("%zu sweeps with count invariants verified after each; top-10 hits per topic %s; "
              "%zu distinct generating topics; %.1f s",
              verified, hits.c_str(), owners.size(), secs)};
}

// 9 -------------------------------------------------------------------------
Outcome parser() {
  const auto manifest = cuegen_test::load_json(cuegen_test::data_path("fixtures/manifest.json"));
  std::size_t files = 0, bad = 0, lines = 0;
  std::string first_problem;
  auto problem = [&](const std::string& f, const std::string& why) {
    ++bad;
    if (first_problem.empty()) first_problem = f + ": " + why;
  };
  for (const auto& [file, expect] : manifest.items()) {
    ++files;
    const auto raw = cuegen_test::slurp(cuegen_test::data_path("fixtures/" + file));
    if (expect.contains("error")) {
      try {
        corpus::parse_script(raw);
        problem(file, "parsed, expected " + expect["error"].get<std::string>());
      } catch (const Error& e) {
        if (e.name() != expect["error"].get<std::string>()) problem(file, "raised " + std::string(e.name()));
      }
      continue;
    }
    const auto s = corpus::parse_script(raw);
    std::vector<const corpus::Line*> flat;
    for (const auto& sc : s.scenes)
      for (const auto& l : sc.lines) flat.push_back(&l);
    if (s.scenes.size() != expect["scenes"].get<std::size_t>()) problem(file, "scene count");
    if (flat.size() != expect["lines"].size()) {
      problem(file, "line count");
      continue;
    }
    for (std::size_t i = 0; i < flat.size(); ++i) {
      const auto& e = expect["lines"][i];
      const bool ok = corpus::to_string(flat[i]->kind) == e[0].get<std::string>() &&
                      (e[1].is_null() ? !flat[i]->speaker : flat[i]->speaker == e[1].get<std::string>()) &&
                      flat[i]->text == e[2].get<std::string>();
      if (!ok) problem(file, "line " + std::to_string(i));
      ++lines;
    }
    const auto again = corpus::parse_script(corpus::export_canonical(s));
    if (!corpus::same_content(s, again)) problem(file, "export round trip differs");
  }
  return {bad == 0, fmt("%zu fixtures, %zu lines checked for kind/speaker/text, round trips compared; %zu problems%s",
                        files, lines, bad, first_problem.empty() ? "" : (" (first: " + first_problem + ")").c_str())};
}

// 10 ------------------------------------------------------------------------
Outcome dist_and_echo() {
  using T = std::vector<std::vector<std::string>>;
  const double d1 = eval::dist_n(T{{"a", "a", "a", "a"}}, 1);
  const double d2 = eval::dist_n(T{{"a", "b"}, {"a", "b"}}, 2);
  const auto refs = cue_like_strings(300, 10);
  const eval::ReferenceIndex idx(refs);
  eval::EvalConfig cfg;
  cfg.num_samples = 100;
  cfg.reference_size = refs.size();
  const eval::Generator echo{"echo", [&](std::size_t, std::uint64_t seed) { return refs[seed % refs.size()]; }};
  const auto rep = eval::run_eval(echo, idx, cfg);
  return {d1 == 0.25 && d2 == 0.5 && rep.mean_lcsr == 1.0 && rep.mean_bi_sim == 1.0,
          fmt("Dist-1 [a a a a] = %g; Dist-2 [a b],[a b] = %g; echo over %zu refs: LCSR %g, BI-SIM %g", d1, d2,
              refs.size(), rep.mean_lcsr, rep.mean_bi_sim)};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional arguments pick criteria by number.
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoul(argv[i]));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle equivalence", metric_oracles},
      {"metric properties", metric_properties},
      {"pruned nearest cues", pruned_search},
      {"gradient checks", gradient_checks},
      {"fusion", fusion},
      {"steering efficacy", steering_efficacy},
      {"KL trend", kl_trend},
      {"LDA", lda},
      {"parser", parser},
      {"Dist-n and echo", dist_and_echo},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    ++ran;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << i + 1 << " " << criteria[i].first << " [" << fmt("%.1f s", since(t0))
              << "]: " << o.detail << std::endl;
  }
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << ran - failed << "/" << ran << std::endl;
  return failed ? 1 : 0;
}
