#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/error.hpp"
#include "cuegen/eval/metrics.hpp"
#include "cuegen/eval/neighbors.hpp"

namespace cuegen::eval {

struct EvalConfig {
  std::size_t num_samples = 600;
  std::size_t reference_size = 50000;
  std::size_t top_r = 10;
  std::uint64_t seed = 0;
  std::size_t threads = 0;  // 0: hardware concurrency
  DistNorm dist_norm = DistNorm::NgramCount;

  void validate() const {
    if (num_samples == 0) fail(Errc::InvalidParams, "num_samples must be positive");
    if (reference_size == 0) fail(Errc::InvalidParams, "reference_size must be positive");
    if (top_r == 0) fail(Errc::InvalidParams, "top_r must be positive");
    if (top_r > reference_size) fail(Errc::InvalidParams, "top_r exceeds reference_size");
  }
};

// A named text source. `generate(i, seed)` returns sample i; it must be safe
// to call from several threads at once.
struct Generator {
  std::string name;
  std::function<std::string(std::size_t index, std::uint64_t seed)> generate;
};

struct NeighborScore {
  std::size_t index = 0;
  std::size_t distance = 0;
  double lcsr = 0;
  double bi_sim = 0;
};

struct SampleResult {
  std::string text;
  std::string normalized;
  std::vector<NeighborScore> neighbors;  // ascending distance, ties by index
  double lcsr = 0;    // best over neighbors
  double bi_sim = 0;  // best over neighbors
  double lcsr_mean = 0;
  double bi_sim_mean = 0;
};

struct EvalReport {
  std::string generator;
  std::size_t num_samples = 0;
  std::size_t reference_size = 0;
  std::size_t top_r = 0;
  std::uint64_t seed = 0;
  double mean_lcsr = 0;
  double mean_bi_sim = 0;
  double mean_lcsr_over_neighbors = 0;
  double mean_bi_sim_over_neighbors = 0;
  double dist1 = 0, dist2 = 0, dist3 = 0;
  DistNorm dist_norm = DistNorm::NgramCount;
  std::vector<SampleResult> samples;
  double generation_seconds = 0;
  double search_seconds = 0;
  std::size_t threads = 1;
};

inline nlohmann::json to_json(const EvalReport& r, bool with_samples = true) {
  nlohmann::json j{{"generator", r.generator},
                   {"num_samples", r.num_samples},
                   {"reference_size", r.reference_size},
                   {"top_r", r.top_r},
                   {"seed", r.seed},
                   {"lcsr", r.mean_lcsr},
                   {"bi_sim", r.mean_bi_sim},
                   {"lcsr_mean_over_neighbors", r.mean_lcsr_over_neighbors},
                   {"bi_sim_mean_over_neighbors", r.mean_bi_sim_over_neighbors},
                   {"dist_1", r.dist1},
                   {"dist_2", r.dist2},
                   {"dist_3", r.dist3},
                   {"dist_normalization", std::string(to_string(r.dist_norm))},
                   {"runtime", {{"generation_seconds", r.generation_seconds},
                                {"search_seconds", r.search_seconds},
                                {"threads", r.threads}}}};
  if (with_samples) {
    auto& arr = j["samples"] = nlohmann::json::array();
    for (const auto& s : r.samples) {
      nlohmann::json ns = nlohmann::json::array();
      for (const auto& n : s.neighbors)
        ns.push_back({{"index", n.index}, {"distance", n.distance}, {"lcsr", n.lcsr}, {"bi_sim", n.bi_sim}});
      arr.push_back({{"text", s.text}, {"lcsr", s.lcsr}, {"bi_sim", s.bi_sim}, {"neighbors", ns}});
    }
  }
  return j;
}

// One row per report, in the layout of a results table.
inline std::string format_table(const std::vector<EvalReport>& reports) {
  std::size_t w = 5;
  for (const auto& r : reports) w = std::max(w, r.generator.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(w)) << "Model" << std::right;
  for (const char* h : {"LCSR", "BI-SIM", "Dist-1", "Dist-2", "Dist-3"}) out << std::setw(9) << h;
  out << '\n' << std::string(w + 45, '-') << '\n' << std::fixed << std::setprecision(3);
  for (const auto& r : reports) {
    out << std::left << std::setw(static_cast<int>(w)) << r.generator << std::right;
    for (double v : {r.mean_lcsr, r.mean_bi_sim, r.dist1, r.dist2, r.dist3}) out << std::setw(9) << v;
    out << '\n';
  }
  return out.str();
}

namespace detail {

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

// Scores already generated texts against a reference index.
inline EvalReport evaluate_samples(const std::string& name, const std::vector<std::string>& texts,
                                   const ReferenceIndex& refs, const EvalConfig& cfg) {
  if (refs.empty()) fail(Errc::EmptyReferences, "no reference cues");
  if (texts.empty()) fail(Errc::InvalidParams, "no samples to evaluate");
  EvalReport rep;
  rep.generator = name;
  rep.num_samples = texts.size();
  rep.reference_size = refs.size();
  rep.top_r = std::min(cfg.top_r, refs.size());
  rep.seed = cfg.seed;
  rep.dist_norm = cfg.dist_norm;
  rep.threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  rep.samples.resize(texts.size());
  const auto t0 = std::chrono::steady_clock::now();
  detail::parallel_for(texts.size(), rep.threads, [&](std::size_t i) {
    auto& s = rep.samples[i];
    s.text = texts[i];
    s.normalized = normalize_for_eval(texts[i]);
    const auto u = utf8::decode(s.normalized);
    for (const auto& n : nearest_cues(u, refs, cfg.top_r)) {
      const auto& ref = refs.text(n.index);
      NeighborScore ns{n.index, n.distance, 0.0, 0.0};
      if (!(u.empty() && ref.empty())) {
        ns.lcsr = lcsr(u, ref);
        ns.bi_sim = bi_sim(u, ref);
      }
      s.neighbors.push_back(ns);
    }
    for (const auto& n : s.neighbors) {
      s.lcsr = std::max(s.lcsr, n.lcsr);
      s.bi_sim = std::max(s.bi_sim, n.bi_sim);
      s.lcsr_mean += n.lcsr;
      s.bi_sim_mean += n.bi_sim;
    }
    s.lcsr_mean /= static_cast<double>(s.neighbors.size());
    s.bi_sim_mean /= static_cast<double>(s.neighbors.size());
  });
  rep.search_seconds = detail::seconds_since(t0);
  std::vector<std::vector<std::string>> tokens;
  for (const auto& s : rep.samples) {
    rep.mean_lcsr += s.lcsr;
    rep.mean_bi_sim += s.bi_sim;
    rep.mean_lcsr_over_neighbors += s.lcsr_mean;
    rep.mean_bi_sim_over_neighbors += s.bi_sim_mean;
    tokens.push_back(corpus::split_whitespace(s.normalized));
  }
  const auto n = static_cast<double>(rep.samples.size());
  rep.mean_lcsr /= n;
  rep.mean_bi_sim /= n;
  rep.mean_lcsr_over_neighbors /= n;
  rep.mean_bi_sim_over_neighbors /= n;
  auto dist = [&](std::size_t k) {
    try {
      return dist_n(tokens, k, cfg.dist_norm);
    } catch (const Error& e) {
      if (e.code() == Errc::NoNgrams) return 0.0;
      throw;
    }
  };
  rep.dist1 = dist(1);
  rep.dist2 = dist(2);
  rep.dist3 = dist(3);
  return rep;
}

// Generates cfg.num_samples texts (sample i uses seed cfg.seed + i) and scores them.
inline EvalReport run_eval(const Generator& gen, const ReferenceIndex& refs, const EvalConfig& cfg) {
  cfg.validate();
  if (!gen.generate) fail(Errc::InvalidParams, "generator has no function");
  std::vector<std::string> texts(cfg.num_samples);
  const std::size_t threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  const auto t0 = std::chrono::steady_clock::now();
  detail::parallel_for(cfg.num_samples, threads, [&](std::size_t i) { texts[i] = gen.generate(i, cfg.seed + i); });
  const double gen_seconds = detail::seconds_since(t0);
  auto rep = evaluate_samples(gen.name, texts, refs, cfg);
  rep.generation_seconds = gen_seconds;
  return rep;
}

}  // namespace cuegen::eval
