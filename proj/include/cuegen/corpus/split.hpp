#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"

namespace cuegen::corpus {

struct SplitSpec {
  double train = 0.8;
  double attribute = 0.1;
  double test = 0.1;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<Script> train;
  std::vector<Script> attribute;
  std::vector<Script> test;
};

namespace detail {

// Sizes for the three partitions. Every non-zero fraction gets at least one
// script; train absorbs rounding.
inline std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitSpec& spec) {
  const std::array<double, 3> f{spec.train, spec.attribute, spec.test};
  for (double x : f)
    if (!(x >= 0.0 && x <= 1.0)) fail(Errc::InvalidSplitSpec, "fractions must lie in [0,1]");
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
    fail(Errc::InvalidSplitSpec, "fractions must sum to 1");
  std::array<std::size_t, 3> sz{};
  for (int k = 1; k < 3; ++k) {
    sz[k] = static_cast<std::size_t>(std::llround(f[k] * static_cast<double>(n)));
    if (f[k] > 0 && sz[k] == 0) sz[k] = 1;
  }
  if (sz[1] + sz[2] > n) fail(Errc::TooFewScripts, "not enough scripts for the requested split");
  sz[0] = n - sz[1] - sz[2];
  if (f[0] > 0 && sz[0] == 0) fail(Errc::TooFewScripts, "no scripts left for training");
  return sz;
}

}  // namespace detail

// Partitions whole scripts. Deterministic given the seed and the set of ids,
// independent of input order.
inline Split split(std::vector<Script> scripts, const SplitSpec& spec) {
  if (scripts.size() < 3)
    fail(Errc::TooFewScripts, "need at least 3 scripts, got " + std::to_string(scripts.size()));
  const auto sz = detail::split_sizes(scripts.size(), spec);
  std::sort(scripts.begin(), scripts.end(),
            [](const Script& a, const Script& b) { return a.id < b.id; });
  std::mt19937_64 rng(spec.seed);
  // Fisher-Yates with explicit modulo draws; std::shuffle's exact sequence is
  // implementation-defined.
  for (std::size_t i = scripts.size() - 1; i > 0; --i) {
    const std::size_t j = rng() % (i + 1);
    std::swap(scripts[i], scripts[j]);
  }
  Split out;
  auto it = std::make_move_iterator(scripts.begin());
  out.train.assign(it, it + sz[0]);
  out.attribute.assign(it + sz[0], it + sz[0] + sz[1]);
  out.test.assign(it + sz[0] + sz[1], std::make_move_iterator(scripts.end()));
  return out;
}

}  // namespace cuegen::corpus
