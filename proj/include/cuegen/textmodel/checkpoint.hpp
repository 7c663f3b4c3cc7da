#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cuegen/textmodel/container.hpp"
#include "cuegen/textmodel/model.hpp"
#include "cuegen/textmodel/vocab.hpp"

namespace cuegen::textmodel {

template <class Real>
struct BasicCheckpoint {
  LanguageModel<Real> model;
  Vocab vocab;
  std::uint64_t step = 0;
  std::string rng_state;  // textual std::mt19937_64 state

  Container to_container() const {
    Container c;
    c.meta["format"] = "cuegen-lm";
    c.meta["config"] = model.config();
    c.meta["vocab"] = vocab.to_json();
    c.meta["step"] = step;
    c.meta["rng_state"] = rng_state;
    for (const auto& v : model.layout()) {
      std::vector<Real> data(model.params().begin() + static_cast<std::ptrdiff_t>(v.offset),
                             model.params().begin() + static_cast<std::ptrdiff_t>(v.offset + v.size));
      c.tensors.push_back(make_blob(v.name, v.shape, data));
    }
    return c;
  }

  static BasicCheckpoint from_container(const Container& c) {
    if (c.meta.value("format", "") != "cuegen-lm") fail(Errc::BadCheckpoint, "not a language-model checkpoint");
    const auto cfg = c.meta.at("config").get<LMConfig>();
    LanguageModel<Real> lm(cfg);
    for (const auto& v : lm.layout()) {
      const auto& blob = c.get(v.name);
      if (blob.shape != v.shape) fail(Errc::BadCheckpoint, "shape mismatch for " + v.name);
      const auto values = blob_values<Real>(blob);
      if (values.size() != v.size) fail(Errc::BadCheckpoint, "size mismatch for " + v.name);
      std::copy(values.begin(), values.end(), lm.params().begin() + static_cast<std::ptrdiff_t>(v.offset));
    }
    BasicCheckpoint ck{std::move(lm), Vocab::from_json(c.meta.at("vocab")), c.meta.at("step").get<std::uint64_t>(),
                       c.meta.at("rng_state").get<std::string>()};
    if (ck.vocab.size() != cfg.vocab) fail(Errc::BadCheckpoint, "vocabulary size does not match config");
    return ck;
  }

  std::string serialize() const { return textmodel::serialize(to_container()); }
  static BasicCheckpoint deserialize(const std::string& bytes) { return from_container(textmodel::deserialize(bytes)); }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static BasicCheckpoint load(const std::string& path) { return deserialize(read_file(path)); }
};

using Checkpoint = BasicCheckpoint<float>;

inline std::string rng_state_string(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

inline std::mt19937_64 rng_from_state(const std::string& state) {
  std::mt19937_64 rng;
  std::istringstream ss(state);
  ss >> rng;
  return rng;
}

}  // namespace cuegen::textmodel
