#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "cuegen/error.hpp"

namespace cuegen::textmodel {

struct LMConfig {
  std::size_t layers = 4;
  std::size_t heads = 4;
  std::size_t dim = 128;
  std::size_t context = 256;
  std::size_t vocab = 8000;
  std::size_t ffn = 512;
  std::uint64_t seed = 0;

  std::size_t head_dim() const { return dim / heads; }

  void validate() const {
    if (layers == 0 || heads == 0 || dim == 0 || context == 0 || vocab == 0 || ffn == 0)
      fail(Errc::InvalidConfig, "all model dimensions must be positive");
    if (dim % heads != 0) fail(Errc::InvalidConfig, "dim must be divisible by heads");
  }

  friend bool operator==(const LMConfig&, const LMConfig&) = default;
};

inline void to_json(nlohmann::json& j, const LMConfig& c) {
  j = {{"layers", c.layers}, {"heads", c.heads},   {"dim", c.dim},  {"context", c.context},
       {"vocab", c.vocab},   {"ffn", c.ffn},       {"seed", c.seed}};
}

inline void from_json(const nlohmann::json& j, LMConfig& c) {
  c.layers = j.at("layers").get<std::size_t>();
  c.heads = j.at("heads").get<std::size_t>();
  c.dim = j.at("dim").get<std::size_t>();
  c.context = j.at("context").get<std::size_t>();
  c.vocab = j.at("vocab").get<std::size_t>();
  c.ffn = j.at("ffn").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
}

}  // namespace cuegen::textmodel
