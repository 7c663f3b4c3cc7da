#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/error.hpp"

namespace cuegen::textmodel {

static_assert(std::endian::native == std::endian::little, "tensor container assumes a little-endian host");

// Tensor container file:
//   8 bytes   magic "CUEGENTC"
//   8 bytes   little-endian u64 header length N
//   N bytes   JSON header {"meta": {...}, "tensors": [{name, shape, dtype, offset, nbytes}]}
//   data      raw little-endian tensor bytes, offsets relative to the data start
struct TensorBlob {
  std::string name;
  std::vector<std::size_t> shape;
  std::string dtype;  // "f32", "f64", "i32", "i64"
  std::string bytes;
};

struct Container {
  nlohmann::json meta = nlohmann::json::object();
  std::vector<TensorBlob> tensors;

  const TensorBlob& get(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return t;
    fail(Errc::BadCheckpoint, "missing tensor " + name);
  }

  bool has(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return true;
    return false;
  }
};

inline constexpr char kContainerMagic[8] = {'C', 'U', 'E', 'G', 'E', 'N', 'T', 'C'};

template <class T>
std::string dtype_name() {
  if constexpr (std::is_same_v<T, float>) return "f32";
  else if constexpr (std::is_same_v<T, double>) return "f64";
  else if constexpr (std::is_same_v<T, std::int32_t>) return "i32";
  else if constexpr (std::is_same_v<T, std::int64_t>) return "i64";
  else static_assert(sizeof(T) == 0, "unsupported dtype");
}

template <class T>
TensorBlob make_blob(std::string name, std::vector<std::size_t> shape, const std::vector<T>& data) {
  TensorBlob b{std::move(name), std::move(shape), dtype_name<T>(), {}};
  b.bytes.assign(reinterpret_cast<const char*>(data.data()), data.size() * sizeof(T));
  return b;
}

template <class T>
std::vector<T> blob_values(const TensorBlob& b) {
  if (b.dtype != dtype_name<T>()) fail(Errc::BadCheckpoint, "tensor " + b.name + " has dtype " + b.dtype);
  if (b.bytes.size() % sizeof(T) != 0) fail(Errc::BadCheckpoint, "tensor " + b.name + " truncated");
  std::vector<T> out(b.bytes.size() / sizeof(T));
  std::memcpy(out.data(), b.bytes.data(), b.bytes.size());
  return out;
}

inline std::string serialize(const Container& c) {
  nlohmann::json header;
  header["meta"] = c.meta;
  auto dir = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto& t : c.tensors) {
    dir.push_back({{"name", t.name}, {"shape", t.shape}, {"dtype", t.dtype}, {"offset", offset},
                   {"nbytes", t.bytes.size()}});
    offset += t.bytes.size();
  }
  header["tensors"] = std::move(dir);
  const std::string h = header.dump();
  std::string out(kContainerMagic, 8);
  const auto len = static_cast<std::uint64_t>(h.size());
  out.append(reinterpret_cast<const char*>(&len), 8);
  out += h;
  for (const auto& t : c.tensors) out += t.bytes;
  return out;
}

inline Container deserialize(const std::string& data) {
  if (data.size() < 16 || std::memcmp(data.data(), kContainerMagic, 8) != 0)
    fail(Errc::BadCheckpoint, "not a tensor container");
  std::uint64_t len = 0;
  std::memcpy(&len, data.data() + 8, 8);
  if (16 + len > data.size()) fail(Errc::BadCheckpoint, "header exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(data.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::BadCheckpoint, std::string("bad header: ") + e.what());
  }
  Container c;
  c.meta = header.value("meta", nlohmann::json::object());
  const std::size_t base = 16 + len;
  for (const auto& t : header.at("tensors")) {
    TensorBlob b;
    b.name = t.at("name").get<std::string>();
    b.shape = t.at("shape").get<std::vector<std::size_t>>();
    b.dtype = t.at("dtype").get<std::string>();
    const auto off = t.at("offset").get<std::size_t>();
    const auto nbytes = t.at("nbytes").get<std::size_t>();
    if (base + off + nbytes > data.size()) fail(Errc::BadCheckpoint, "tensor " + b.name + " out of bounds");
    b.bytes = data.substr(base + off, nbytes);
    c.tensors.push_back(std::move(b));
  }
  return c;
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(Errc::IoError, "short write to " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cuegen::textmodel
