#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

namespace cuegen_test {

inline std::string data_path(const std::string& rel) { return std::string(CUEGEN_DATA_DIR) + "/" + rel; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::json load_json(const std::string& path) { return nlohmann::json::parse(slurp(path)); }

}  // namespace cuegen_test
