#pragma once

#include <algorithm>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/attributes/head.hpp"
#include "cuegen/error.hpp"

namespace cuegen::attributes {

// emoji -> Plutchik label. File format: {"labels": [...], "map": {emoji: label}}.
struct EmotionMap {
  std::vector<std::string> labels;
  std::map<std::string, std::string> map;

  static EmotionMap from_json(const nlohmann::json& j) {
    EmotionMap m;
    try {
      m.labels = j.at("labels").get<std::vector<std::string>>();
      m.map = j.at("map").get<std::map<std::string, std::string>>();
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::MalformedRecord, std::string("emotion map: ") + e.what());
    }
    if (m.labels.empty()) fail(Errc::MalformedRecord, "emotion map declares no labels");
    for (const auto& [emoji, label] : m.map)
      if (std::find(m.labels.begin(), m.labels.end(), label) == m.labels.end())
        fail(Errc::MalformedRecord, "emoji " + emoji + " maps to undeclared label " + label);
    return m;
  }

  static EmotionMap load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(Errc::IoError, "cannot open " + path);
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      fail(Errc::MalformedRecord, e.what());
    }
  }

  std::size_t label_index(const std::string& label) const {
    const auto it = std::find(labels.begin(), labels.end(), label);
    if (it == labels.end()) fail(Errc::LabelOutOfRange, "unknown emotion " + label);
    return static_cast<std::size_t>(it - labels.begin());
  }
};

struct EmotionDataset {
  std::vector<std::string> labels;
  std::vector<LabeledExample> examples;
  std::size_t dropped = 0;
};

// JSONL {"text": str, "emojis": [str]} -> multi-label examples over the map's
// labels. Records whose emojis are all unmapped are dropped and counted.
inline EmotionDataset import_emotion_labels(std::istream& in, const EmotionMap& map) {
  EmotionDataset ds;
  ds.labels = map.labels;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      fail(Errc::MalformedRecord, where + ": not JSON");
    }
    if (!j.is_object() || !j.contains("text") || !j["text"].is_string())
      fail(Errc::MalformedRecord, where + ": missing text");
    if (!j.contains("emojis") || !j["emojis"].is_array()) fail(Errc::MalformedRecord, where + ": missing emojis");
    if (j["emojis"].empty()) fail(Errc::MalformedRecord, where + ": empty emoji list");
    LabeledExample ex;
    ex.text = j["text"].get<std::string>();
    for (const auto& e : j["emojis"]) {
      if (!e.is_string()) fail(Errc::MalformedRecord, where + ": emoji entries must be strings");
      const auto it = map.map.find(e.get<std::string>());
      if (it == map.map.end()) continue;
      const auto idx = map.label_index(it->second);
      if (std::find(ex.labels.begin(), ex.labels.end(), idx) == ex.labels.end()) ex.labels.push_back(idx);
    }
    if (ex.labels.empty()) {
      ++ds.dropped;
      continue;
    }
    std::sort(ex.labels.begin(), ex.labels.end());
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

}  // namespace cuegen::attributes
