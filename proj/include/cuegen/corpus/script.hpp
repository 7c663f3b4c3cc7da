#pragma once

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace cuegen::corpus {

enum class LineKind { Dialogue, Cue };

inline std::string_view to_string(LineKind k) {
  return k == LineKind::Dialogue ? "dialogue" : "cue";
}

inline std::optional<LineKind> parse_kind(std::string_view s) {
  if (s == "dialogue") return LineKind::Dialogue;
  if (s == "cue") return LineKind::Cue;
  return std::nullopt;
}

// Half-open byte range into the parsed source.
struct ByteSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

struct Line {
  std::size_t index = 0;
  LineKind kind = LineKind::Dialogue;
  std::optional<std::string> speaker;
  std::string text;  // cues keep their enclosing parentheses
  ByteSpan raw_span;
};

struct Scene {
  std::size_t index = 0;
  std::vector<Line> lines;
};

struct Script {
  std::string id;
  std::string title;
  std::vector<Scene> scenes;
  std::string source_hash;

  std::size_t line_count() const {
    std::size_t n = 0;
    for (const auto& s : scenes) n += s.lines.size();
    return n;
  }

  std::size_t count(LineKind kind) const {
    std::size_t n = 0;
    for (const auto& s : scenes)
      for (const auto& l : s.lines) n += l.kind == kind;
    return n;
  }
};

// Content equality: speaker, kind and text per line in scene order.
inline bool same_content(const Script& a, const Script& b) {
  if (a.scenes.size() != b.scenes.size()) return false;
  for (std::size_t s = 0; s < a.scenes.size(); ++s) {
    const auto& la = a.scenes[s].lines;
    const auto& lb = b.scenes[s].lines;
    if (la.size() != lb.size()) return false;
    for (std::size_t i = 0; i < la.size(); ++i) {
      if (la[i].kind != lb[i].kind || la[i].speaker != lb[i].speaker ||
          la[i].text != lb[i].text)
        return false;
    }
  }
  return true;
}

// 64-bit FNV-1a, hex encoded.
inline std::string content_digest(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline nlohmann::json to_json(const Line& l) {
  nlohmann::json j;
  j["index"] = l.index;
  j["kind"] = to_string(l.kind);
  j["speaker"] = l.speaker ? nlohmann::json(*l.speaker) : nlohmann::json(nullptr);
  j["text"] = l.text;
  j["raw_span"] = {l.raw_span.begin, l.raw_span.end};
  return j;
}

inline nlohmann::json to_json(const Script& s) {
  nlohmann::json j;
  j["id"] = s.id;
  j["title"] = s.title;
  j["source_hash"] = s.source_hash;
  auto scenes = nlohmann::json::array();
  for (const auto& sc : s.scenes) {
    auto lines = nlohmann::json::array();
    for (const auto& l : sc.lines) lines.push_back(to_json(l));
    scenes.push_back({{"index", sc.index}, {"lines", std::move(lines)}});
  }
  j["scenes"] = std::move(scenes);
  return j;
}

inline Script script_from_json(const nlohmann::json& j) {
  Script s;
  s.id = j.at("id").get<std::string>();
  s.title = j.value("title", "");
  s.source_hash = j.value("source_hash", "");
  for (const auto& sj : j.at("scenes")) {
    Scene sc;
    sc.index = sj.at("index").get<std::size_t>();
    for (const auto& lj : sj.at("lines")) {
      Line l;
      l.index = lj.at("index").get<std::size_t>();
      l.kind = parse_kind(lj.at("kind").get<std::string>()).value_or(LineKind::Dialogue);
      if (!lj.at("speaker").is_null()) l.speaker = lj.at("speaker").get<std::string>();
      l.text = lj.at("text").get<std::string>();
      if (lj.contains("raw_span")) {
        l.raw_span.begin = lj["raw_span"][0].get<std::size_t>();
        l.raw_span.end = lj["raw_span"][1].get<std::size_t>();
      }
      sc.lines.push_back(std::move(l));
    }
    s.scenes.push_back(std::move(sc));
  }
  return s;
}

}  // namespace cuegen::corpus
