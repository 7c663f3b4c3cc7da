#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/corpus/preprocess.hpp"
#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"

namespace cuegen::corpus {

// One record per line: {script_id, scene, index, kind, speaker, text}.
inline void write_jsonl(std::ostream& out, const Script& s) {
  for (const auto& sc : s.scenes) {
    for (const auto& l : sc.lines) {
      nlohmann::ordered_json j;
      j["script_id"] = s.id;
      j["scene"] = sc.index;
      j["index"] = l.index;
      j["kind"] = to_string(l.kind);
      j["speaker"] = l.speaker ? nlohmann::ordered_json(*l.speaker) : nlohmann::ordered_json(nullptr);
      j["text"] = l.text;
      out << j.dump() << '\n';
    }
  }
}

inline void write_jsonl(std::ostream& out, const std::vector<Script>& scripts) {
  for (const auto& s : scripts) write_jsonl(out, s);
}

inline void write_jsonl_file(const std::string& path, const std::vector<Script>& scripts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write " + path);
  write_jsonl(out, scripts);
}

// Groups records back into scripts, in order of first appearance.
inline std::vector<Script> read_jsonl(std::istream& in) {
  std::vector<Script> scripts;
  std::map<std::string, std::size_t> by_id;
  std::string row;
  std::size_t lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (row.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(row);
    } catch (const nlohmann::json::exception& e) {
      fail(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.contains("script_id") || !j.contains("scene") || !j.contains("kind") || !j.contains("text"))
      fail(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": missing field");
    const auto id = j["script_id"].get<std::string>();
    auto [it, fresh] = by_id.try_emplace(id, scripts.size());
    if (fresh) {
      Script s;
      s.id = id;
      s.title = id;
      scripts.push_back(std::move(s));
    }
    auto& script = scripts[it->second];
    const auto scene = j["scene"].get<std::size_t>();
    while (script.scenes.size() <= scene) script.scenes.push_back({script.scenes.size(), {}});
    Line l;
    const auto kind = parse_kind(j["kind"].get<std::string>());
    if (!kind) fail(Errc::MalformedRecord, "line " + std::to_string(lineno) + ": bad kind");
    l.kind = *kind;
    if (j.contains("speaker") && !j["speaker"].is_null()) l.speaker = j["speaker"].get<std::string>();
    l.text = j["text"].get<std::string>();
    auto& lines = script.scenes[scene].lines;
    l.index = lines.size();
    lines.push_back(std::move(l));
  }
  return scripts;
}

inline std::vector<Script> read_jsonl_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + path);
  return read_jsonl(in);
}

// Model-facing rendering of a line: "CAL . My mother is dead ." for dialogue,
// "( She pulls back the sheet . )" for cues.
inline std::string render_line(const Line& l) {
  std::string raw = l.kind == LineKind::Dialogue && l.speaker ? *l.speaker + ". " + l.text : l.text;
  return preprocess(raw);
}

inline std::string render_scene(const Scene& sc) {
  std::string out;
  for (const auto& l : sc.lines) {
    if (!out.empty()) out += ' ';
    out += render_line(l);
  }
  return out;
}

}  // namespace cuegen::corpus
