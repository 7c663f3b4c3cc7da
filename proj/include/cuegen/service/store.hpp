#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cuegen/corpus/parse.hpp"
#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"
#include "cuegen/service/engine.hpp"

namespace cuegen::service {

namespace fs = std::filesystem;

// Failure with an HTTP status attached; the name goes to {"error": name}.
struct ApiError : std::runtime_error {
  int status;
  std::string name;
  ApiError(int s, std::string n, const std::string& detail) : std::runtime_error(detail), status(s), name(std::move(n)) {}
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct ScriptRecord {
  corpus::Script script;
  std::size_t version = 1;
  std::string created;

  nlohmann::json to_json() const {
    return {{"script", corpus::to_json(script)}, {"version", version}, {"created", created}};
  }
  static ScriptRecord from_json(const nlohmann::json& j) {
    return {corpus::script_from_json(j.at("script")), j.at("version").get<std::size_t>(), j.value("created", "")};
  }
  nlohmann::json summary() const {
    return {{"id", script.id},
            {"title", script.title},
            {"source_hash", script.source_hash},
            {"version", version},
            {"scenes", script.scenes.size()},
            {"lines", script.line_count()},
            {"dialogue", script.count(corpus::LineKind::Dialogue)},
            {"cue", script.count(corpus::LineKind::Cue)}};
  }
};

struct Cursor {
  std::size_t scene = 0;
  std::size_t line = 0;
};

struct HistoryRecord {
  Cursor input;  // line the candidates continued
  std::string input_line;
  nlohmann::json attribute;
  nlohmann::json params;
  std::string text;  // inserted cue
  std::size_t candidate = 0;
  std::string timestamp;

  nlohmann::json to_json() const {
    return {{"scene", input.scene}, {"line", input.line}, {"input_line", input_line}, {"attribute", attribute},
            {"params", params},     {"text", text},       {"candidate", candidate},   {"timestamp", timestamp}};
  }
  static HistoryRecord from_json(const nlohmann::json& j) {
    return {{j.at("scene").get<std::size_t>(), j.at("line").get<std::size_t>()},
            j.at("input_line").get<std::string>(),
            j.at("attribute"),
            j.at("params"),
            j.at("text").get<std::string>(),
            j.at("candidate").get<std::size_t>(),
            j.at("timestamp").get<std::string>()};
  }
};

struct Session {
  std::string id;
  std::string script_id;
  Cursor cursor;
  std::vector<HistoryRecord> history;
  std::string checkpoint_id;
  steering::SteeringParams params;
  std::optional<AttributeSpec> attribute;
  std::size_t num_candidates = 4;
  nlohmann::json pending = nlohmann::json::array();  // candidates of the latest generate

  nlohmann::json to_json() const {
    auto hist = nlohmann::json::array();
    for (const auto& h : history) hist.push_back(h.to_json());
    return {{"id", id},
            {"script_id", script_id},
            {"cursor", {{"scene", cursor.scene}, {"line", cursor.line}}},
            {"history", std::move(hist)},
            {"checkpoint_id", checkpoint_id},
            {"params", params},
            {"attribute", attribute ? service::to_json(*attribute) : nlohmann::json(nullptr)},
            {"num_candidates", num_candidates},
            {"pending", pending}};
  }
  static Session from_json(const nlohmann::json& j) {
    Session s;
    s.id = j.at("id").get<std::string>();
    s.script_id = j.at("script_id").get<std::string>();
    s.cursor = {j.at("cursor").at("scene").get<std::size_t>(), j.at("cursor").at("line").get<std::size_t>()};
    for (const auto& h : j.at("history")) s.history.push_back(HistoryRecord::from_json(h));
    s.checkpoint_id = j.value("checkpoint_id", "");
    s.params = j.at("params").get<steering::SteeringParams>();
    if (!j.at("attribute").is_null()) s.attribute = attribute_from_json(j.at("attribute"));
    s.num_candidates = j.value("num_candidates", std::size_t{4});
    s.pending = j.value("pending", nlohmann::json::array());
    return s;
  }
};

// Directory layout:
//   blobs/<source_hash>.txt   uploaded script text, addressed by content
//   scripts/<id>.json         parsed script plus version
//   sessions/<id>.json
// Records are cached in memory and written through. Each record has its own
// mutex; with(id, fn) runs fn under it.
class Store {
 public:
  explicit Store(fs::path dir) : dir_(std::move(dir)) {
    for (const char* sub : {"blobs", "scripts", "sessions"}) fs::create_directories(dir_ / sub);
    for (const auto& e : fs::directory_iterator(dir_ / "scripts")) {
      if (e.path().extension() != ".json") continue;
      auto rec = ScriptRecord::from_json(read_json(e.path()));
      bump(rec.script.id);
      auto entry = std::make_shared<Entry<ScriptRecord>>(rec);
      entry->source_hash = rec.script.source_hash;
      scripts_.emplace(rec.script.id, std::move(entry));
    }
    for (const auto& e : fs::directory_iterator(dir_ / "sessions")) {
      if (e.path().extension() != ".json") continue;
      auto s = Session::from_json(read_json(e.path()));
      bump(s.id);
      auto id = s.id;
      sessions_.emplace(std::move(id), std::make_shared<Entry<Session>>(std::move(s)));
    }
  }

  const fs::path& dir() const { return dir_; }

  // Parses and stores; ids are fresh even for repeated text. `duplicates`
  // receives earlier scripts with the same source hash.
  ScriptRecord add_script(const std::string& text, const corpus::ParseOptions& base,
                          std::vector<std::string>* duplicates = nullptr, corpus::ParseReport* report = nullptr) {
    auto opts = base;
    opts.id = next_id("script");
    auto script = corpus::parse_script(text, opts, report);
    const auto blob = dir_ / "blobs" / (script.source_hash + ".txt");
    if (!fs::exists(blob)) write_atomic(blob, text);
    ScriptRecord rec{std::move(script), 1, utc_timestamp()};
    write_atomic(script_path(rec.script.id), rec.to_json().dump());
    std::lock_guard lock(mu_);
    if (duplicates)
      for (const auto& [id, e] : scripts_)
        if (e->source_hash == rec.script.source_hash) duplicates->push_back(id);
    auto entry = std::make_shared<Entry<ScriptRecord>>(rec);
    entry->source_hash = rec.script.source_hash;
    scripts_.emplace(rec.script.id, std::move(entry));
    return rec;
  }

  template <class F>
  auto with_script(const std::string& id, F&& fn) {
    auto e = find(scripts_, id, "script");
    std::lock_guard lock(e->mu);
    return fn(e->value);
  }

  // Mutates under the script's lock and writes the record back.
  template <class F>
  void update_script(const std::string& id, F&& fn) {
    auto e = find(scripts_, id, "script");
    std::lock_guard lock(e->mu);
    auto copy = e->value;
    fn(copy);
    write_atomic(script_path(id), copy.to_json().dump());
    e->value = std::move(copy);
  }

  std::vector<nlohmann::json> script_summaries() {
    std::vector<std::shared_ptr<Entry<ScriptRecord>>> all;
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, e] : scripts_) all.push_back(e);
    }
    std::vector<nlohmann::json> out;
    for (const auto& e : all) {
      std::lock_guard lock(e->mu);
      out.push_back(e->value.summary());
    }
    return out;
  }

  Session add_session(Session s) {
    s.id = next_id("session");
    write_atomic(session_path(s.id), s.to_json().dump());
    std::lock_guard lock(mu_);
    sessions_.emplace(s.id, std::make_shared<Entry<Session>>(s));
    return s;
  }

  template <class F>
  auto with_session(const std::string& id, F&& fn) {
    auto e = find(sessions_, id, "session");
    std::lock_guard lock(e->mu);
    return fn(e->value);
  }

  // fn may throw; nothing is written then.
  template <class F>
  auto update_session(const std::string& id, F&& fn) {
    auto e = find(sessions_, id, "session");
    std::lock_guard lock(e->mu);
    auto copy = e->value;
    auto result = fn(copy);
    write_atomic(session_path(id), copy.to_json().dump());
    e->value = std::move(copy);
    return result;
  }

  std::vector<nlohmann::json> session_list() {
    std::vector<std::shared_ptr<Entry<Session>>> all;
    {
      std::lock_guard lock(mu_);
      for (const auto& [id, e] : sessions_) all.push_back(e);
    }
    std::vector<nlohmann::json> out;
    for (const auto& e : all) {
      std::lock_guard lock(e->mu);
      out.push_back(e->value.to_json());
    }
    return out;
  }

  std::size_t script_count() {
    std::lock_guard lock(mu_);
    return scripts_.size();
  }
  std::size_t session_count() {
    std::lock_guard lock(mu_);
    return sessions_.size();
  }

 private:
  template <class T>
  struct Entry {
    explicit Entry(T v) : value(std::move(v)) {}
    std::mutex mu;
    T value;
    std::string source_hash;
  };

  template <class T>
  std::shared_ptr<Entry<T>> find(std::map<std::string, std::shared_ptr<Entry<T>>>& m, const std::string& id,
                                 const char* what) {
    std::lock_guard lock(mu_);
    const auto it = m.find(id);
    if (it == m.end()) throw ApiError(404, "NotFound", std::string("unknown ") + what + " " + id);
    return it->second;
  }

  std::string next_id(const char* kind) {
    std::lock_guard lock(mu_);
    return std::string(kind) + "-" + std::to_string(++counter_);
  }

  void bump(const std::string& id) {
    const auto dash = id.rfind('-');
    if (dash == std::string::npos) return;
    try {
      counter_ = std::max<std::size_t>(counter_, std::stoul(id.substr(dash + 1)));
    } catch (const std::exception&) {
    }
  }

  fs::path script_path(const std::string& id) const { return dir_ / "scripts" / (id + ".json"); }
  fs::path session_path(const std::string& id) const { return dir_ / "sessions" / (id + ".json"); }

  static nlohmann::json read_json(const fs::path& p) {
    std::ifstream in(p);
    try {
      return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
      fail(Errc::MalformedRecord, p.string() + ": " + e.what());
    }
  }

  static void write_atomic(const fs::path& p, const std::string& data) {
    auto tmp = p;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(Errc::IoError, "cannot write " + tmp.string());
      out << data;
      if (!out) fail(Errc::IoError, "short write to " + tmp.string());
    }
    fs::rename(tmp, p);
  }

  fs::path dir_;
  std::mutex mu_;  // guards the maps and the counter
  std::size_t counter_ = 0;
  std::map<std::string, std::shared_ptr<Entry<ScriptRecord>>> scripts_;
  std::map<std::string, std::shared_ptr<Entry<Session>>> sessions_;
};

}  // namespace cuegen::service
