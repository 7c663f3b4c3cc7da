#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "cuegen/corpus/parse.hpp"
#include "cuegen/service/engine.hpp"
#include "cuegen/service/store.hpp"

namespace cuegen::service {

using nlohmann::json;

// Token-spaced model text back to prose: "( She sits . )" -> "(She sits.)".
inline std::string detokenize(std::string_view text) {
  static const std::set<std::string> no_space_before{".", ",", "!", "?", ";", ":", ")", "'", "…"};
  std::string out;
  bool glue = true;
  for (const auto& t : corpus::split_whitespace(text)) {
    if (!glue && !no_space_before.count(t)) out += ' ';
    out += t;
    glue = t == "(" || t == "'";
  }
  return out;
}

// Cue line text for an accepted candidate: parentheses stripped from the body
// and re-added around it, so the line parses back as exactly one cue.
inline std::string as_cue(std::string_view candidate) {
  std::string body;
  for (char c : candidate)
    if (c != '(' && c != ')') body += c;
  body = detokenize(body);
  if (body.empty()) fail(Errc::EmptyInput, "candidate has no text to insert");
  return "(" + body + ")";
}

inline int http_status(Errc e) {
  switch (e) {
    case Errc::EmptyInput:
    case Errc::NoDialogueFound:
    case Errc::NoUsablePages:
      return 422;
    case Errc::IoError:
    case Errc::InvariantViolation:
    case Errc::BadCheckpoint:
      return 500;
    default:
      return 400;
  }
}

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
};

class Service {
 public:
  Service(Store& store, std::shared_ptr<const Models> models) : store_(store), models_(std::move(models)) {}

  void install(httplib::Server& srv) {
    srv.Get("/v1/health", wrap([this](const httplib::Request&) { return reply(200, health()); }));
    srv.Get("/v1/attributes", wrap([this](const httplib::Request&) { return reply(200, models_->describe()); }));
    srv.Post("/v1/scripts", wrap([this](const httplib::Request& r) { return post_script(r); }));
    srv.Get("/v1/scripts", wrap([this](const httplib::Request&) {
              return reply(200, json{{"scripts", store_.script_summaries()}});
            }));
    srv.Get(R"(/v1/scripts/([^/]+))", wrap([this](const httplib::Request& r) { return get_script(r.matches[1]); }));
    srv.Get(R"(/v1/scripts/([^/]+)/export)", wrap([this](const httplib::Request& r) {
              const auto text = store_.with_script(r.matches[1], [](const ScriptRecord& rec) {
                return corpus::export_canonical(rec.script);
              });
              return Reply{200, text, "text/plain; charset=utf-8"};
            }));
    srv.Post("/v1/generate", wrap([this](const httplib::Request& r) { return reply(200, generate(parse_body(r))); }));
    srv.Post("/v1/sessions", wrap([this](const httplib::Request& r) { return reply(201, create_session(parse_body(r))); }));
    srv.Get("/v1/sessions", wrap([this](const httplib::Request&) {
              return reply(200, json{{"sessions", store_.session_list()}});
            }));
    srv.Get(R"(/v1/sessions/([^/]+))", wrap([this](const httplib::Request& r) {
              return reply(200, store_.with_session(r.matches[1], [](const Session& s) { return s.to_json(); }));
            }));
    srv.Post(R"(/v1/sessions/([^/]+)/accept)", wrap([this](const httplib::Request& r) {
               return reply(200, accept(r.matches[1], parse_body(r)));
             }));
  }

  json health() {
    return {{"status", "ok"},
            {"checkpoint", models_->has_checkpoint() ? json(models_->checkpoint_id) : json(nullptr)},
            {"scripts", store_.script_count()},
            {"sessions", store_.session_count()}};
  }

  // Body of POST /v1/generate. Prefix comes from exactly one of: "prefix"
  // text, "script_id" + "scene" + "line", or "session_id" (whose cursor may be
  // moved with "scene"/"line").
  json generate(const json& body) {
    static const std::set<std::string> known{"prefix", "script_id", "scene",  "line",
                                             "session_id", "attribute", "params", "num_candidates"};
    for (const auto& [k, v] : body.items())
      if (!known.count(k)) fail(Errc::InvalidParams, "unknown field " + k);
    const int sources = body.contains("prefix") + body.contains("script_id") + body.contains("session_id");
    if (sources != 1) fail(Errc::InvalidParams, "give exactly one of prefix, script_id, session_id");
    if (!models_->has_checkpoint()) throw ApiError(409, "NoCheckpoint", "no checkpoint is loaded");
    const auto& ck = *models_->checkpoint;

    if (body.contains("session_id")) {
      const auto sid = body["session_id"].get<std::string>();
      return store_.update_session(sid, [&](Session& s) {
        if (body.contains("attribute")) s.attribute = attribute_from_json(body["attribute"]);
        if (!s.attribute) fail(Errc::InvalidParams, "session has no attribute; pass one");
        if (body.contains("params")) steering::merge_params(s.params, body["params"]);
        if (body.contains("num_candidates")) s.num_candidates = candidate_count(body["num_candidates"]);
        Cursor cur = s.cursor;
        if (body.contains("scene")) cur.scene = index_field(body, "scene");
        if (body.contains("line")) cur.line = index_field(body, "line");
        const auto scene = scene_at(s.script_id, cur);
        s.cursor = cur;
        auto g = generate_candidates(*models_, scene_prefix(ck.vocab, scene, cur.line), *s.attribute, s.params,
                                     s.num_candidates);
        auto out = to_json(g);
        s.pending = out["candidates"];
        s.checkpoint_id = models_->checkpoint_id;
        out["session_id"] = s.id;
        out["cursor"] = {{"scene", cur.scene}, {"line", cur.line}};
        return out;
      });
    }

    if (!body.contains("attribute")) fail(Errc::InvalidParams, "attribute is required");
    const auto attr = attribute_from_json(body["attribute"]);
    steering::SteeringParams params;
    if (body.contains("params")) steering::merge_params(params, body["params"]);
    const std::size_t n = body.contains("num_candidates") ? candidate_count(body["num_candidates"]) : 4;
    std::vector<TokenId> prefix;
    if (body.contains("prefix")) {
      if (!body["prefix"].is_string()) fail(Errc::InvalidParams, "prefix must be a string");
      prefix = text_prefix(ck.vocab, body["prefix"].get<std::string>());
    } else {
      const Cursor cur{index_field(body, "scene"), index_field(body, "line")};
      prefix = scene_prefix(ck.vocab, scene_at(body["script_id"].get<std::string>(), cur), cur.line);
    }
    return to_json(generate_candidates(*models_, std::move(prefix), attr, params, n));
  }

  json create_session(const json& body) {
    if (!body.contains("script_id") || !body["script_id"].is_string())
      fail(Errc::InvalidParams, "script_id is required");
    Session s;
    s.script_id = body["script_id"].get<std::string>();
    if (body.contains("cursor")) {
      s.cursor = {index_field(body["cursor"], "scene"), index_field(body["cursor"], "line")};
    }
    if (body.contains("attribute")) s.attribute = attribute_from_json(body["attribute"]);
    if (body.contains("params")) steering::merge_params(s.params, body["params"]);
    if (body.contains("num_candidates")) s.num_candidates = candidate_count(body["num_candidates"]);
    scene_at(s.script_id, s.cursor);
    s.checkpoint_id = models_->checkpoint_id;
    return store_.add_session(std::move(s)).to_json();
  }

  // Inserts pending candidate `index` as a cue after the cursor line.
  json accept(const std::string& session_id, const json& body) {
    const std::size_t index = body.contains("index") ? index_field(body, "index") : 0;
    return store_.update_session(session_id, [&](Session& s) {
      if (s.pending.empty()) throw ApiError(409, "NoPendingCandidates", "generate before accepting");
      if (index >= s.pending.size())
        fail(Errc::InvalidParams, "candidate index " + std::to_string(index) + " of " + std::to_string(s.pending.size()));
      const auto text = as_cue(s.pending[index].at("text").get<std::string>());
      json summary;
      std::string input_line;
      store_.update_script(s.script_id, [&](ScriptRecord& rec) {
        if (s.cursor.scene >= rec.script.scenes.size()) fail(Errc::InvalidParams, "cursor scene no longer exists");
        auto& lines = rec.script.scenes[s.cursor.scene].lines;
        if (s.cursor.line >= lines.size()) fail(Errc::InvalidParams, "cursor line no longer exists");
        input_line = corpus::render_line(lines[s.cursor.line]);
        corpus::Line cue;
        cue.kind = corpus::LineKind::Cue;
        cue.text = text;
        lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(s.cursor.line + 1), std::move(cue));
        for (std::size_t i = 0; i < lines.size(); ++i) lines[i].index = i;
        ++rec.version;
        summary = rec.summary();
      });
      HistoryRecord h;
      h.input = s.cursor;
      h.input_line = input_line;
      h.attribute = s.attribute ? service::to_json(*s.attribute) : json(nullptr);
      h.params = s.params;
      h.text = text;
      h.candidate = index;
      h.timestamp = utc_timestamp();
      s.history.push_back(std::move(h));
      s.pending = json::array();
      s.cursor.line += 1;  // onto the inserted cue
      return json{{"session", s.to_json()},
                  {"script", summary},
                  {"inserted", {{"scene", s.cursor.scene}, {"line", s.cursor.line}, {"text", text}}}};
    });
  }

 private:
  struct Reply {
    int status;
    std::string body;
    std::string type = "application/json";
  };

  static Reply reply(int status, const json& j) { return {status, j.dump()}; }

  static Reply error_reply(int status, std::string_view name, const std::string& detail) {
    return reply(status, json{{"error", name}, {"detail", detail}});
  }

  template <class F>
  httplib::Server::Handler wrap(F fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      Reply r;
      try {
        r = fn(req);
      } catch (const ApiError& e) {
        r = error_reply(e.status, e.name, e.what());
      } catch (const Error& e) {
        r = error_reply(http_status(e.code()), e.name(), e.detail());
      } catch (const json::exception& e) {
        r = error_reply(400, "InvalidParams", e.what());
      } catch (const std::exception& e) {
        r = error_reply(500, "Internal", e.what());
      }
      res.status = r.status;
      res.set_content(r.body, r.type);
    };
  }

  static json parse_body(const httplib::Request& r) {
    if (r.body.empty()) return json::object();
    json j;
    try {
      j = json::parse(r.body);
    } catch (const json::parse_error& e) {
      fail(Errc::InvalidParams, std::string("body is not JSON: ") + e.what());
    }
    if (!j.is_object()) fail(Errc::InvalidParams, "body must be a JSON object");
    return j;
  }

  static std::size_t index_field(const json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_number_integer() || j[key].get<long long>() < 0)
      fail(Errc::InvalidParams, std::string(key) + " must be a non-negative integer");
    return j[key].get<std::size_t>();
  }

  static std::size_t candidate_count(const json& v) {
    if (!v.is_number_integer() || v.get<long long>() < 1 || v.get<long long>() > static_cast<long long>(kMaxCandidates))
      fail(Errc::InvalidParams, "num_candidates must lie in [1, " + std::to_string(kMaxCandidates) + "]");
    return v.get<std::size_t>();
  }

  corpus::Scene scene_at(const std::string& script_id, const Cursor& c) {
    return store_.with_script(script_id, [&](const ScriptRecord& rec) {
      if (c.scene >= rec.script.scenes.size()) fail(Errc::InvalidParams, "scene " + std::to_string(c.scene) + " out of range");
      const auto& sc = rec.script.scenes[c.scene];
      if (c.line >= sc.lines.size()) fail(Errc::InvalidParams, "line " + std::to_string(c.line) + " out of range");
      return sc;
    });
  }

  Reply post_script(const httplib::Request& r) {
    std::string text = r.body;
    corpus::ParseOptions opts;
    if (r.get_header_value("Content-Type").starts_with("application/json")) {
      const auto j = parse_body(r);
      if (!j.contains("text") || !j["text"].is_string()) fail(Errc::InvalidParams, "text is required");
      text = j["text"].get<std::string>();
      opts.title = j.value("title", "");
    }
    std::vector<std::string> dups;
    corpus::ParseReport report;
    const auto rec = store_.add_script(text, opts, &dups, &report);
    auto out = rec.summary();
    out["report"] = {{"pages", report.pages},
                     {"dropped_pages", report.dropped_pages},
                     {"dropped_lines", report.dropped_lines},
                     {"skipped_segments", report.skipped_segments},
                     {"front_matter_lines", report.front_matter_lines}};
    if (!dups.empty()) {
      out["duplicate_of"] = dups;
      out["warning"] = "identical text was uploaded before";
    }
    return reply(201, out);
  }

  Reply get_script(const std::string& id) {
    return reply(200, store_.with_script(id, [](const ScriptRecord& rec) {
      auto j = rec.summary();
      j["created"] = rec.created;
      j["script"] = corpus::to_json(rec.script);
      return j;
    }));
  }

  Store& store_;
  std::shared_ptr<const Models> models_;
};

// Owns the HTTP server; start() binds (port 0 picks a free one) and serves on
// a background thread.
class Server {
 public:
  Server(Store& store, std::shared_ptr<const Models> models) : service_(store, std::move(models)) {
    service_.install(http_);
  }
  ~Server() { stop(); }

  int start(const ServerOptions& opts) {
    port_ = opts.port == 0 ? http_.bind_to_any_port(opts.host) : (http_.bind_to_port(opts.host, opts.port) ? opts.port : -1);
    if (port_ < 0) fail(Errc::IoError, "cannot bind " + opts.host + ":" + std::to_string(opts.port));
    thread_ = std::thread([this] { http_.listen_after_bind(); });
    http_.wait_until_ready();
    return port_;
  }

  // Serves on the calling thread until stop().
  void run(const ServerOptions& opts) {
    if (!http_.listen(opts.host, opts.port)) fail(Errc::IoError, "cannot listen on " + opts.host + ":" + std::to_string(opts.port));
  }

  void stop() {
    http_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }
  Service& service() { return service_; }

 private:
  httplib::Server http_;
  Service service_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace cuegen::service
