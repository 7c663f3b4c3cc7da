#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cuegen/corpus/script.hpp"
#include "cuegen/error.hpp"

namespace cuegen::corpus {

struct ParseOptions {
  std::string id;     // empty: derived from the content digest
  std::string title;  // empty: first front-matter line, else the id
  std::size_t page_lines = 40;
};

struct ParseReport {
  std::size_t physical_lines = 0;
  std::size_t pages = 0;
  std::size_t dropped_pages = 0;
  std::size_t dropped_lines = 0;     // lines lost with dropped pages
  std::size_t skipped_segments = 0;  // orphan text and unterminated cues
  std::size_t front_matter_lines = 0;
};

namespace detail {

inline bool is_blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline std::size_t skip_ws(std::string_view s, std::size_t i) {
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return i;
}

// /^(ACT|SCENE)\b/i after leading whitespace.
inline bool is_scene_marker(std::string_view line) {
  std::size_t i = skip_ws(line, 0);
  for (std::string_view word : {std::string_view("act"), std::string_view("scene")}) {
    if (line.size() - i < word.size()) continue;
    bool match = true;
    for (std::size_t k = 0; k < word.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(line[i + k])) != word[k]) {
        match = false;
        break;
      }
    }
    if (!match) continue;
    const std::size_t after = i + word.size();
    if (after == line.size()) return true;
    const auto c = static_cast<unsigned char>(line[after]);
    if (!(std::isalnum(c) || c == '_')) return true;
  }
  return false;
}

struct SpeakerMatch {
  std::string name;
  std::size_t name_begin = 0;  // offset within the physical line
  std::size_t body_begin = 0;  // first byte after the delimiter
};

// One to four uppercase tokens ([A-Z'.-], at least one letter) followed by
// ':' or '.', then whitespace or end of line. Longest name wins.
inline std::optional<SpeakerMatch> match_speaker(std::string_view line) {
  const std::size_t start = skip_ws(line, 0);
  struct Tok {
    std::size_t b, e;
  };
  std::vector<Tok> toks;
  std::size_t i = start;
  while (toks.size() < 4 && i < line.size()) {
    std::size_t j = i;
    bool letter = false;
    while (j < line.size()) {
      const char c = line[j];
      if (c >= 'A' && c <= 'Z') {
        letter = true;
      } else if (!(c == '\'' || c == '.' || c == '-')) {
        break;
      }
      ++j;
    }
    if (j == i || !letter || !(line[i] >= 'A' && line[i] <= 'Z')) break;
    const bool at_end = j == line.size();
    const char next = at_end ? ' ' : line[j];
    if (!(next == ' ' || next == '\t' || next == ':')) break;
    toks.push_back({i, j});
    if (next == ':') break;
    i = skip_ws(line, j);
  }
  auto ws_or_end = [&](std::size_t pos) {
    return pos >= line.size() || line[pos] == ' ' || line[pos] == '\t';
  };
  for (std::size_t count = toks.size(); count >= 1; --count) {
    const std::size_t name_end = toks[count - 1].e;
    std::string_view name = line.substr(start, name_end - start);
    std::size_t letters = 0;
    for (char c : name) letters += (c >= 'A' && c <= 'Z');
    if (letters < 2) continue;
    if (name_end < line.size() && (line[name_end] == ':' || line[name_end] == '.') &&
        ws_or_end(name_end + 1)) {
      return SpeakerMatch{std::string(name), start, name_end + 1};
    }
    if (name.back() == '.' && ws_or_end(name_end)) {
      name.remove_suffix(1);
      std::size_t l2 = 0;
      for (char c : name) l2 += (c >= 'A' && c <= 'Z');
      if (l2 >= 2) return SpeakerMatch{std::string(name), start, name_end};
    }
  }
  return std::nullopt;
}

struct Pending {
  LineKind kind;
  std::optional<std::string> speaker;
  std::string text;
  ByteSpan span;
  std::size_t scene;
  std::size_t page;
};

class Builder {
 public:
  std::vector<Pending> out;
  std::size_t skipped = 0;
  std::size_t scene = 0;

  void close_context() {
    flush_dialogue();
    speaker_.reset();
  }

  void start_speaker(std::string name, std::size_t name_begin, std::size_t page) {
    close_context();
    speaker_ = std::move(name);
    seg_begin_ = name_begin;
    seg_page_ = page;
    seg_has_name_ = true;
  }

  bool in_cue() const { return cue_depth_ > 0; }

  // Feeds one physical line's body (from `from` to end) at absolute offset `base`.
  void feed(std::string_view line, std::size_t from, std::size_t base, std::size_t page) {
    std::size_t piece_begin = from;
    for (std::size_t i = from; i < line.size(); ++i) {
      const char c = line[i];
      if (cue_depth_ > 0) {
        if (c == '(') ++cue_depth_;
        if (c == ')' && --cue_depth_ == 0) {
          append_cue_piece(line.substr(piece_begin, i + 1 - piece_begin));
          out.push_back({LineKind::Cue, cue_speaker_, cue_text_, {cue_begin_, base + i + 1},
                         scene, cue_page_});
          cue_text_.clear();
          piece_begin = i + 1;
        }
        continue;
      }
      if (c == '(') {
        take_dialogue_piece(line, piece_begin, i, base, page);
        flush_dialogue();
        cue_depth_ = 1;
        cue_begin_ = base + i;
        cue_page_ = page;
        cue_speaker_ = from_inline_ ? speaker_ : std::nullopt;
        cue_text_.clear();
        piece_begin = i;
      }
    }
    if (cue_depth_ > 0) {
      append_cue_piece(line.substr(piece_begin));
    } else {
      take_dialogue_piece(line, piece_begin, line.size(), base, page);
    }
  }

  // Standalone lines (starting with '(') never carry a speaker; inline cues
  // inherit the open speaker.
  void set_inline(bool v) { from_inline_ = v; }

  void abort_cue() {
    if (cue_depth_ > 0) {
      ++skipped;
      cue_depth_ = 0;
      cue_text_.clear();
    }
  }

  void finish() {
    abort_cue();
    close_context();
  }

 private:
  void append_cue_piece(std::string_view piece) {
    std::size_t b = 0, e = piece.size();
    while (b < e && std::isspace(static_cast<unsigned char>(piece[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(piece[e - 1]))) --e;
    if (b == e) return;
    if (!cue_text_.empty()) cue_text_ += ' ';
    cue_text_.append(piece.substr(b, e - b));
  }

  void take_dialogue_piece(std::string_view line, std::size_t b, std::size_t e,
                           std::size_t base, std::size_t page) {
    while (b < e && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1]))) --e;
    if (b == e) return;
    if (!speaker_) {
      ++skipped;
      return;
    }
    if (seg_text_.empty() && !seg_has_name_) {
      seg_begin_ = base + b;
      seg_page_ = page;
    }
    if (!seg_text_.empty()) seg_text_ += ' ';
    seg_text_.append(line.substr(b, e - b));
    seg_end_ = base + e;
  }

  void flush_dialogue() {
    if (!seg_text_.empty()) {
      out.push_back({LineKind::Dialogue, speaker_, seg_text_, {seg_begin_, seg_end_}, scene,
                     seg_page_});
    }
    seg_text_.clear();
    seg_has_name_ = false;
  }

  std::optional<std::string> speaker_;
  std::string seg_text_;
  std::size_t seg_begin_ = 0, seg_end_ = 0, seg_page_ = 0;
  bool seg_has_name_ = false;
  bool from_inline_ = false;

  int cue_depth_ = 0;
  std::string cue_text_;
  std::optional<std::string> cue_speaker_;
  std::size_t cue_begin_ = 0, cue_page_ = 0;
};

}  // namespace detail

// Parses plain-text play script into scenes of dialogue and cue lines.
//
// Layout rules: "NAME:" / "NAME." opens a speech, "(...)" is a cue (possibly
// spanning physical lines, possibly inline inside a speech), plain lines continue
// the open speech, blank lines close it, lines starting with ACT/SCENE open a
// new scene and everything before the first such marker is front matter.
// Pages are split at form feeds, or every `page_lines` lines when the input has
// none; pages without at least one dialogue line and one cue are dropped.
inline Script parse_script(std::string_view raw, const ParseOptions& opts = {},
                           ParseReport* report = nullptr) {
  if (detail::is_blank(raw)) fail(Errc::EmptyInput, "script text is empty");

  struct Phys {
    std::string_view text;
    std::size_t base;
    std::size_t page;
  };
  std::vector<Phys> phys;
  const bool has_ff = raw.find('\f') != std::string_view::npos;
  {
    std::size_t page = 0, begin = 0;
    for (std::size_t i = 0; i <= raw.size(); ++i) {
      if (i == raw.size() || raw[i] == '\n' || raw[i] == '\f') {
        std::string_view t = raw.substr(begin, i - begin);
        if (!t.empty() && t.back() == '\r') t.remove_suffix(1);
        const std::size_t pg = has_ff ? page : phys.size() / std::max<std::size_t>(1, opts.page_lines);
        phys.push_back({t, begin, pg});
        if (i < raw.size() && raw[i] == '\f') ++page;
        begin = i + 1;
      }
    }
  }

  std::size_t first_marker = phys.size();
  for (std::size_t i = 0; i < phys.size(); ++i) {
    if (detail::is_scene_marker(phys[i].text)) {
      first_marker = i;
      break;
    }
  }
  const bool has_markers = first_marker < phys.size();

  std::string title = opts.title;
  if (title.empty() && has_markers) {
    for (std::size_t i = 0; i < first_marker; ++i) {
      if (!detail::is_blank(phys[i].text)) {
        auto t = phys[i].text;
        const auto b = t.find_first_not_of(" \t");
        const auto e = t.find_last_not_of(" \t");
        title = std::string(t.substr(b, e - b + 1));
        break;
      }
    }
  }

  detail::Builder builder;
  std::size_t scene = 0;
  bool seen_marker = false;
  for (std::size_t i = has_markers ? first_marker : 0; i < phys.size(); ++i) {
    const auto& p = phys[i];
    if (builder.in_cue()) {
      if (detail::is_blank(p.text)) {
        builder.abort_cue();
        builder.close_context();
        continue;
      }
      builder.feed(p.text, 0, p.base, p.page);
      continue;
    }
    if (detail::is_blank(p.text)) {
      builder.close_context();
      continue;
    }
    if (detail::is_scene_marker(p.text)) {
      builder.close_context();
      if (seen_marker) ++scene;
      seen_marker = true;
      builder.scene = scene;
      continue;
    }
    if (auto m = detail::match_speaker(p.text)) {
      builder.start_speaker(m->name, p.base + m->name_begin, p.page);
      builder.set_inline(true);
      builder.feed(p.text, m->body_begin, p.base, p.page);
      continue;
    }
    const std::size_t first = detail::skip_ws(p.text, 0);
    builder.set_inline(p.text[first] != '(');
    builder.feed(p.text, first, p.base, p.page);
  }
  builder.finish();

  auto& lines = builder.out;
  if (std::none_of(lines.begin(), lines.end(),
                   [](const detail::Pending& l) { return l.kind == LineKind::Dialogue; }))
    fail(Errc::NoDialogueFound, "no dialogue lines in input");

  std::map<std::size_t, std::pair<bool, bool>> page_kinds;
  for (const auto& l : lines) {
    auto& pk = page_kinds[l.page];
    (l.kind == LineKind::Dialogue ? pk.first : pk.second) = true;
  }
  ParseReport rep;
  rep.physical_lines = phys.size();
  rep.pages = phys.empty() ? 0 : phys.back().page + 1;
  rep.skipped_segments = builder.skipped;
  rep.front_matter_lines = has_markers ? first_marker : 0;
  for (const auto& [pg, kinds] : page_kinds)
    if (!(kinds.first && kinds.second)) ++rep.dropped_pages;

  Script script;
  script.source_hash = content_digest(raw);
  script.id = opts.id.empty() ? "s" + script.source_hash.substr(0, 12) : opts.id;
  script.title = title.empty() ? script.id : title;
  std::optional<std::size_t> current_scene;
  for (auto& l : lines) {
    const auto& pk = page_kinds[l.page];
    if (!(pk.first && pk.second)) {
      ++rep.dropped_lines;
      continue;
    }
    if (!current_scene || *current_scene != l.scene) {
      script.scenes.push_back({script.scenes.size(), {}});
      current_scene = l.scene;
    }
    auto& sc = script.scenes.back();
    sc.lines.push_back({sc.lines.size(), l.kind, std::move(l.speaker), std::move(l.text), l.span});
  }
  if (report) *report = rep;
  if (script.scenes.empty())
    fail(Errc::NoUsablePages, "no page holds both a dialogue line and a cue");
  return script;
}

// Canonical text layout: title line, "SCENE n" markers, one "NAME: text" or
// "[NAME: ](cue)" per line, a single page terminated by a form feed.
// parse_script(export_canonical(s)) reproduces s line for line.
inline std::string export_canonical(const Script& s) {
  std::string out;
  out += s.title.empty() ? s.id : s.title;
  out += "\n\n";
  for (const auto& sc : s.scenes) {
    out += "SCENE " + std::to_string(sc.index + 1) + "\n";
    for (const auto& l : sc.lines) {
      if (l.speaker) out += *l.speaker + ": ";
      out += l.text;
      out += '\n';
    }
    out += '\n';
  }
  out += '\f';
  return out;
}

}  // namespace cuegen::corpus
