#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cuegen/corpus/parse.hpp"
#include "cuegen/corpus/script.hpp"

// Deterministic two-style toy plays: plain spoken lines and parenthesized
// stage directions drawn from mostly disjoint word pools.
namespace cuegen::corpus::synthetic {

struct SynthOptions {
  std::size_t scripts = 12;
  std::size_t scenes_per_script = 8;
  std::size_t min_lines = 6;
  std::size_t max_lines = 12;
  // Scenes are either action-heavy or talk-heavy, so whether a cue comes next
  // depends on what the scene has looked like so far.
  double busy_cue_rate = 0.6;
  double quiet_cue_rate = 0.08;
  std::uint64_t seed = 0;
};

namespace pools {

inline constexpr std::array<std::string_view, 12> kNames = {"ANNA", "BEN",  "CAL",  "DORA", "EDGAR", "FAY",
                                                             "GUS",  "HELEN", "IVAN", "JUNE", "KIT",  "LOU"};
inline constexpr std::array<std::string_view, 6> kPronouns = {"She", "He", "They", "Everyone", "Nobody", "The stranger"};

inline constexpr std::array<std::string_view, 16> kCueVerbs = {
    "crosses to", "turns toward", "stares at", "walks to", "points at", "kneels beside",
    "leans on",   "backs away from", "moves behind", "glances at", "circles", "paces along",
    "sits by",    "stands near",  "reaches for", "pulls back"};
inline constexpr std::array<std::string_view, 14> kCuePlaces = {
    "the window", "the door", "the table", "the bed", "the stage left exit", "the fireplace", "the sheet",
    "the curtain", "the chair", "the staircase", "the piano", "the lamp", "the desk", "the stage right door"};
inline constexpr std::array<std::string_view, 8> kCueManner = {"slowly", "quietly", "abruptly", "in silence",
                                                               "without looking", "nervously", "at last", "again"};
inline constexpr std::array<std::string_view, 10> kCueStandalone = {
    "Pause.", "Silence.", "Lights fade.", "A long pause.", "Blackout.", "Thunder outside.", "Music rises.",
    "The phone rings.", "Lights up.", "A door slams offstage."};
inline constexpr std::array<std::string_view, 8> kCueIntrans = {"sits down", "stands up", "laughs", "weeps",
                                                                "exits", "enters", "sighs", "freezes"};

inline constexpr std::array<std::string_view, 10> kSubjects = {"I", "You", "We", "My mother", "Your father",
                                                               "My brother", "Nobody", "Everybody", "Our family",
                                                               "That man"};
inline constexpr std::array<std::string_view, 14> kVerbs = {"want", "need", "remember", "hate", "love", "forgot",
                                                            "found", "lost", "sold", "promised", "believe",
                                                            "understand", "know", "miss"};
inline constexpr std::array<std::string_view, 16> kObjects = {
    "the money",  "the house",   "your letter", "this town", "the truth",  "my job",     "the car",  "our dinner",
    "that story", "the promise", "her name",    "the wedding", "my keys", "the garden", "tomorrow", "everything"};
inline constexpr std::array<std::string_view, 12> kShort = {
    "Yes.", "No.", "I don't know.", "Why?", "What do you mean?", "Fine.", "Of course.", "Never.",
    "Listen to me.", "It's not fair.", "Please don't.", "Tell me."};
inline constexpr std::array<std::string_view, 8> kTails = {"", "", "", " tonight", " again", " anymore",
                                                           " for years", " already"};
inline constexpr std::array<std::string_view, 4> kEnds = {".", ".", "?", "!"};

}  // namespace pools

template <std::size_t N>
std::string_view pick(const std::array<std::string_view, N>& pool, std::mt19937_64& rng) {
  return pool[rng() % N];
}

inline std::string dialogue_text(std::mt19937_64& rng) {
  using namespace pools;
  if (rng() % 4 == 0) return std::string(pick(kShort, rng));
  std::string s = std::string(pick(kSubjects, rng)) + " " + std::string(pick(kVerbs, rng)) + " " +
                  std::string(pick(kObjects, rng)) + std::string(pick(kTails, rng)) + std::string(pick(kEnds, rng));
  if (rng() % 3 == 0) s += " " + std::string(pick(kShort, rng));
  return s;
}

inline std::string cue_text(std::mt19937_64& rng, std::string_view who) {
  using namespace pools;
  std::string body;
  switch (rng() % 4) {
    case 0:
      body = std::string(pick(kCueStandalone, rng));
      break;
    case 1:
      body = std::string(who) + " " + std::string(pick(kCueIntrans, rng)) + " " + std::string(pick(kCueManner, rng)) + ".";
      break;
    case 2:
      body = std::string(pick(kPronouns, rng)) + " " + std::string(pick(kCueVerbs, rng)) + " " +
             std::string(pick(kCuePlaces, rng)) + ".";
      break;
    default:
      body = std::string(who) + " " + std::string(pick(kCueVerbs, rng)) + " " + std::string(pick(kCuePlaces, rng)) +
             " " + std::string(pick(kCueManner, rng)) + ".";
      break;
  }
  return "(" + body + ")";
}

// One play as raw script text. Each scene sits on its own form-feed page and
// always contains at least one spoken line and one cue.
inline std::string script_text(std::size_t n, const SynthOptions& opts, std::mt19937_64& rng) {
  using namespace pools;
  std::string out = "SYNTHETIC PLAY " + std::to_string(n + 1) + "\n\n";
  const std::size_t span = opts.max_lines >= opts.min_lines ? opts.max_lines - opts.min_lines + 1 : 1;
  for (std::size_t sc = 0; sc < opts.scenes_per_script; ++sc) {
    if (sc > 0) out += "\f";
    out += "SCENE " + std::to_string(sc + 1) + "\n";
    const std::size_t lines = std::max<std::size_t>(2, opts.min_lines + rng() % span);
    const std::size_t forced_cue = 1 + rng() % (lines - 1);
    const double cue_rate = rng() % 2 == 0 ? opts.busy_cue_rate : opts.quiet_cue_rate;
    std::string_view last_speaker = pick(kNames, rng);
    for (std::size_t i = 0; i < lines; ++i) {
      const bool cue = i == forced_cue || (i > 0 && static_cast<double>(rng() >> 11) * 0x1.0p-53 < cue_rate);
      if (cue) {
        out += cue_text(rng, last_speaker) + "\n";
      } else {
        last_speaker = pick(kNames, rng);
        out += std::string(last_speaker) + ". " + dialogue_text(rng) + "\n";
      }
    }
  }
  return out;
}

inline std::vector<std::string> generate_texts(const SynthOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  std::vector<std::string> texts;
  for (std::size_t n = 0; n < opts.scripts; ++n) texts.push_back(script_text(n, opts, rng));
  return texts;
}

inline std::vector<Script> generate(const SynthOptions& opts) {
  std::vector<Script> out;
  const auto texts = generate_texts(opts);
  for (std::size_t n = 0; n < texts.size(); ++n) {
    ParseOptions po;
    po.id = "synth-" + std::to_string(n + 1);
    out.push_back(parse_script(texts[n], po));
  }
  return out;
}

}  // namespace cuegen::corpus::synthetic
