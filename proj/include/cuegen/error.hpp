#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cuegen {

// Every domain failure carries a stable name ("EmptyInput", "ContextOverflow", ...)
// that the CLI prints and the HTTP service returns in {"error": name}.
enum class Errc {
  EmptyInput,
  NoDialogueFound,
  NoUsablePages,
  TooFewScripts,
  InvalidSplitSpec,
  EmptyCorpus,
  ContextOverflow,
  DivergedLoss,
  InvalidConfig,
  BadCheckpoint,
  LabelOutOfRange,
  EmptyDataset,
  DimensionMismatch,
  EmptyBag,
  TooFewDocs,
  TopicOutOfRange,
  MalformedRecord,
  NonFiniteGradient,
  DegenerateDistribution,
  InvalidParams,
  BothEmpty,
  NoNgrams,
  EmptyReferences,
  InvariantViolation,
  IoError,
};

constexpr std::string_view errc_name(Errc e) {
  switch (e) {
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoDialogueFound: return "NoDialogueFound";
    case Errc::NoUsablePages: return "NoUsablePages";
    case Errc::TooFewScripts: return "TooFewScripts";
    case Errc::InvalidSplitSpec: return "InvalidSplitSpec";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::ContextOverflow: return "ContextOverflow";
    case Errc::DivergedLoss: return "DivergedLoss";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::BadCheckpoint: return "BadCheckpoint";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyBag: return "EmptyBag";
    case Errc::TooFewDocs: return "TooFewDocs";
    case Errc::TopicOutOfRange: return "TopicOutOfRange";
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::NonFiniteGradient: return "NonFiniteGradient";
    case Errc::DegenerateDistribution: return "DegenerateDistribution";
    case Errc::InvalidParams: return "InvalidParams";
    case Errc::BothEmpty: return "BothEmpty";
    case Errc::NoNgrams: return "NoNgrams";
    case Errc::EmptyReferences: return "EmptyReferences";
    case Errc::InvariantViolation: return "InvariantViolation";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  std::string_view name() const noexcept { return errc_name(code_); }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail) {
  throw Error(code, detail);
}

}  // namespace cuegen
