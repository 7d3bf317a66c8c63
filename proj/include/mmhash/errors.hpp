#pragma once

#include <stdexcept>
#include <string>

namespace mmhash {

/// Every failure condition the engine reports. Callers dispatch on the code;
/// the message carries context (file, field, index).
enum class Err {
  ConfigSyntax,
  ConfigInvalid,
  BadMagic,
  TruncatedFile,
  CorruptFile,
  NonFiniteValue,
  EmptyLabelRow,
  OverlapQueryRetrieval,
  IdOutOfRange,
  DimMismatch,
  ShapeMismatch,
  WidthMismatch,
  DuplicateId,
  NonIntegralWindow,
  TrainTooSmall,
  RelevantCountMismatch,
  ZeroQueries,
  NumericFailure,
  IoFailure,
};

inline const char* err_name(Err e) {
  switch (e) {
    case Err::ConfigSyntax: return "ConfigSyntax";
    case Err::ConfigInvalid: return "ConfigInvalid";
    case Err::BadMagic: return "BadMagic";
    case Err::TruncatedFile: return "TruncatedFile";
    case Err::CorruptFile: return "CorruptFile";
    case Err::NonFiniteValue: return "NonFiniteValue";
    case Err::EmptyLabelRow: return "EmptyLabelRow";
    case Err::OverlapQueryRetrieval: return "OverlapQueryRetrieval";
    case Err::IdOutOfRange: return "IdOutOfRange";
    case Err::DimMismatch: return "DimMismatch";
    case Err::ShapeMismatch: return "ShapeMismatch";
    case Err::WidthMismatch: return "WidthMismatch";
    case Err::DuplicateId: return "DuplicateId";
    case Err::NonIntegralWindow: return "NonIntegralWindow";
    case Err::TrainTooSmall: return "TrainTooSmall";
    case Err::RelevantCountMismatch: return "RelevantCountMismatch";
    case Err::ZeroQueries: return "ZeroQueries";
    case Err::NumericFailure: return "NumericFailure";
    case Err::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Err code, const std::string& what)
      : std::runtime_error(std::string(err_name(code)) + ": " + what), code_(code) {}

  Err code() const noexcept { return code_; }

 private:
  Err code_;
};

[[noreturn]] inline void raise(Err code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace mmhash
