#pragma once

#include <stdexcept>
#include <string>

namespace rforge {

/// Error categories for every failure mode the library reports.
enum class Errc {
  DimMismatch,
  EmptyLesion,
  EmptyBand,
  AllSamplesEmpty,
  EmptyInput,
  NoValidSamples,
  NonMonotonicEpisode,
  BufferEmpty,
  KTooLarge,
  SchemaMismatch,
  CorruptState,
  ShrinkNotAllowed,
  UnregisteredModality,
  EmptyAvailable,
  HeadDivisibility,
  ShapeMismatch,
  IncompleteRow,
  SingleTask,
  LengthMismatch,
  Empty,
  BadMagic,
  BadDtype,
  TruncatedPayload,
  NdimOutOfRange,
  MissingField,
  DuplicateSampleId,
  UnknownModalityKey,
  IoFailure,
  InvariantViolation,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::EmptyLesion: return "EmptyLesion";
    case Errc::EmptyBand: return "EmptyBand";
    case Errc::AllSamplesEmpty: return "AllSamplesEmpty";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoValidSamples: return "NoValidSamples";
    case Errc::NonMonotonicEpisode: return "NonMonotonicEpisode";
    case Errc::BufferEmpty: return "BufferEmpty";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::CorruptState: return "CorruptState";
    case Errc::ShrinkNotAllowed: return "ShrinkNotAllowed";
    case Errc::UnregisteredModality: return "UnregisteredModality";
    case Errc::EmptyAvailable: return "EmptyAvailable";
    case Errc::HeadDivisibility: return "HeadDivisibility";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::IncompleteRow: return "IncompleteRow";
    case Errc::SingleTask: return "SingleTask";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::Empty: return "Empty";
    case Errc::BadMagic: return "BadMagic";
    case Errc::BadDtype: return "BadDtype";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::NdimOutOfRange: return "NdimOutOfRange";
    case Errc::MissingField: return "MissingField";
    case Errc::DuplicateSampleId: return "DuplicateSampleId";
    case Errc::UnknownModalityKey: return "UnknownModalityKey";
    case Errc::IoFailure: return "IoFailure";
    case Errc::InvariantViolation: return "InvariantViolation";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& msg) { throw Error(code, msg); }

}  // namespace rforge
