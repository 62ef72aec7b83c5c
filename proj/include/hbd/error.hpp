#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hbd {

enum class ErrorCode {
  // ingestion
  MalformedHeader,
  UnsupportedFormat,
  TruncatedData,
  ChannelOutOfRange,
  TruncatedStream,
  NegativeTime,
  SchemaMismatch,
  NonMonotonicTime,
  MalformedManifest,
  // dataset
  SegmentTooShort,
  TooFewSubjects,
  CorruptCache,
  // network / optimizer
  ShapeMismatch,
  DegenerateBatch,
  InvalidProbability,
  EmptyBatch,
  NonFiniteGradient,
  // trainer
  EmptyDataset,
  IncompatibleCheckpoint,
  CorruptCheckpoint,
  VersionMismatch,
  NonFiniteLoss,
  // evaluator
  LengthMismatch,
  EmptyInput,
  // runner
  MissingCache,
  MissingCheckpoint,
  NoReportsFound,
  InvalidConfig,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hbd
