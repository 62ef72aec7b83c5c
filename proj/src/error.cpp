#include "hbd/error.hpp"

namespace hbd {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::TruncatedData: return "TruncatedData";
    case ErrorCode::ChannelOutOfRange: return "ChannelOutOfRange";
    case ErrorCode::TruncatedStream: return "TruncatedStream";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::NonMonotonicTime: return "NonMonotonicTime";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::SegmentTooShort: return "SegmentTooShort";
    case ErrorCode::TooFewSubjects: return "TooFewSubjects";
    case ErrorCode::CorruptCache: return "CorruptCache";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateBatch: return "DegenerateBatch";
    case ErrorCode::InvalidProbability: return "InvalidProbability";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MissingCache: return "MissingCache";
    case ErrorCode::MissingCheckpoint: return "MissingCheckpoint";
    case ErrorCode::NoReportsFound: return "NoReportsFound";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace hbd
