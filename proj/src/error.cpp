#include "riframe/error.hpp"

namespace riframe {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NotRotation: return "NotRotation";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::KTooLarge: return "KTooLarge";
    case ErrorCode::BadSpec: return "BadSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MagicMismatch: return "MagicMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::DegenerateNeighborhood: return "DegenerateNeighborhood";
    case ErrorCode::ZeroWeightSum: return "ZeroWeightSum";
    case ErrorCode::BarycenterCoincides: return "BarycenterCoincides";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonScalarLoss: return "NonScalarLoss";
    case ErrorCode::TapeConsumed: return "TapeConsumed";
    case ErrorCode::OddDimension: return "OddDimension";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::DatasetMissing: return "DatasetMissing";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::VerificationFailed: return "VerificationFailed";
  }
  return "Unknown";
}

}  // namespace riframe
