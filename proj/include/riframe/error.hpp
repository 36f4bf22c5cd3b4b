#pragma once

#include <stdexcept>
#include <string>

namespace riframe {

enum class ErrorCode {
  NonSymmetric,
  NonFinite,
  NotRotation,
  TooFewPoints,
  KTooLarge,
  BadSpec,
  ParseError,
  MagicMismatch,
  TruncatedFile,
  IoError,
  DegenerateNeighborhood,
  ZeroWeightSum,
  BarycenterCoincides,
  DegenerateCloud,
  ShapeMismatch,
  NonScalarLoss,
  TapeConsumed,
  OddDimension,
  CheckpointMismatch,
  DatasetMissing,
  NonFiniteLoss,
  ConfigError,
  VerificationFailed,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace riframe
