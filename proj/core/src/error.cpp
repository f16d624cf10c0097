#include "tmfm/error.hpp"

namespace tmfm {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateCell: return "DuplicateCell";
    case ErrorCode::MissingCell: return "MissingCell";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyRegime: return "EmptyRegime";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::DegenerateSpectrum: return "DegenerateSpectrum";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidQuantile: return "InvalidQuantile";
    case ErrorCode::LagTooLarge: return "LagTooLarge";
    case ErrorCode::KOutOfRange: return "KOutOfRange";
    case ErrorCode::AmbientDimMismatch: return "AmbientDimMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NonStationaryAR: return "NonStationaryAR";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::EmptySeries: return "EmptySeries";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NonFiniteValue:
    case ErrorCode::SchemaError:
    case ErrorCode::DuplicateCell:
    case ErrorCode::MissingCell:
    case ErrorCode::IoError:
    case ErrorCode::ShapeMismatch:
      return ErrorCategory::Input;
    case ErrorCode::EmptyRegime:
    case ErrorCode::EmptyGrid:
    case ErrorCode::NotSymmetric:
    case ErrorCode::NoConvergence:
    case ErrorCode::DegenerateSpectrum:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Config;
  }
}

Error::Error(ErrorCode code, const std::string& message, std::optional<long long> index)
    : std::runtime_error(message), code_(code), index_(index) {}

Error Error::with_stage(std::string stage) const {
  Error copy = *this;
  copy.stage_ = std::move(stage);
  return copy;
}

}  // namespace tmfm
