#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tmfm {

enum class ErrorCode {
  // data / input
  DimensionMismatch,
  NonFiniteValue,
  SchemaError,
  DuplicateCell,
  MissingCell,
  IoError,
  ShapeMismatch,
  // numerical
  EmptyRegime,
  EmptyGrid,
  NotSymmetric,
  NoConvergence,
  DegenerateSpectrum,
  // configuration / contract
  InvalidArgument,
  InvalidQuantile,
  LagTooLarge,
  KOutOfRange,
  AmbientDimMismatch,
  IndexOutOfRange,
  NonStationaryAR,
  NotPositiveDefinite,
  EmptySeries,
};

/// Coarse grouping used for process exit codes (2 = input, 3 = numerical, 4 = config).
enum class ErrorCategory { Input, Numerical, Config };

std::string_view to_string(ErrorCode code);
ErrorCategory category_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::optional<long long> index = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

  /// 1-based time index / line number the error refers to, when there is one.
  std::optional<long long> index() const noexcept { return index_; }

  /// Pipeline stage that raised the error ("factor_counts", "threshold", ...).
  const std::string& stage() const noexcept { return stage_; }
  Error with_stage(std::string stage) const;

 private:
  ErrorCode code_;
  std::optional<long long> index_;
  std::string stage_;
};

}  // namespace tmfm
