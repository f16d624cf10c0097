#pragma once

// File formats: long CSV (t,row,col,value), threshold CSV (t,value) and the
// flat binary format. All numbers are written with 17 significant digits.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tmfm/series.hpp"

namespace tmfm::io {

namespace fs = std::filesystem;

/// Shortest text for a double that parses back to the same value ("%.17g").
std::string format_double(double v);

/// Errors: IoError, SchemaError (index = line), DuplicateCell, MissingCell,
/// NonFiniteValue.
MatrixSeries read_matrix_csv(std::istream& in);
MatrixSeries read_matrix_csv(const fs::path& path);
void write_matrix_csv(std::ostream& out, const MatrixSeries& x);
void write_matrix_csv(const fs::path& path, const MatrixSeries& x);

/// "TMFMBIN1", then uint64 T, p1, p2 and T*p1*p2 little-endian doubles
/// ordered by (t, row, col) with col fastest.
inline constexpr char kBinaryMagic[8] = {'T', 'M', 'F', 'M', 'B', 'I', 'N', '1'};
MatrixSeries read_matrix_binary(const fs::path& path);
void write_matrix_binary(const fs::path& path, const MatrixSeries& x);

/// Binary when the file starts with the magic bytes, CSV otherwise.
MatrixSeries read_matrix_series(const fs::path& path);

ThresholdSeries read_threshold_csv(std::istream& in);
ThresholdSeries read_threshold_csv(const fs::path& path);
void write_threshold_csv(std::ostream& out, const ThresholdSeries& z);
void write_threshold_csv(const fs::path& path, const ThresholdSeries& z);

enum class Transform { None, Diff, LogDiff, Log2Diff };
Transform parse_transform(const std::string& name);
/// Number of leading observations a transform consumes.
int transform_lag(Transform t);

/// Applies the transform to every cell series. The threshold series loses the
/// same number of leading entries so both stay aligned on t.
/// Errors: NonFiniteValue (log of a non-positive value), InvalidArgument.
Dataset apply_transform(const Dataset& data, Transform t);

}  // namespace tmfm::io
