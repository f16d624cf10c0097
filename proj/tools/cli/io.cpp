#include "io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tmfm/error.hpp"

namespace tmfm::io {
namespace {

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.size() - start : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

long long parse_index(std::string_view field, const char* name, long long line) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || v < 1) {
    throw Error(ErrorCode::SchemaError,
                "line " + std::to_string(line) + ": " + name + " must be a positive integer, got '" +
                    std::string(field) + "'",
                line);
  }
  return v;
}

double parse_value(std::string_view field, long long line) {
  // strtod accepts nan/inf spellings, which we then reject as non-finite.
  const std::string text(field);
  char* end = nullptr;
  const double v = text.empty() ? 0.0 : std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": value '" + text + "' is not a number", line);
  }
  if (!std::isfinite(v)) {
    throw Error(ErrorCode::NonFiniteValue, "line " + std::to_string(line) + ": non-finite value", line);
  }
  return v;
}

void expect_header(std::istream& in, std::string_view expected, long long& line_no) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaError, "empty file, expected header " + std::string(expected), 1);
  ++line_no;
  std::string got;
  for (auto f : split(line)) {
    if (!got.empty()) got += ',';
    got += f;
  }
  if (!got.empty() && static_cast<unsigned char>(got[0]) == 0xEF) got.erase(0, 3);  // UTF-8 BOM
  if (got != expected) {
    throw Error(ErrorCode::SchemaError, "line 1: expected header '" + std::string(expected) + "', got '" + line + "'", 1);
  }
}

template <class T>
T byteswap_if_big(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  v = byteswap_if_big(v);
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const fs::path& path) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw Error(ErrorCode::SchemaError, path.string() + ": truncated binary file");
  }
  return byteswap_if_big(v);
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

MatrixSeries read_matrix_csv(std::istream& in) {
  long long line_no = 0;
  expect_header(in, "t,row,col,value", line_no);

  struct Cell {
    long long t, row, col;
    double value;
    long long line;
  };
  std::vector<Cell> cells;
  long long T = 0, p1 = 0, p2 = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::SchemaError,
                  "line " + std::to_string(line_no) + ": expected 4 fields, got " + std::to_string(f.size()), line_no);
    }
    Cell c{parse_index(f[0], "t", line_no), parse_index(f[1], "row", line_no), parse_index(f[2], "col", line_no),
           parse_value(f[3], line_no), line_no};
    T = std::max(T, c.t);
    p1 = std::max(p1, c.row);
    p2 = std::max(p2, c.col);
    cells.push_back(c);
  }
  if (cells.empty()) throw Error(ErrorCode::SchemaError, "no data rows", line_no);

  const long long n = p1 * p2;
  if (n * T != static_cast<long long>(cells.size()) && n * T > static_cast<long long>(cells.size()) * 64) {
    // Sparse index ranges would make the dense tensor absurdly large.
    throw Error(ErrorCode::MissingCell, "cell indices span " + std::to_string(T) + "x" + std::to_string(p1) + "x" +
                                            std::to_string(p2) + " but only " + std::to_string(cells.size()) +
                                            " cells are present");
  }
  Eigen::MatrixXd data(n, T);
  std::vector<long long> seen(static_cast<std::size_t>(n * T), 0);
  for (const auto& c : cells) {
    const long long k = (c.t - 1) * n + (c.col - 1) * p1 + (c.row - 1);
    auto& first = seen[static_cast<std::size_t>(k)];
    if (first) {
      throw Error(ErrorCode::DuplicateCell,
                  "line " + std::to_string(c.line) + ": cell (t=" + std::to_string(c.t) + ", row=" +
                      std::to_string(c.row) + ", col=" + std::to_string(c.col) + ") already given on line " +
                      std::to_string(first),
                  c.line);
    }
    first = c.line;
    data(static_cast<Index>((c.col - 1) * p1 + (c.row - 1)), static_cast<Index>(c.t - 1)) = c.value;
  }
  for (long long k = 0; k < n * T; ++k) {
    if (seen[static_cast<std::size_t>(k)]) continue;
    const long long t = k / n + 1, r = k % n % p1 + 1, c = k % n / p1 + 1;
    throw Error(ErrorCode::MissingCell, "cell (t=" + std::to_string(t) + ", row=" + std::to_string(r) +
                                            ", col=" + std::to_string(c) + ") is missing");
  }
  if (T < 2) throw Error(ErrorCode::SchemaError, "series needs at least 2 time points");
  return MatrixSeries(p1, p2, std::move(data));
}

MatrixSeries read_matrix_csv(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_matrix_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.index());
  }
}

void write_matrix_csv(std::ostream& out, const MatrixSeries& x) {
  out << "t,row,col,value\n";
  for (Index t = 0; t < x.length(); ++t) {
    const auto xt = x.at(t);
    for (Index r = 0; r < x.rows(); ++r) {
      for (Index c = 0; c < x.cols(); ++c) {
        out << t + 1 << ',' << r + 1 << ',' << c + 1 << ',' << format_double(xt(r, c)) << '\n';
      }
    }
  }
}

void write_matrix_csv(const fs::path& path, const MatrixSeries& x) {
  auto out = open_out(path);
  write_matrix_csv(out, x);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

MatrixSeries read_matrix_binary(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kBinaryMagic, 8) != 0) {
    throw Error(ErrorCode::SchemaError, path.string() + ": missing TMFMBIN1 magic");
  }
  const auto T = get<std::uint64_t>(in, path);
  const auto p1 = get<std::uint64_t>(in, path);
  const auto p2 = get<std::uint64_t>(in, path);
  if (T < 2 || p1 < 1 || p2 < 1 || T * p1 * p2 > (std::uint64_t{1} << 34)) {
    throw Error(ErrorCode::SchemaError, path.string() + ": implausible dimensions in header");
  }
  const auto P1 = static_cast<Index>(p1), P2 = static_cast<Index>(p2);
  Eigen::MatrixXd data(P1 * P2, static_cast<Index>(T));
  for (Index t = 0; t < static_cast<Index>(T); ++t) {
    for (Index r = 0; r < P1; ++r) {
      for (Index c = 0; c < P2; ++c) data(c * P1 + r, t) = get<double>(in, path);
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::SchemaError, path.string() + ": trailing bytes after the declared data");
  }
  return MatrixSeries(P1, P2, std::move(data));
}

void write_matrix_binary(const fs::path& path, const MatrixSeries& x) {
  auto out = open_out(path, std::ios::binary);
  out.write(kBinaryMagic, 8);
  put<std::uint64_t>(out, static_cast<std::uint64_t>(x.length()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(x.rows()));
  put<std::uint64_t>(out, static_cast<std::uint64_t>(x.cols()));
  for (Index t = 0; t < x.length(); ++t) {
    const auto xt = x.at(t);
    for (Index r = 0; r < x.rows(); ++r) {
      for (Index c = 0; c < x.cols(); ++c) put<double>(out, xt(r, c));
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

MatrixSeries read_matrix_series(const fs::path& path) {
  auto in = open_in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, 8);
  if (in.gcount() == 8 && std::memcmp(magic, kBinaryMagic, 8) == 0) return read_matrix_binary(path);
  return read_matrix_csv(path);
}

ThresholdSeries read_threshold_csv(std::istream& in) {
  long long line_no = 0;
  expect_header(in, "t,value", line_no);
  std::vector<std::pair<long long, double>> rows;
  std::vector<long long> line_of;
  std::string line;
  long long T = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != 2) {
      throw Error(ErrorCode::SchemaError,
                  "line " + std::to_string(line_no) + ": expected 2 fields, got " + std::to_string(f.size()), line_no);
    }
    rows.emplace_back(parse_index(f[0], "t", line_no), parse_value(f[1], line_no));
    line_of.push_back(line_no);
    T = std::max(T, rows.back().first);
  }
  if (rows.empty()) throw Error(ErrorCode::SchemaError, "no data rows", line_no);
  if (T > static_cast<long long>(rows.size()) * 64) {
    throw Error(ErrorCode::MissingCell, "t runs to " + std::to_string(T) + " but only " +
                                            std::to_string(rows.size()) + " rows are present");
  }
  Eigen::VectorXd z(T);
  std::vector<long long> seen(static_cast<std::size_t>(T), 0);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    auto& first = seen[static_cast<std::size_t>(rows[k].first - 1)];
    if (first) {
      throw Error(ErrorCode::DuplicateCell,
                  "line " + std::to_string(line_of[k]) + ": t=" + std::to_string(rows[k].first) +
                      " already given on line " + std::to_string(first),
                  line_of[k]);
    }
    first = line_of[k];
    z[rows[k].first - 1] = rows[k].second;
  }
  for (long long t = 0; t < T; ++t) {
    if (!seen[static_cast<std::size_t>(t)]) {
      throw Error(ErrorCode::MissingCell, "t=" + std::to_string(t + 1) + " is missing");
    }
  }
  return ThresholdSeries(std::move(z));
}

ThresholdSeries read_threshold_csv(const fs::path& path) {
  auto in = open_in(path);
  try {
    return read_threshold_csv(in);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what(), e.index());
  }
}

void write_threshold_csv(std::ostream& out, const ThresholdSeries& z) {
  out << "t,value\n";
  for (Index t = 0; t < z.length(); ++t) out << t + 1 << ',' << format_double(z[t]) << '\n';
}

void write_threshold_csv(const fs::path& path, const ThresholdSeries& z) {
  auto out = open_out(path);
  write_threshold_csv(out, z);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

Transform parse_transform(const std::string& name) {
  if (name.empty() || name == "none") return Transform::None;
  if (name == "diff") return Transform::Diff;
  if (name == "logdiff") return Transform::LogDiff;
  if (name == "log2diff") return Transform::Log2Diff;
  throw Error(ErrorCode::InvalidArgument, "unknown transform '" + name + "' (diff|logdiff|log2diff)");
}

int transform_lag(Transform t) {
  switch (t) {
    case Transform::None: return 0;
    case Transform::Diff:
    case Transform::LogDiff: return 1;
    case Transform::Log2Diff: return 2;
  }
  return 0;
}

Dataset apply_transform(const Dataset& data, Transform t) {
  const int lag = transform_lag(t);
  if (lag == 0) return data;
  const Index T = data.x.length();
  if (T - lag < 2) throw Error(ErrorCode::InvalidArgument, "series too short for the requested transform");
  Eigen::MatrixXd v = data.x.vectorized();
  if (t != Transform::Diff) {
    for (Index k = 0; k < v.size(); ++k) {
      if (!(v.data()[k] > 0.0)) {
        throw Error(ErrorCode::NonFiniteValue, "log transform needs positive values; t=" +
                                                   std::to_string(k / v.rows() + 1) + " has " +
                                                   format_double(v.data()[k]),
                    k / v.rows() + 1);
      }
    }
    v = v.array().log().matrix();
  }
  for (int d = 0; d < lag; ++d) {
    const Index n = v.cols();
    v = (v.rightCols(n - 1) - v.leftCols(n - 1)).eval();
  }
  return build_dataset(MatrixSeries(data.x.rows(), data.x.cols(), std::move(v)),
                       data.z.slice(lag, T));
}

}  // namespace tmfm::io
