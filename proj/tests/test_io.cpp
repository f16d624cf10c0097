#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "io.hpp"
#include "tmfm/error.hpp"
#include "tmfm/simulate.hpp"

using namespace tmfm;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "tmfm_test_io";
  fs::create_directories(dir);
  return dir / name;
}

Error error_of(const std::string& text) {
  std::istringstream in(text);
  try {
    io::read_matrix_csv(in);
  } catch (const Error& e) {
    return e;
  }
  FAIL("expected a tmfm::Error");
  return Error(ErrorCode::IoError, "");
}

bool bit_equal(const MatrixSeries& a, const MatrixSeries& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || a.length() != b.length()) return false;
  const auto& x = a.vectorized();
  const auto& y = b.vectorized();
  return std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
}

}  // namespace

TEST_CASE("minimal long CSV") {
  std::istringstream in("t,row,col,value\n1,1,1,0.5\n2,1,1,-1.25\n");
  const auto x = io::read_matrix_csv(in);
  CHECK(x.length() == 2);
  CHECK(x.rows() == 1);
  CHECK(x.cols() == 1);
  CHECK(x.at(1)(0, 0) == -1.25);
}

TEST_CASE("rows may come in any order; a BOM is tolerated") {
  std::istringstream in("\xEF\xBB\xBFt,row,col,value\n2,1,2,4\n1,2,1,1\n1,1,1,0\n2,2,2,8\n1,1,2,2\n2,1,1,3\n1,2,2,5\n2,2,1,7\n");
  const auto x = io::read_matrix_csv(in);
  REQUIRE(x.length() == 2);
  CHECK(x.at(0)(1, 0) == 1);
  CHECK(x.at(0)(0, 1) == 2);
  CHECK(x.at(1)(1, 1) == 8);
}

TEST_CASE("long CSV errors carry the offending line") {
  const auto dup = error_of("t,row,col,value\n1,1,1,0.5\n2,1,1,1\n1,1,1,0.7\n");
  CHECK(dup.code() == ErrorCode::DuplicateCell);
  CHECK(dup.index() == 4);
  CHECK(std::string(dup.what()).find("line 2") != std::string::npos);

  const auto missing = error_of("t,row,col,value\n1,1,1,0\n1,2,1,0\n2,1,1,0\n");
  CHECK(missing.code() == ErrorCode::MissingCell);

  const auto schema = error_of("t,row,col,value\n1,1,1,0\n1,x,1,0\n");
  CHECK(schema.code() == ErrorCode::SchemaError);
  CHECK(schema.index() == 3);

  CHECK(error_of("a,b,c,d\n1,1,1,0\n").code() == ErrorCode::SchemaError);
  CHECK(error_of("t,row,col,value\n1,1,1,nan\n").code() == ErrorCode::NonFiniteValue);
  CHECK(error_of("t,row,col,value\n0,1,1,1\n").code() == ErrorCode::SchemaError);
  CHECK(category_of(ErrorCode::DuplicateCell) == ErrorCategory::Input);
}

TEST_CASE("CSV and binary round trips are bit-identical") {
  DgpSpec spec;
  spec.p1 = 4;
  spec.p2 = 3;
  spec.T = 25;
  const auto d = simulate_dataset(spec);
  MatrixSeries x = d.x;
  Eigen::MatrixXd v = x.vectorized();
  v(0, 0) = 0.1;
  v(1, 0) = 1e-310;
  v(2, 0) = -std::numeric_limits<double>::max();
  v(3, 0) = -0.0;
  x = MatrixSeries(4, 3, v);

  const auto csv = scratch("x.csv");
  io::write_matrix_csv(csv, x);
  CHECK(bit_equal(io::read_matrix_csv(csv), x));
  CHECK(bit_equal(io::read_matrix_series(csv), x));

  const auto bin = scratch("x.bin");
  io::write_matrix_binary(bin, x);
  CHECK(bit_equal(io::read_matrix_binary(bin), x));
  CHECK(bit_equal(io::read_matrix_series(bin), x));
  CHECK(fs::file_size(bin) == 8 + 3 * 8 + 25 * 12 * 8);

  const auto zpath = scratch("z.csv");
  io::write_threshold_csv(zpath, d.z);
  const auto z = io::read_threshold_csv(zpath);
  REQUIRE(z.length() == 25);
  for (Index t = 0; t < 25; ++t) CHECK(z[t] == d.z[t]);
}

TEST_CASE("binary reader rejects truncated files") {
  const auto bin = scratch("short.bin");
  {
    std::ofstream out(bin, std::ios::binary);
    out.write(io::kBinaryMagic, 8);
    const std::uint64_t dims[3] = {2, 2, 2};
    out.write(reinterpret_cast<const char*>(dims), sizeof dims);
    const double one = 1.0;
    out.write(reinterpret_cast<const char*>(&one), sizeof one);
  }
  CHECK_THROWS_AS(io::read_matrix_binary(bin), Error);
  CHECK_THROWS_AS(io::read_matrix_csv(scratch("does_not_exist.csv")), Error);
}

TEST_CASE("threshold CSV") {
  std::istringstream in("t,value\n1,0.5\n2,-0.25\n3,1\n");
  const auto z = io::read_threshold_csv(in);
  CHECK(z.length() == 3);
  CHECK(z[1] == -0.25);
  std::istringstream gap("t,value\n1,0.5\n3,1\n");
  CHECK_THROWS_AS(io::read_threshold_csv(gap), Error);
}

TEST_CASE("transforms keep X and z aligned") {
  Eigen::MatrixXd v(1, 4);
  v << 1, 2, 4, 8;
  const Dataset data{MatrixSeries(1, 1, v), ThresholdSeries{10, 20, 30, 40}};
  CHECK(io::transform_lag(io::parse_transform("none")) == 0);
  CHECK(io::transform_lag(io::parse_transform("diff")) == 1);

  const auto diff = io::apply_transform(data, io::Transform::Diff);
  REQUIRE(diff.x.length() == 3);
  CHECK(diff.x.at(2)(0, 0) == 4);
  CHECK(diff.z[0] == 20);

  // second difference of logs: zero for a geometric series
  const auto l2 = io::apply_transform(data, io::Transform::Log2Diff);
  REQUIRE(l2.x.length() == 2);
  CHECK(std::abs(l2.x.at(0)(0, 0)) <= 1e-15);
  CHECK(l2.z[0] == 30);
  const auto ld = io::apply_transform(data, io::Transform::LogDiff);
  CHECK(ld.x.at(1)(0, 0) == doctest::Approx(std::log(2.0)));

  Eigen::MatrixXd bad(1, 3);
  bad << 1, 0, 2;
  const Dataset nonpositive{MatrixSeries(1, 1, bad), ThresholdSeries{1, 2, 3}};
  try {
    io::apply_transform(nonpositive, io::Transform::LogDiff);
    FAIL("expected NonFiniteValue");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NonFiniteValue);
  }
  CHECK_THROWS_AS(io::parse_transform("sqrt"), Error);
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.123456789}) {
    CHECK(std::stod(io::format_double(v)) == v);
  }
}
