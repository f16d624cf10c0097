#include <doctest.h>

#include <cmath>
#include <numeric>

#include "tmfm/error.hpp"
#include "tmfm/harness.hpp"

using namespace tmfm;

namespace {

ExperimentGrid small_grid(int reps) {
  ExperimentGrid grid;
  grid.base.p1 = 8;
  grid.base.p2 = 8;
  grid.base.T = 300;
  grid.n_reps = reps;
  grid.master_seed = 17;
  SweepAxes axes;
  axes.delta = {{0, 0, 0, 0}, {0.5, 0, 0.5, 0}};
  grid.settings = expand_sweep(grid.base, axes);
  grid.k_variants = {KVariant::estimated(), KVariant::fixed({2, 2}), KVariant::fixed({30, 30})};
  grid.threads = 1;
  return grid;
}

// Equal, or both NaN (rows of variants that failed everywhere).
bool same(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

}  // namespace

TEST_CASE("KVariant parsing") {
  CHECK(KVariant::parse("est").label == "est");
  CHECK(!KVariant::parse("est").k);
  CHECK(KVariant::parse("4x3").k == FactorCounts{4, 3});
  CHECK_THROWS_AS(KVariant::parse("four"), Error);
}

TEST_CASE("expand_sweep names and orders settings") {
  DgpSpec base;
  SweepAxes axes;
  axes.delta = {{0, 0, 0, 0}, {0.5, 0, 0.5, 0}};
  axes.T = {600, 1200, 2400};
  const auto settings = expand_sweep(base, axes);
  REQUIRE(settings.size() == 6);
  CHECK(settings[0].name == "setting 1");
  CHECK(settings[5].name == "setting 6");
  CHECK(settings[0].spec.T == 600);
  CHECK(settings[2].spec.T == 2400);
  CHECK(settings[3].spec.delta[0] == 0.5);
  CHECK(expand_sweep(base, SweepAxes{}).size() == 1);
}

TEST_CASE("a single replicate equals a direct pipeline call") {
  auto grid = small_grid(1);
  grid.settings.resize(1);
  const auto table = run_monte_carlo(grid);
  REQUIRE(table.replicates.size() == 1);
  const auto& rep = table.replicates[0];

  const auto data = simulate_dataset(grid.settings[0].spec, Rng(grid.master_seed, 0));
  const auto model = fit(data.x, data.z, grid.estimation);
  REQUIRE(rep.variants[0].ok());
  CHECK(*rep.variants[0].r_hat == model.r_tilde);
  CHECK(rep.k_hat == model.k);
  for (Orientation s : kOrientations) {
    for (Regime i : kRegimes) {
      const double d = space_distance(model.loadings.at(s, i),
                                      LoadingSpace::span_of(data.truth.loading(s, i)));
      CHECK(rep.variants[0].distance->at(s, i) == doctest::Approx(d).epsilon(1e-12));
    }
  }
  CHECK(table.rows[0].mean_abs_error == doctest::Approx(std::abs(model.r_tilde - rep.r0)));
}

TEST_CASE("results do not depend on the thread count") {
  auto one = small_grid(3);
  auto many = one;
  many.threads = 4;
  const auto a = run_monte_carlo(one);
  const auto b = run_monte_carlo(many);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t r = 0; r < a.rows.size(); ++r) {
    CHECK(same(a.rows[r].mean_abs_error, b.rows[r].mean_abs_error));
    CHECK(same(a.rows[r].mean_r_hat, b.rows[r].mean_r_hat));
    for (std::size_t q = 0; q < 4; ++q) CHECK(same(a.rows[r].mean_distance.items[q], b.rows[r].mean_distance.items[q]));
    CHECK(a.rows[r].r_hat_histogram == b.rows[r].r_hat_histogram);
  }
}

TEST_CASE("metrics rows: shape, frequencies and recorded failures") {
  const auto grid = small_grid(3);
  std::size_t calls = 0;
  const auto table = run_monte_carlo(grid, [&](std::size_t done, std::size_t total) {
    ++calls;
    CHECK(done <= total);
    CHECK(total == 6);
  });
  CHECK(calls == 6);
  REQUIRE(table.rows.size() == 6);
  CHECK(table.rows[0].setting == "setting 1");
  CHECK(table.rows[0].variant == "est");
  CHECK(table.rows[4].variant == "2x2");
  for (const auto& row : table.rows) {
    CHECK(row.n_reps == 3);
    if (row.variant == "30x30") {
      CHECK(row.n_failed == 3);
      continue;
    }
    CHECK(row.n_failed == 0);
    double total = 0.0;
    for (const auto& [k, f] : row.k_frequency) total += f;
    CHECK(total == doctest::Approx(1.0));
    CHECK(std::accumulate(row.r_hat_histogram.begin(), row.r_hat_histogram.end(), 0) <= 3);
    CHECK(row.r_hat_histogram.size() == 20);
    CHECK(row.sd_abs_error >= 0.0);
  }
  for (const auto& rep : table.replicates) {
    CHECK(!rep.variants[2].ok());
    CHECK(rep.variants[2].error.find("KOutOfRange") != std::string::npos);
  }
  const auto boxes = summarize_distance_boxes(table);
  CHECK(boxes.size() == 2 * 2 * 4);
  for (const auto& box : boxes) {
    CHECK(box.n == 3);
    CHECK(box.summary.min <= box.summary.median);
    CHECK(box.summary.median <= box.summary.max);
  }
}

TEST_CASE("five-number summaries") {
  const double ramp[] = {5, 3, 1, 2, 4};
  const auto f = five_number(ramp);
  CHECK(f.min == 1);
  CHECK(f.q1 == 2);
  CHECK(f.median == 3);
  CHECK(f.q3 == 4);
  CHECK(f.max == 5);
  const double flat[] = {0.7, 0.7, 0.7};
  const auto g = five_number(flat);
  CHECK(g.min == 0.7);
  CHECK(g.max == 0.7);
  CHECK(g.median == 0.7);
  const double one[] = {2.5};
  CHECK(five_number(one).q3 == 2.5);
  try {
    five_number(std::span<const double>{});
    FAIL("expected EmptySeries");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySeries);
  }
  MetricsTable empty;
  CHECK_THROWS_AS(summarize_distance_boxes(empty), Error);
}

TEST_CASE("grid validation") {
  auto grid = small_grid(1);
  grid.n_reps = 0;
  CHECK_THROWS_AS(grid.validate(), Error);
  grid = small_grid(1);
  grid.settings[0].spec.ar_diag[0] = 1.2;
  CHECK_THROWS_AS(grid.validate(), Error);
}
