#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "heatcast/conformal.hpp"
#include "heatcast/oracles.hpp"
#include "heatcast/synth.hpp"

using namespace heatcast;

namespace {

// Standard normal quantile by bisection on erfc.
double normal_quantile(double p) {
  double lo = -10.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

ForestParams small(std::uint64_t seed, int min_leaf = 5) {
  ForestParams p;
  p.n_trees = 100;
  p.min_leaf = min_leaf;
  p.seed = seed;
  return p;
}

Dataset noisy_line(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> z;
  std::vector<double> x(n), y(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = u(rng);
    y[i] = 0.5 * x[i] + z(rng);
  }
  return Dataset::from_single_feature("x", x, y);
}

}  // namespace

TEST_CASE("constant series gives a zero-width interval") {
  DailySeries s;
  for (int i = 0; i < 15; ++i) {
    s.days.push_back(Date::parse("2023-05-01") + i);
    s.values.push_back(301.5);
  }
  const auto iv = alg1_daily_interval(s, s.days.back() + 1, 0.25);
  CHECK(iv.lower == 301.5);
  CHECK(iv.upper == 301.5);
  CHECK(iv.fitted == 301.5);
  CHECK(iv.method == IntervalMethod::Alg1InSample);
}

TEST_CASE("alg1 preconditions") {
  const auto s = synth::exchangeable_series(9, 300.0, 1.0, 1);
  CHECK_THROWS_AS(alg1_daily_interval(s, s.days.back() + 1, 0.25), DomainError);
  const auto ok = synth::exchangeable_series(12, 300.0, 1.0, 1);
  CHECK_THROWS_AS(alg1_daily_interval(ok, ok.days.back() + 1, 0.0), DomainError);
  CHECK_THROWS_AS(alg1_daily_interval(ok, ok.days.back() + 1, 0.6), DomainError);
  auto unsorted = ok;
  std::swap(unsorted.days[2], unsorted.days[3]);
  CHECK_THROWS_AS(alg1_daily_interval(unsorted, ok.days.back() + 1, 0.25), DomainError);
}

TEST_CASE("alg1 half-width tracks Gaussian quantiles at T=200") {
  const double sigma = 0.8;
  const double expected = normal_quantile(0.875) * sigma;
  CHECK(expected == doctest::Approx(1.15 * sigma).epsilon(0.01));
  double total = 0.0;
  const int reps = 20;
  for (int r = 0; r < reps; ++r) {
    const auto s = synth::exchangeable_series(200, 295.0, sigma, 500 + r);
    total += alg1_daily_interval(s, s.days.back() + 1, 0.25).half_width();
  }
  const double mean = total / reps;
  CHECK(mean >= 0.75 * expected);
  CHECK(mean <= 1.25 * expected);
}

TEST_CASE("alg1 coverage of the next exchangeable value and nesting") {
  auto gen = [](std::uint64_t r) {
    oracle::CoverageCase c;
    auto s = synth::exchangeable_series(31, 300.0, 1.0, 7000 + r);
    c.y_new = s.values.back();
    c.new_day = s.days.back();
    s.days.pop_back();
    s.values.pop_back();
    c.series = s;
    return c;
  };
  const auto wide = oracle::coverage(
      [](const oracle::CoverageCase& c) { return alg1_daily_interval(c.series, c.new_day, 0.10); }, gen, 500);
  const auto narrow = oracle::coverage(
      [](const oracle::CoverageCase& c) { return alg1_daily_interval(c.series, c.new_day, 0.25); }, gen, 500);
  CHECK(narrow.coverage >= 0.72);
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(wide.intervals[i].lower <= narrow.intervals[i].lower);
    CHECK(wide.intervals[i].upper >= narrow.intervals[i].upper);
    CHECK(narrow.intervals[i].lower <= narrow.intervals[i].upper);
  }
}

TEST_CASE("alg1 shift equivariance") {
  const auto s = synth::exchangeable_series(40, 290.0, 1.5, 3);
  auto shifted = s;
  for (auto& v : shifted.values) v += 12.5;
  const auto a = alg1_daily_interval(s, s.days.back() + 1, 0.25);
  const auto b = alg1_daily_interval(shifted, s.days.back() + 1, 0.25);
  CHECK(b.lower - a.lower == doctest::Approx(12.5).epsilon(1e-9));
  CHECK(b.upper - a.upper == doctest::Approx(12.5).epsilon(1e-9));
  CHECK(b.fitted - a.fitted == doctest::Approx(12.5).epsilon(1e-9));
}

TEST_CASE("conformal score quantile rank arithmetic") {
  const std::vector<double> three{0.3, -0.2, 0.1};
  CHECK(conformal_score_quantile(three, 0.25) == 0.3);
  const std::vector<double> two{0.3, 0.1};
  CHECK(conformal_score_quantile(two, 0.25) == std::numeric_limits<double>::infinity());
  std::vector<double> many(99);
  std::iota(many.begin(), many.end(), 1.0);
  CHECK(conformal_score_quantile(many, 0.25) == 75.0);
  const std::vector<double> none;
  CHECK_THROWS_AS(conformal_score_quantile(none, 0.25), DomainError);
}

TEST_CASE("split CQR mechanics") {
  std::mt19937_64 rng(21);
  const auto train = noisy_line(300, rng);
  const auto qp = small(5, 10);
  const auto qrf = ForestModel::train(train, qp);
  const double probs[] = {0.125, 0.875};

  SUBCASE("calibration inside the band never widens it") {
    Dataset calib;
    calib.n_features = 1;
    calib.feature_names = {"x"};
    for (double x = 1.0; x <= 9.0; x += 1.0) {
      const auto q = qrf.predict_quantiles(std::span<const double>(&x, 1), probs);
      calib.x.push_back(x);
      calib.y.push_back(0.5 * (q[0] + q[1]));
      calib.w.push_back(1.0);
      ++calib.n_rows;
    }
    const double x_new = 4.5;
    const auto iv = split_cqr_interval(train, calib, std::span<const double>(&x_new, 1), 0.25, qp);
    const auto raw = qrf.predict_quantiles(std::span<const double>(&x_new, 1), probs);
    CHECK(iv.upper - iv.lower <= raw[1] - raw[0] + 1e-12);
    CHECK(iv.method == IntervalMethod::SplitCQR);
  }
  SUBCASE("three calibration points use the largest score") {
    std::vector<double> cx{2.0, 5.0, 8.0}, cy{10.0, -4.0, 3.0};
    const auto calib = Dataset::from_single_feature("x", cx, cy);
    double largest = -INFINITY;
    for (std::size_t i = 0; i < 3; ++i) {
      const auto q = qrf.predict_quantiles(calib.row(i), probs);
      largest = std::max(largest, std::max(q[0] - cy[i], cy[i] - q[1]));
    }
    const double x_new = 6.0;
    const auto iv = split_cqr_interval(train, calib, std::span<const double>(&x_new, 1), 0.25, qp);
    const auto raw = qrf.predict_quantiles(std::span<const double>(&x_new, 1), probs);
    CHECK(iv.lower == doctest::Approx(raw[0] - largest).epsilon(1e-12));
    CHECK(iv.upper == doctest::Approx(raw[1] + largest).epsilon(1e-12));
  }
  SUBCASE("empty calibration") {
    Dataset calib;
    calib.n_features = 1;
    const double x_new = 1.0;
    CHECK_THROWS_AS(split_cqr_interval(train, calib, std::span<const double>(&x_new, 1), 0.25, qp), DomainError);
  }
}

TEST_CASE("split CQR nesting and shift equivariance") {
  std::mt19937_64 rng(22);
  const auto train = noisy_line(200, rng);
  const auto calib = noisy_line(100, rng);
  const auto targets = noisy_line(30, rng);
  const auto qp = small(6);
  const auto a10 = split_cqr_intervals(train, calib, targets, 0.10, qp);
  const auto a25 = split_cqr_intervals(train, calib, targets, 0.25, qp);
  auto shift = [](Dataset d) {
    for (auto& y : d.y) y += 7.0;
    return d;
  };
  const auto moved = split_cqr_intervals(shift(train), shift(calib), targets, 0.25, qp);
  for (std::size_t i = 0; i < a10.size(); ++i) {
    CHECK(a10[i].lower <= a25[i].lower);
    CHECK(a10[i].upper >= a25[i].upper);
    CHECK(moved[i].lower - a25[i].lower == doctest::Approx(7.0).epsilon(1e-9));
    CHECK(moved[i].upper - a25[i].upper == doctest::Approx(7.0).epsilon(1e-9));
  }
}

TEST_CASE("grid-cell intervals") {
  synth::RegressionSpec rs;
  rs.n_rows = 400;
  rs.seed = 31;
  const auto rows = synth::generate_regression_rows(rs);
  const auto model = ForestModel::train(Dataset::from_design(rows), small(1));

  SUBCASE("top_fraction 1 covers every row") {
    const auto all = grid_cell_intervals(model, rows, 0.25, 1.0, small(2));
    REQUIRE(all.size() == rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) {
      CHECK(all[i].row == i);
      CHECK(all[i].interval.lower <= all[i].interval.upper);
    }
  }
  SUBCASE("top quarter keeps the highest fitted rows") {
    const auto top = grid_cell_intervals(model, rows, 0.25, 0.25, small(2));
    CHECK(top.size() == 100);
    const auto fitted = model.predict_mean(Dataset::from_design(rows));
    double min_kept = INFINITY;
    std::vector<bool> kept(rows.size(), false);
    for (const auto& k : top) {
      kept[k.row] = true;
      min_kept = std::min(min_kept, fitted[k.row]);
      CHECK(k.interval.fitted == fitted[k.row]);
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!kept[i]) CHECK(fitted[i] <= min_kept);
    }
  }
  SUBCASE("nesting") {
    const auto a10 = grid_cell_intervals(model, rows, 0.10, 0.25, small(2));
    const auto a25 = grid_cell_intervals(model, rows, 0.25, 0.25, small(2));
    for (std::size_t i = 0; i < a10.size(); ++i) {
      CHECK(a10[i].interval.lower <= a25[i].interval.lower);
      CHECK(a10[i].interval.upper >= a25[i].interval.upper);
    }
  }
  SUBCASE("subset too small") {
    CHECK_THROWS_AS(grid_cell_intervals(model, rows, 0.25, 0.02, small(2)), DomainError);
    CHECK_THROWS_AS(grid_cell_intervals(model, rows, 0.25, 0.0, small(2)), DomainError);
  }
}

TEST_CASE("grid-cell widths: mid-range noise narrows the top quartile, flat noise does not") {
  auto ratio = [](synth::NoiseProfile profile, std::uint64_t seed) {
    synth::RegressionSpec rs;
    rs.seed = seed;
    rs.noise = profile;
    const auto rows = synth::generate_regression_rows(rs);
    const auto model = ForestModel::train(Dataset::from_design(rows), small(seed));
    auto mean_half = [](const std::vector<KeyedInterval>& v) {
      double s = 0.0;
      for (const auto& k : v) s += k.interval.half_width();
      return s / static_cast<double>(v.size());
    };
    return mean_half(grid_cell_intervals(model, rows, 0.25, 0.25, small(seed + 1))) /
           mean_half(grid_cell_intervals(model, rows, 0.25, 1.0, small(seed + 1)));
  };
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    CHECK(ratio(synth::NoiseProfile::MidRange, seed) < 1.0);
    const double flat = ratio(synth::NoiseProfile::Homoscedastic, seed);
    CHECK(flat > 0.85);
    CHECK(flat < 1.15);
  }
}

TEST_CASE("intervals.csv round trip") {
  testing::TempDir dir;
  std::vector<IntervalRecord> recs{
      {"2023-05-24", {300.25, 299.5, 301.125, 0.25, IntervalMethod::Alg1InSample}},
      {"c0001@faux", {288.0, 287.0, 289.5, 0.1, IntervalMethod::SplitCQR}}};
  const auto path = dir.write("intervals.csv", serialize_intervals(recs));
  const auto back = read_intervals(path);
  REQUIRE(back.size() == 2);
  CHECK(back[1].key == "c0001@faux");
  CHECK(back[1].interval.method == IntervalMethod::SplitCQR);
  CHECK(back[0].interval.upper == 301.125);
  CHECK(serialize_intervals(back) == serialize_intervals(recs));
  dir.write("bad.csv", std::string(kIntervalsHeader) + "\nk,1,3,2,0.25,split_cqr\n");
  CHECK_THROWS_AS(read_intervals(dir / "bad.csv"), ParseError);
}
