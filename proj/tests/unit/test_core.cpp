#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "heatcast/core.hpp"
#include "heatcast/oracles.hpp"

using namespace heatcast;

TEST_CASE("kelvin_to_fahrenheit fixtures") {
  CHECK(kelvin_to_fahrenheit(273.15) == doctest::Approx(32.0).epsilon(1e-15));
  CHECK(kelvin_to_fahrenheit(0.0) == doctest::Approx(-459.67).epsilon(1e-15));
  CHECK(std::abs(kelvin_to_fahrenheit(300.0) - 80.33) <= 0.01);
  CHECK(kelvin_to_fahrenheit(300.0) == doctest::Approx(26.85 * 1.8 + 32.0));
}

TEST_CASE("kelvin_to_fahrenheit rejects bad input") {
  CHECK_THROWS_AS(kelvin_to_fahrenheit(-0.01), DomainError);
  CHECK_THROWS_AS(kelvin_to_fahrenheit(std::numeric_limits<double>::quiet_NaN()), DomainError);
  CHECK_THROWS_AS(kelvin_to_fahrenheit(std::numeric_limits<double>::infinity()), DomainError);
}

TEST_CASE("kelvin_to_fahrenheit is affine") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 400.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng);
    const double lhs = kelvin_to_fahrenheit(a) - kelvin_to_fahrenheit(b);
    const double rhs = 1.8 * (a - b);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max({1.0, std::abs(lhs), std::abs(kelvin_to_fahrenheit(a))}));
  }
}

TEST_CASE("empirical_quantile fixtures") {
  std::vector<double> v(100);
  std::iota(v.begin(), v.end(), 1.0);
  CHECK(empirical_quantile(v, 0.95) == 95.05);
  CHECK(empirical_quantile(v, 0.95) == doctest::Approx(oracle::quantile(v, 0.95)).epsilon(1e-15));

  const std::vector<double> one{42.0};
  for (double q : {0.0, 0.3, 0.95, 1.0}) CHECK(empirical_quantile(one, q) == 42.0);

  const std::vector<double> same(17, 288.5);
  for (double q : {0.0, 0.5, 0.95, 1.0}) CHECK(empirical_quantile(same, q) == 288.5);
}

TEST_CASE("empirical_quantile errors") {
  const std::vector<double> empty;
  CHECK_THROWS_AS(empirical_quantile(empty, 0.5), DomainError);
  const std::vector<double> v{1.0, 2.0};
  CHECK_THROWS_AS(empirical_quantile(v, -0.1), DomainError);
  CHECK_THROWS_AS(empirical_quantile(v, 1.1), DomainError);
  const std::vector<double> bad{1.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(empirical_quantile(bad, 0.5), DomainError);
}

TEST_CASE("empirical_quantile properties") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z(290.0, 5.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> v(1 + rep % 40);
    for (auto& x : v) x = z(rng);
    CHECK(empirical_quantile(v, 0.0) == *std::min_element(v.begin(), v.end()));
    CHECK(empirical_quantile(v, 1.0) == *std::max_element(v.begin(), v.end()));

    double q1 = u(rng), q2 = u(rng);
    if (q1 > q2) std::swap(q1, q2);
    CHECK(empirical_quantile(v, q1) <= empirical_quantile(v, q2));

    auto shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const double q = u(rng);
    CHECK(empirical_quantile(shuffled, q) == empirical_quantile(v, q));
  }
}

TEST_CASE("Date parsing and arithmetic") {
  const auto d = Date::parse("2023-05-10");
  CHECK(d.to_string() == "2023-05-10");
  CHECK((d + 14).to_string() == "2023-05-24");
  CHECK((Date::parse("2023-06-01") - 14).to_string() == "2023-05-18");
  CHECK(Date::parse("2023-03-01") - Date::parse("2023-02-28") == 1);
  CHECK(Date::parse("2024-02-29").add_years(-1).to_string() == "2023-02-28");
  CHECK_THROWS_AS(Date::parse("2023-02-30"), DomainError);
  CHECK_THROWS_AS(Date::parse("2023-13-01"), DomainError);
  CHECK_THROWS_AS(Date::parse("2023-5-1"), DomainError);
  CHECK_THROWS_AS(Date::parse("20230501"), DomainError);
  CHECK_THROWS_AS(Date::parse("2023-05-01x"), DomainError);
}

TEST_CASE("GeoPoint bounds") {
  CHECK_NOTHROW(GeoPoint::make(-90.0, 180.0));
  CHECK_THROWS_AS(GeoPoint::make(95.0, 0.0), DomainError);
  CHECK_THROWS_AS(GeoPoint::make(0.0, -180.5), DomainError);
  CHECK_THROWS_AS(GeoPoint::make(std::nan(""), 0.0), DomainError);
}

TEST_CASE("PrecursorVector validation and feature order") {
  PrecursorVector p{500.0, 240.0, 0.4, 11000.0};
  CHECK_NOTHROW(p.validate());
  const auto f = p.as_features();
  CHECK(PrecursorVector::from_features(f) == p);
  CHECK(kPrecursorNames[1] == "temp_l8_k");

  auto bad = p;
  bad.temp_l8_k = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = p;
  bad.h2o_l8 = 1.5;
  CHECK_THROWS_AS(bad.validate(), DomainError);

  PrecursorFields fields{500.0, 240.0, 0.4, std::nullopt};
  CHECK_FALSE(fields.complete().has_value());
  fields.tropopause_m = 11000.0;
  REQUIRE(fields.complete().has_value());
  CHECK(*fields.complete() == p);
}

TEST_CASE("ExposureCondition text form") {
  CHECK(to_string(ExposureCondition::Reported) == "reported");
  CHECK(parse_condition("faux") == ExposureCondition::Faux);
  CHECK_THROWS_AS(parse_condition("Faux!"), DomainError);
}
