#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "heatcast/design.hpp"
#include "heatcast/oracles.hpp"

using namespace heatcast;
using testing::record;

namespace {

const Date kStart = Date::parse("2023-06-01");

DesignSpec spec_at(Date start, int lag = 14) {
  DesignSpec s;
  s.window_start = start;
  s.lag_days = lag;
  return s;
}

// One cell with precursors on the lag date and the given temperatures over
// the window (nullopt = missing day).
std::vector<GridCellRecord> cell_days(const std::string& id, const DesignSpec& spec,
                                      const std::vector<std::optional<double>>& temps,
                                      PrecursorFields p = {500.0, 240.0, 0.4, 11000.0}) {
  std::vector<GridCellRecord> rows;
  rows.push_back(record(id, spec.precursor_date(), std::nullopt, p));
  for (std::size_t i = 0; i < temps.size(); ++i) {
    if (spec.lag_days == 0 && i == 0) {
      rows.back().surface_temp_k = temps[0];
      continue;
    }
    rows.push_back(record(id, spec.window_start + static_cast<long>(i), temps[i], p));
  }
  return rows;
}

std::vector<std::optional<double>> constant(double v, int n = 14) { return std::vector<std::optional<double>>(n, v); }

}  // namespace

TEST_CASE("compute_cell_response") {
  const auto spec = spec_at(kStart);

  SUBCASE("constant window") {
    const auto t = make_table(cell_days("c1", spec, constant(290.0)));
    CHECK(*compute_cell_response(t, spec, "c1") == 290.0);
  }
  SUBCASE("ramp 280..293 at q=.95") {
    std::vector<std::optional<double>> temps;
    std::vector<double> plain;
    for (int i = 0; i < 14; ++i) {
      temps.push_back(280.0 + i);
      plain.push_back(280.0 + i);
    }
    const auto t = make_table(cell_days("c1", spec, temps));
    const double got = *compute_cell_response(t, spec, "c1");
    CHECK(got == doctest::Approx(oracle::quantile(plain, 0.95)).epsilon(1e-14));
    CHECK(got == doctest::Approx(292.35).epsilon(1e-12));
  }
  SUBCASE("too few days present") {
    std::vector<std::optional<double>> temps(14);
    for (int i = 0; i < 5; ++i) temps[static_cast<std::size_t>(i * 2)] = 290.0;
    const auto t = make_table(cell_days("c1", spec, temps));
    CHECK_FALSE(compute_cell_response(t, spec, "c1").has_value());
    auto relaxed = spec;
    relaxed.min_days_present = 5;
    CHECK(compute_cell_response(t, relaxed, "c1").has_value());
  }
  SUBCASE("days outside the window are ignored") {
    auto rows = cell_days("c1", spec, constant(290.0));
    rows.push_back(record("c1", kStart + 14, 350.0));
    rows.push_back(record("c1", kStart - 1, 350.0));
    CHECK(*compute_cell_response(make_table(rows), spec, "c1") == 290.0);
  }
  SUBCASE("unknown cell") {
    const auto t = make_table(cell_days("c1", spec, constant(290.0)));
    CHECK_THROWS_AS(compute_cell_response(t, spec, "zz"), LookupError);
  }
}

TEST_CASE("compute_cell_response ignores row order") {
  const auto spec = spec_at(kStart);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z(295.0, 3.0);
  std::vector<std::optional<double>> temps;
  for (int i = 0; i < 14; ++i) temps.push_back(z(rng));
  auto rows = cell_days("c1", spec, temps);
  const double ref = *compute_cell_response(make_table(rows), spec, "c1");
  for (int k = 0; k < 10; ++k) {
    std::shuffle(rows.begin(), rows.end(), rng);
    CHECK(*compute_cell_response(make_table(rows), spec, "c1") == ref);
  }
}

TEST_CASE("compute_daily_response") {
  const Date d = Date::parse("2023-05-21");
  CHECK(compute_daily_response(make_table({record("a", d, 300.0)}), d, 0.95) == 300.0);

  std::vector<GridCellRecord> rows;
  std::vector<double> temps;
  for (int i = 1; i <= 100; ++i) {
    rows.push_back(record("c" + std::to_string(1000 + i), d, static_cast<double>(i)));
    temps.push_back(i);
  }
  const auto t = make_table(rows);
  CHECK(compute_daily_response(t, d, 0.95) == doctest::Approx(oracle::quantile(temps, 0.95)).epsilon(1e-15));
  CHECK(compute_daily_response(t, d, 0.95) == 95.05);

  std::vector<GridCellRecord> flat;
  for (int i = 0; i < 7; ++i) flat.push_back(record("c" + std::to_string(i), d, 287.25));
  CHECK(compute_daily_response(make_table(flat), d, 0.95) == 287.25);

  CHECK_THROWS_AS(compute_daily_response(t, d + 1, 0.95), DomainError);
}

TEST_CASE("extract_lagged_precursors") {
  SUBCASE("zero lag reads window_start itself") {
    const auto spec = spec_at(kStart, 0);
    PrecursorFields p{100.0, 245.0, 0.2, 12000.0};
    const auto t = make_table({record("c1", kStart, 290.0, p), record("c1", kStart - 14, 290.0)});
    const auto got = extract_lagged_precursors(t, spec, "c1");
    REQUIRE(got.has_value());
    CHECK(got->temp_l8_k == 245.0);
  }
  SUBCASE("two-week lag from June 1st lands on May 18th") {
    const auto spec = spec_at(Date::parse("2023-06-01"));
    CHECK(spec.precursor_date().to_string() == "2023-05-18");
    PrecursorFields p{100.0, 245.0, 0.2, 12000.0};
    const auto t = make_table({record("c1", Date::parse("2023-05-18"), std::nullopt, p),
                               record("c1", Date::parse("2023-05-19"), std::nullopt)});
    CHECK(extract_lagged_precursors(t, spec, "c1")->elevation_m == 100.0);
  }
  SUBCASE("missing field or missing day") {
    const auto spec = spec_at(kStart);
    PrecursorFields p{100.0, 245.0, 0.2, std::nullopt};
    auto t = make_table({record("c1", spec.precursor_date(), 290.0, p)});
    CHECK_FALSE(extract_lagged_precursors(t, spec, "c1").has_value());
    t = make_table({record("c1", spec.precursor_date() + 1, 290.0)});
    CHECK_FALSE(extract_lagged_precursors(t, spec, "c1").has_value());
    CHECK_THROWS_AS(extract_lagged_precursors(t, spec, "c9"), LookupError);
  }
}

TEST_CASE("DesignSpec validation and faux shift") {
  auto s = spec_at(kStart);
  CHECK_NOTHROW(s.validate());
  CHECK(s.shifted_years(-1).window_start.to_string() == "2022-06-01");
  s.q = 1.0;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = spec_at(kStart);
  s.min_days_present = 15;
  CHECK_THROWS_AS(s.validate(), DomainError);
  s = spec_at(kStart, -1);
  CHECK_THROWS_AS(s.validate(), DomainError);
}

TEST_CASE("build_stacked_design") {
  const auto rs = spec_at(kStart);
  const auto fs = rs.shifted_years(-1);
  auto year = [&](const DesignSpec& spec, const std::vector<std::string>& ids, double temp) {
    std::vector<GridCellRecord> rows;
    for (const auto& id : ids) {
      auto days = cell_days(id, spec, constant(temp));
      rows.insert(rows.end(), days.begin(), days.end());
    }
    return rows;
  };

  SUBCASE("N complete cells in both years -> 2N rows") {
    const std::vector<std::string> ids{"c1", "c2", "c3", "c4", "c5"};
    const auto rows = build_stacked_design(make_table(year(rs, ids, 300.0)), make_table(year(fs, ids, 290.0)), rs, fs);
    REQUIRE(rows.size() == 10);
    for (std::size_t i = 0; i < rows.size(); i += 2) {
      CHECK(rows[i].cell_id == rows[i + 1].cell_id);
      CHECK(rows[i].condition == ExposureCondition::Reported);
      CHECK(rows[i + 1].condition == ExposureCondition::Faux);
      CHECK(rows[i].response_q95_k == 300.0);
      CHECK(rows[i + 1].response_q95_k == 290.0);
      CHECK(rows[i].weight == 1.0);
    }
  }
  SUBCASE("row-level deletion keeps the complete half") {
    auto faux = year(fs, {"c1", "c2"}, 290.0);
    for (auto& r : faux) {
      if (r.cell_id == "c2") r.precursors.tropopause_m.reset();
    }
    const auto rows = build_stacked_design(make_table(year(rs, {"c1", "c2"}, 300.0)), make_table(faux), rs, fs);
    CHECK(rows.size() == 3);
    CHECK(std::count_if(rows.begin(), rows.end(), [](const DesignRow& r) { return r.cell_id == "c2"; }) == 1);
  }
  SUBCASE("nothing resolvable -> empty design") {
    const auto rows = build_stacked_design(make_table(year(rs, {"c1"}, 300.0)), make_table(year(rs, {"c1"}, 300.0)),
                                           spec_at(kStart + 100), spec_at(kStart + 100));
    CHECK(rows.empty());
  }
  SUBCASE("disjoint cell universes") {
    CHECK_THROWS_AS(build_stacked_design(make_table(year(rs, {"a"}, 300.0)), make_table(year(fs, {"b"}, 290.0)), rs, fs),
                    DesignError);
  }
  SUBCASE("identical tables give exact within-subject duplicates") {
    const auto t = make_table(year(rs, {"c1", "c2", "c3"}, 297.0));
    const auto rows = build_stacked_design(t, t, rs, rs);
    REQUIRE(rows.size() == 6);
    for (std::size_t i = 0; i < rows.size(); i += 2) {
      CHECK(rows[i].response_q95_k == rows[i + 1].response_q95_k);
      CHECK(rows[i].location == rows[i + 1].location);
      CHECK(rows[i].precursors == rows[i + 1].precursors);
    }
  }
}

TEST_CASE("balance_weights") {
  std::vector<DesignRow> rows(10);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].cell_id = "c" + std::to_string(i / 2);
    rows[i].condition = i % 2 == 0 ? ExposureCondition::Reported : ExposureCondition::Faux;
    rows[i].response_q95_k = 290.0;
  }
  using C = ExposureCondition;

  SUBCASE("targets equal to sample shares") {
    for (const auto& r : balance_weights(rows, {{C::Reported, 0.5}, {C::Faux, 0.5}})) CHECK(r.weight == 1.0);
  }
  SUBCASE("5% reported / 95% faux") {
    const auto w = balance_weights(rows, {{C::Reported, 0.05}, {C::Faux, 0.95}});
    for (const auto& r : w) {
      CHECK(r.weight == doctest::Approx(r.condition == C::Reported ? 0.1 : 1.9).epsilon(1e-14));
    }
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(balance_weights(rows, {{C::Reported, 0.0}, {C::Faux, 1.0}}), DomainError);
    CHECK_THROWS_AS(balance_weights(rows, {{C::Reported, 0.3}, {C::Faux, 0.3}}), DomainError);
    std::vector<DesignRow> only(rows.begin(), rows.begin() + 1);
    CHECK_THROWS_AS(balance_weights(only, {{C::Reported, 0.5}, {C::Faux, 0.5}}), WeightingError);
  }
  SUBCASE("weighted shares hit the targets on unbalanced samples") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 0.99);
    for (int rep = 0; rep < 200; ++rep) {
      std::vector<DesignRow> sample(3 + rep % 50);
      for (std::size_t i = 0; i < sample.size(); ++i) {
        sample[i].condition = (i == 0 || (i != 1 && u(rng) < 0.3)) ? C::Reported : C::Faux;
      }
      const double t = u(rng);
      const auto w = balance_weights(sample, {{C::Reported, t}, {C::Faux, 1.0 - t}});
      double rep_w = 0.0, all = 0.0;
      for (const auto& r : w) {
        all += r.weight;
        if (r.condition == C::Reported) rep_w += r.weight;
      }
      CHECK(std::abs(rep_w / all - t) <= 1e-12);
    }
  }
}

TEST_CASE("design.csv round trip") {
  testing::TempDir dir;
  std::vector<DesignRow> rows(2);
  rows[0] = {"c1", ExposureCondition::Reported, {55.5, 100.25}, {512.5, 241.125, 0.375, 11020.0}, 295.35, 0.1};
  rows[1] = {"c1", ExposureCondition::Faux, {55.5, 100.25}, {512.5, 239.0, 0.4, 10990.0}, 289.0, 1.9};
  const auto path = dir / "design.csv";
  write_design(rows, path);
  CHECK(read_design(path) == rows);
  CHECK(testing::read_file(path).rfind(std::string(kDesignHeader) + "\n", 0) == 0);
  dir.write("bad.csv", std::string(kDesignHeader) + "\nc1,reported,55,100,1,240,0.4,11000,290,-1\n");
  CHECK_THROWS_AS(read_design(dir / "bad.csv"), ParseError);
}
