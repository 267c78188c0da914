#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "helpers.hpp"
#include "heatcast/pipeline.hpp"
#include "heatcast/synth.hpp"

using namespace heatcast;

namespace {

const ForestModel& small_model() {
  static const ForestModel model = [] {
    synth::RegressionSpec spec;
    spec.n_rows = 300;
    ForestParams params;
    params.n_trees = 60;
    return ForestModel::train(Dataset::from_design(synth::generate_regression_rows(spec)), params);
  }();
  return model;
}

ObservationTable varied_table(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> elev(0.0, 1500.0), temp(236.0, 252.0), h2o(0.1, 0.9),
      trop(10000.0, 12000.0);
  std::vector<GridCellRecord> rows;
  const Date start = Date::parse("2023-05-01");
  for (int d = 0; d < 20; ++d) {
    for (int c = 0; c < 6; ++c) {
      rows.push_back(testing::record("c" + std::to_string(c), start + d, 290.0,
                                     {elev(rng), temp(rng), h2o(rng), trop(rng)}));
    }
  }
  return make_table(rows);
}

std::vector<ForecastRecord> series_records(const DailySeries& s) {
  std::vector<ForecastRecord> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    ForecastRecord r;
    r.target_date = s.days[i];
    r.precursor_date = s.days[i] - 14;
    r.fitted_q95_k = s.values[i];
    r.n_cells = 10;
    out.push_back(r);
  }
  return out;
}

}  // namespace

TEST_CASE("identical precursors forecast the model's prediction") {
  const PrecursorFields p{400.0, 244.0, 0.5, 11200.0};
  const Date day = Date::parse("2023-05-10");
  std::vector<GridCellRecord> rows;
  for (int c = 0; c < 7; ++c) rows.push_back(testing::record("c" + std::to_string(c), day, std::nullopt, p));
  const auto table = make_table(rows);
  const std::vector<Date> dates{day};
  const auto res = roll_forecast(small_model(), table, dates, 14);
  REQUIRE(res.records.size() == 1);
  const auto expected = small_model().predict_mean(p.complete()->as_features());
  CHECK(res.records[0].fitted_q95_k == doctest::Approx(expected).epsilon(1e-12));
  CHECK(res.records[0].target_date == Date::parse("2023-05-24"));
  CHECK(res.records[0].precursor_date == day);
  CHECK(res.records[0].n_cells == 7);
  CHECK_FALSE(res.records[0].interval.has_value());
}

TEST_CASE("roll_forecast averages complete cells and omits empty dates") {
  const auto table = varied_table(1);
  const Date d0 = Date::parse("2023-05-03");
  const std::vector<Date> dates{d0, Date::parse("2023-06-30"), d0 + 1};
  const auto res = roll_forecast(small_model(), table, dates, 14);
  CHECK(res.n_omitted == 1);
  REQUIRE(res.records.size() == 2);
  CHECK(res.records[1].precursor_date == d0 + 1);

  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : table.rows) {
    if (r.date != d0) continue;
    sum += small_model().predict_mean(r.precursors.complete()->as_features());
    ++n;
  }
  CHECK(res.records[0].fitted_q95_k == doctest::Approx(sum / static_cast<double>(n)).epsilon(1e-12));

  std::vector<GridCellRecord> rows = table.rows;
  rows[0].precursors.h2o_l8.reset();
  const auto partial = roll_forecast(small_model(), make_table(rows), std::vector<Date>{rows[0].date}, 14);
  CHECK(partial.records[0].n_cells == 5);
}

TEST_CASE("a date's record depends only on that date's rows") {
  const auto table = varied_table(2);
  const Date keep = Date::parse("2023-05-07");
  const auto dates = date_range(Date::parse("2023-05-01"), Date::parse("2023-05-20"));
  REQUIRE(dates.size() == 20);
  const auto full = roll_forecast(small_model(), table, dates, 14);

  std::vector<GridCellRecord> rows;
  for (const auto& r : table.rows) {
    if (r.date == keep || r.date.ymd().day() != std::chrono::day{8}) rows.push_back(r);
  }
  const auto trimmed = roll_forecast(small_model(), make_table(rows), std::vector<Date>{keep}, 14);
  const auto it = std::find_if(full.records.begin(), full.records.end(),
                               [&](const ForecastRecord& r) { return r.precursor_date == keep; });
  REQUIRE(it != full.records.end());
  CHECK(trimmed.records[0].fitted_q95_k == it->fitted_q95_k);

  auto shuffled = table.rows;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
  const auto again = roll_forecast(small_model(), make_table(shuffled), dates, 14);
  CHECK(serialize_forecasts(again.records) == serialize_forecasts(full.records));

  std::stringstream buf;
  small_model().save(buf);
  const auto reloaded = ForestModel::load(buf);
  const auto from_disk = roll_forecast(reloaded, table, dates, 14);
  CHECK(serialize_forecasts(from_disk.records) == serialize_forecasts(full.records));
  for (std::size_t i = 0; i < dates.size(); ++i) {
    CHECK(from_disk.records[i].fitted_q95_k == full.records[i].fitted_q95_k);
  }
  CHECK(serialize_forecasts(roll_forecast(small_model(), table, dates, 14, 4).records) ==
        serialize_forecasts(full.records));
}

TEST_CASE("build_daily_series") {
  auto recs = series_records(synth::exchangeable_series(31, 295.0, 1.0, 4));
  CHECK(build_daily_series(recs).size() == 31);
  CHECK(build_daily_series({recs[5]}).size() == 1);
  std::reverse(recs.begin(), recs.end());
  const auto s = build_daily_series(recs);
  CHECK(std::is_sorted(s.days.begin(), s.days.end()));
  recs.push_back(recs.front());
  CHECK_THROWS_AS(build_daily_series(recs), DomainError);
  CHECK_THROWS_AS(build_daily_series({}), DomainError);
}

TEST_CASE("attach_intervals") {
  SUBCASE("constant series gives zero-width intervals") {
    DailySeries s;
    for (int i = 0; i < 20; ++i) {
      s.days.push_back(Date::parse("2023-05-01") + i);
      s.values.push_back(300.0);
    }
    const auto out = attach_intervals(series_records(s), 0.25);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].interval.has_value() == (i >= kMinSeriesLength));
      if (out[i].interval) {
        CHECK(out[i].interval->lower == 300.0);
        CHECK(out[i].interval->upper == 300.0);
      }
    }
  }
  SUBCASE("noise scale and nesting") {
    const auto s = synth::exchangeable_series(31, 295.0, 0.45, 5);
    const auto a25 = attach_intervals(series_records(s), 0.25);
    const auto a10 = attach_intervals(series_records(s), 0.10);
    std::vector<double> widths;
    for (std::size_t i = 0; i < a25.size(); ++i) {
      CHECK(a25[i].target_date == a10[i].target_date);
      if (!a25[i].interval) continue;
      widths.push_back(a25[i].interval->half_width());
      CHECK(a10[i].interval->lower <= a25[i].interval->lower);
      CHECK(a25[i].interval->upper <= a10[i].interval->upper);
      CHECK(a25[i].interval->alpha == 0.25);
    }
    CHECK(widths.size() == 21);
    std::sort(widths.begin(), widths.end());
    CHECK(widths[widths.size() / 2] >= 0.3);
    CHECK(widths[widths.size() / 2] <= 0.8);
  }
}

TEST_CASE("forecasts.csv round trip") {
  testing::TempDir dir;
  const auto s = synth::exchangeable_series(14, 295.0, 1.0, 6);
  const auto recs = attach_intervals(series_records(s), 0.25);
  const auto text = serialize_forecasts(recs);
  CHECK(text.starts_with(std::string(kForecastsHeader)));
  const auto back = read_forecasts(dir.write("f.csv", text));
  REQUIRE(back.size() == recs.size());
  CHECK(serialize_forecasts(back) == text);
  CHECK_FALSE(back[0].interval.has_value());
  CHECK(back[13].interval.has_value());
  CHECK(back[13].interval->lower == recs[13].interval->lower);
}
