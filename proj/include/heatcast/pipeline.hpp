#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heatcast/conformal.hpp"
#include "heatcast/forest.hpp"
#include "heatcast/ingest.hpp"

namespace heatcast {

// One day's forecast, stamped by the date its precursors were measured.
struct ForecastRecord {
  Date precursor_date;
  Date target_date;  // precursor_date + lag_days
  double fitted_q95_k = 0.0;
  std::optional<PredictionInterval> interval;
  std::size_t n_cells = 0;
};

struct RollResult {
  std::vector<ForecastRecord> records;
  std::size_t n_omitted = 0;  // dates without any complete-precursor cell
};

// Applies the frozen model to each date's precursors and averages the
// per-cell fitted values. Output follows the order of `dates`.
RollResult roll_forecast(const ForestModel& model, const ObservationTable& table,
                         std::span<const Date> dates, int lag_days, int threads = 1);

// Inclusive range of consecutive dates.
std::vector<Date> date_range(Date from, Date to);

// Series keyed by target date, sorted ascending. DomainError on empty input
// or duplicate target dates.
DailySeries build_daily_series(const std::vector<ForecastRecord>& records);

// Leave-future-out intervals: the record at position t (target-date order)
// gets the interval computed from the t earlier days. Records with fewer
// than kMinSeriesLength earlier days keep no interval.
std::vector<ForecastRecord> attach_intervals(std::vector<ForecastRecord> records, double alpha,
                                             const ForestParams& forest_params = default_series_forest_params(),
                                             const ForestParams& qrf_params = default_series_qrf_params());

inline constexpr std::string_view kForecastsHeader =
    "precursor_date,target_date,fitted_q95_k,lower_k,upper_k,alpha,n_cells";

std::string serialize_forecasts(const std::vector<ForecastRecord>& records);
std::vector<ForecastRecord> read_forecasts(const std::filesystem::path& path);

}  // namespace heatcast
