#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heatcast/core.hpp"
#include "heatcast/design.hpp"
#include "heatcast/forest.hpp"

namespace heatcast {

enum class IntervalMethod { Alg1InSample, SplitCQR };

std::string_view to_string(IntervalMethod m);
IntervalMethod parse_interval_method(std::string_view s);

// After crossing correction lower <= upper always holds; fitted may fall
// outside [lower, upper].
struct PredictionInterval {
  double fitted = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.25;  // miscoverage
  IntervalMethod method = IntervalMethod::Alg1InSample;

  double half_width() const { return 0.5 * (upper - lower); }
  bool contains(double y) const { return lower <= y && y <= upper; }
};

// Mean fitted Q(.95) per day.
struct DailySeries {
  std::vector<Date> days;
  std::vector<double> values;

  std::size_t size() const { return days.size(); }
  void validate() const;  // strictly increasing days, equal lengths, finite values
};

inline constexpr std::size_t kMinSeriesLength = 10;

// Forest settings for the daily series; min_leaf is larger than the grid-cell
// default because the series is short and in-sample residuals shrink quickly.
ForestParams default_series_forest_params();
ForestParams default_series_qrf_params();

// Residual-quantile interval: forest on the series with the day offset as the
// only predictor, in-sample residuals, quantile forest on (day -> residual),
// interval = fitted(new_day) + [q_{alpha/2}, q_{1-alpha/2}].
PredictionInterval alg1_daily_interval(const DailySeries& series, Date new_day, double alpha,
                                       const ForestParams& forest_params = default_series_forest_params(),
                                       const ForestParams& qrf_params = default_series_qrf_params());

// ceil((1 - alpha)(n + 1))-th smallest score, +inf when that rank exceeds n.
double conformal_score_quantile(std::span<const double> scores, double alpha);

// Split conformalized quantile regression: quantile forest on `train`,
// conformity scores on `calib`.
PredictionInterval split_cqr_interval(const Dataset& train, const Dataset& calib,
                                      std::span<const double> x_new, double alpha,
                                      const ForestParams& qrf_params = ForestParams{});
std::vector<PredictionInterval> split_cqr_intervals(const Dataset& train, const Dataset& calib,
                                                    const Dataset& targets, double alpha,
                                                    const ForestParams& qrf_params = ForestParams{});

struct KeyedInterval {
  std::size_t row = 0;  // index into the caller's rows
  PredictionInterval interval;
};

// Intervals for the top `top_fraction` of rows by fitted value, with a
// quantile forest on (precursors -> in-sample residual) over that subset.
std::vector<KeyedInterval> grid_cell_intervals(const ForestModel& model,
                                               const std::vector<DesignRow>& rows, double alpha,
                                               double top_fraction,
                                               const ForestParams& qrf_params = ForestParams{});

inline constexpr std::string_view kIntervalsHeader = "key,fitted_k,lower_k,upper_k,alpha,method";

struct IntervalRecord {
  std::string key;  // ISO date or "<cell_id>@<condition>"
  PredictionInterval interval;
};

std::string serialize_intervals(const std::vector<IntervalRecord>& records);
std::vector<IntervalRecord> read_intervals(const std::filesystem::path& path);

}  // namespace heatcast
