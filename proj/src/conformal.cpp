#include "heatcast/conformal.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "heatcast/csv.hpp"

namespace heatcast {

std::string_view to_string(IntervalMethod m) {
  return m == IntervalMethod::Alg1InSample ? "alg1_in_sample" : "split_cqr";
}

IntervalMethod parse_interval_method(std::string_view s) {
  if (s == "alg1_in_sample") return IntervalMethod::Alg1InSample;
  if (s == "split_cqr") return IntervalMethod::SplitCQR;
  throw DomainError("unknown interval method '" + std::string(s) + "'");
}

void DailySeries::validate() const {
  if (days.size() != values.size()) throw DomainError("series days and values differ in length");
  for (std::size_t i = 1; i < days.size(); ++i) {
    if (!(days[i - 1] < days[i])) throw DomainError("series days must be strictly increasing");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("series contains a non-finite value");
  }
}

ForestParams default_series_forest_params() {
  ForestParams p;
  p.n_trees = 500;
  p.min_leaf = 20;
  p.seed = 1;
  return p;
}

ForestParams default_series_qrf_params() {
  ForestParams p;
  p.n_trees = 500;
  p.min_leaf = 20;
  p.seed = 2;
  return p;
}

namespace {

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha <= 0.5)) throw DomainError("alpha must lie in (0, 0.5]");
}

PredictionInterval make_interval(double fitted, double lo, double hi, double alpha,
                                 IntervalMethod method) {
  if (lo > hi) std::swap(lo, hi);
  return PredictionInterval{fitted, lo, hi, alpha, method};
}

}  // namespace

PredictionInterval alg1_daily_interval(const DailySeries& series, Date new_day, double alpha,
                                       const ForestParams& forest_params,
                                       const ForestParams& qrf_params) {
  check_alpha(alpha);
  series.validate();
  if (series.size() < kMinSeriesLength) {
    throw DomainError("series needs at least " + std::to_string(kMinSeriesLength) + " days");
  }

  const Date origin = series.days.front();
  std::vector<double> day_index(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    day_index[i] = static_cast<double>(series.days[i] - origin);
  }
  const auto data = Dataset::from_single_feature("day", day_index, series.values);
  const auto forest = ForestModel::train(data, forest_params);

  std::vector<double> residuals(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    residuals[i] = series.values[i] - forest.predict_mean(data.row(i));
  }
  const double x_new = static_cast<double>(new_day - origin);
  const double fitted = forest.predict_mean(std::span<const double>(&x_new, 1));

  // A constant series leaves nothing for the quantile forest to model.
  if (std::all_of(residuals.begin(), residuals.end(), [](double r) { return r == 0.0; })) {
    return make_interval(fitted, fitted, fitted, alpha, IntervalMethod::Alg1InSample);
  }
  const auto qdata = Dataset::from_single_feature("day", day_index, residuals);
  const auto qrf = ForestModel::train(qdata, qrf_params);
  const double probs[] = {alpha / 2.0, 1.0 - alpha / 2.0};
  const auto q = qrf.predict_quantiles(std::span<const double>(&x_new, 1), probs);
  return make_interval(fitted, fitted + q[0], fitted + q[1], alpha, IntervalMethod::Alg1InSample);
}

double conformal_score_quantile(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw DomainError("calibration set is empty");
  check_alpha(alpha);
  const auto n = scores.size();
  const double rank = std::ceil((1.0 - alpha) * static_cast<double>(n + 1) - 1e-9);
  const auto k = static_cast<std::size_t>(rank);
  if (k > n) return std::numeric_limits<double>::infinity();
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k - 1), sorted.end());
  return sorted[k - 1];
}

std::vector<PredictionInterval> split_cqr_intervals(const Dataset& train, const Dataset& calib,
                                                    const Dataset& targets, double alpha,
                                                    const ForestParams& qrf_params) {
  check_alpha(alpha);
  if (calib.n_rows == 0) throw DomainError("calibration set is empty");
  const auto qrf = ForestModel::train(train, qrf_params);
  const double probs[] = {alpha / 2.0, 1.0 - alpha / 2.0};

  std::vector<double> scores(calib.n_rows);
  for (std::size_t i = 0; i < calib.n_rows; ++i) {
    const auto q = qrf.predict_quantiles(calib.row(i), probs);
    scores[i] = std::max(q[0] - calib.y[i], calib.y[i] - q[1]);
  }
  const double margin = conformal_score_quantile(scores, alpha);

  std::vector<PredictionInterval> out;
  out.reserve(targets.n_rows);
  for (std::size_t i = 0; i < targets.n_rows; ++i) {
    const auto q = qrf.predict_quantiles(targets.row(i), probs);
    out.push_back(make_interval(qrf.predict_mean(targets.row(i)), q[0] - margin, q[1] + margin,
                                alpha, IntervalMethod::SplitCQR));
  }
  return out;
}

PredictionInterval split_cqr_interval(const Dataset& train, const Dataset& calib,
                                      std::span<const double> x_new, double alpha,
                                      const ForestParams& qrf_params) {
  Dataset target;
  target.n_rows = 1;
  target.n_features = x_new.size();
  target.x.assign(x_new.begin(), x_new.end());
  target.y = {0.0};
  target.w = {1.0};
  target.feature_names = train.feature_names;
  return split_cqr_intervals(train, calib, target, alpha, qrf_params).front();
}

std::vector<KeyedInterval> grid_cell_intervals(const ForestModel& model,
                                               const std::vector<DesignRow>& rows, double alpha,
                                               double top_fraction,
                                               const ForestParams& qrf_params) {
  check_alpha(alpha);
  if (!(top_fraction > 0.0 && top_fraction <= 1.0)) {
    throw DomainError("top_fraction must lie in (0, 1]");
  }
  const auto data = Dataset::from_design(rows);
  const auto fitted = model.predict_mean(data);

  const auto n_keep = std::min<std::size_t>(
      rows.size(),
      static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(rows.size()) - 1e-9)));
  if (n_keep < kMinSeriesLength) {
    throw DomainError("interval subset holds fewer than " + std::to_string(kMinSeriesLength) + " rows");
  }
  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitted[a] > fitted[b]; });
  order.resize(n_keep);
  std::sort(order.begin(), order.end());

  Dataset subset;
  subset.n_rows = n_keep;
  subset.n_features = data.n_features;
  subset.feature_names = data.feature_names;
  for (auto i : order) {
    const auto r = data.row(i);
    subset.x.insert(subset.x.end(), r.begin(), r.end());
    subset.y.push_back(data.y[i] - fitted[i]);
    subset.w.push_back(data.w[i]);
  }

  std::vector<KeyedInterval> out;
  out.reserve(n_keep);
  const double probs[] = {alpha / 2.0, 1.0 - alpha / 2.0};
  const bool all_zero = std::all_of(subset.y.begin(), subset.y.end(), [](double r) { return r == 0.0; });
  if (all_zero) {
    for (auto i : order) {
      out.push_back({i, make_interval(fitted[i], fitted[i], fitted[i], alpha, IntervalMethod::Alg1InSample)});
    }
    return out;
  }
  const auto qrf = ForestModel::train(subset, qrf_params);
  for (std::size_t k = 0; k < n_keep; ++k) {
    const auto i = order[k];
    const auto q = qrf.predict_quantiles(subset.row(k), probs);
    out.push_back({i, make_interval(fitted[i], fitted[i] + q[0], fitted[i] + q[1], alpha,
                                    IntervalMethod::Alg1InSample)});
  }
  return out;
}

std::string serialize_intervals(const std::vector<IntervalRecord>& records) {
  std::ostringstream out;
  out << kIntervalsHeader << '\n';
  for (const auto& r : records) {
    const auto& iv = r.interval;
    out << r.key << ',' << csv::format(iv.fitted) << ',' << csv::format(iv.lower) << ','
        << csv::format(iv.upper) << ',' << csv::format(iv.alpha) << ',' << to_string(iv.method) << '\n';
  }
  return out.str();
}

std::vector<IntervalRecord> read_intervals(const std::filesystem::path& path) {
  std::vector<IntervalRecord> out;
  for (const auto& row : csv::read_table(path, kIntervalsHeader)) {
    try {
      const auto& f = row.fields;
      if (f.size() != 6) throw DomainError("expected 6 fields");
      IntervalRecord r;
      r.key = f[0];
      r.interval = PredictionInterval{csv::parse_double(f[1]), csv::parse_double(f[2]),
                                      csv::parse_double(f[3]), csv::parse_double(f[4]),
                                      parse_interval_method(f[5])};
      if (r.interval.lower > r.interval.upper) throw DomainError("lower exceeds upper");
      out.push_back(std::move(r));
    } catch (const DomainError& e) {
      throw ParseError(row.line, e.what());
    }
  }
  return out;
}

}  // namespace heatcast
