#include "heatcast/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include "heatcast/csv.hpp"

namespace heatcast {

namespace {

std::optional<ForecastRecord> forecast_one(const ForestModel& model, const ObservationTable& table,
                                           Date date, int lag_days) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : table.rows) {
    if (r.date != date) continue;
    const auto pv = r.precursors.complete();
    if (!pv) continue;
    sum += model.predict_mean(pv->as_features());
    ++n;
  }
  if (n == 0) return std::nullopt;
  ForecastRecord rec;
  rec.precursor_date = date;
  rec.target_date = date + lag_days;
  rec.fitted_q95_k = sum / static_cast<double>(n);
  rec.n_cells = n;
  return rec;
}

}  // namespace

RollResult roll_forecast(const ForestModel& model, const ObservationTable& table,
                         std::span<const Date> dates, int lag_days, int threads) {
  if (lag_days < 0) throw DomainError("lag_days must be >= 0");
  if (model.n_features() != kNumPrecursors) {
    throw DomainError("model was not trained on the four-precursor feature space");
  }
  std::vector<std::optional<ForecastRecord>> slots(dates.size());
  std::size_t n_workers = threads <= 0 ? std::thread::hardware_concurrency()
                                       : static_cast<std::size_t>(threads);
  n_workers = std::clamp<std::size_t>(n_workers, 1, std::max<std::size_t>(1, dates.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < dates.size(); i = next++) {
      slots[i] = forecast_one(model, table, dates[i], lag_days);
    }
  };
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_workers; ++k) pool.emplace_back(work);
  }

  RollResult out;
  for (auto& s : slots) {
    if (s) {
      out.records.push_back(std::move(*s));
    } else {
      ++out.n_omitted;
    }
  }
  return out;
}

std::vector<Date> date_range(Date from, Date to) {
  if (to < from) throw DomainError("date range ends before it starts");
  std::vector<Date> out;
  for (Date d = from; d <= to; d = d + 1) out.push_back(d);
  return out;
}

DailySeries build_daily_series(const std::vector<ForecastRecord>& records) {
  if (records.empty()) throw DomainError("no forecast records");
  std::vector<const ForecastRecord*> sorted;
  for (const auto& r : records) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto* a, const auto* b) { return a->target_date < b->target_date; });
  DailySeries s;
  for (const auto* r : sorted) {
    if (!s.days.empty() && s.days.back() == r->target_date) {
      throw DomainError("duplicate target date " + r->target_date.to_string());
    }
    s.days.push_back(r->target_date);
    s.values.push_back(r->fitted_q95_k);
  }
  return s;
}

std::vector<ForecastRecord> attach_intervals(std::vector<ForecastRecord> records, double alpha,
                                             const ForestParams& forest_params,
                                             const ForestParams& qrf_params) {
  const auto series = build_daily_series(records);
  if (series.size() < kMinSeriesLength) {
    throw DomainError("series needs at least " + std::to_string(kMinSeriesLength) + " days");
  }
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.target_date < b.target_date; });
  for (std::size_t t = kMinSeriesLength; t < records.size(); ++t) {
    DailySeries prefix;
    prefix.days.assign(series.days.begin(), series.days.begin() + static_cast<std::ptrdiff_t>(t));
    prefix.values.assign(series.values.begin(), series.values.begin() + static_cast<std::ptrdiff_t>(t));
    records[t].interval =
        alg1_daily_interval(prefix, records[t].target_date, alpha, forest_params, qrf_params);
  }
  return records;
}

std::string serialize_forecasts(const std::vector<ForecastRecord>& records) {
  std::ostringstream out;
  out << kForecastsHeader << '\n';
  for (const auto& r : records) {
    out << r.precursor_date.to_string() << ',' << r.target_date.to_string() << ','
        << csv::format(r.fitted_q95_k) << ',';
    if (r.interval) {
      out << csv::format(r.interval->lower) << ',' << csv::format(r.interval->upper) << ','
          << csv::format(r.interval->alpha);
    } else {
      out << ",,";
    }
    out << ',' << r.n_cells << '\n';
  }
  return out.str();
}

std::vector<ForecastRecord> read_forecasts(const std::filesystem::path& path) {
  std::vector<ForecastRecord> out;
  for (const auto& row : csv::read_table(path, kForecastsHeader)) {
    try {
      const auto& f = row.fields;
      if (f.size() != 7) throw DomainError("expected 7 fields");
      ForecastRecord r;
      r.precursor_date = Date::parse(f[0]);
      r.target_date = Date::parse(f[1]);
      r.fitted_q95_k = csv::parse_double(f[2]);
      const auto lo = csv::parse_optional(f[3]);
      const auto hi = csv::parse_optional(f[4]);
      const auto a = csv::parse_optional(f[5]);
      if (lo && hi && a) {
        r.interval = PredictionInterval{r.fitted_q95_k, *lo, *hi, *a, IntervalMethod::Alg1InSample};
      } else if (lo || hi || a) {
        throw DomainError("interval fields must be all present or all empty");
      }
      const long n = csv::parse_long(f[6]);
      if (n < 1) throw DomainError("n_cells must be >= 1");
      r.n_cells = static_cast<std::size_t>(n);
      out.push_back(r);
    } catch (const DomainError& e) {
      throw ParseError(row.line, e.what());
    }
  }
  return out;
}

}  // namespace heatcast
