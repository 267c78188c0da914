#include "heatcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "heatcast/diagnostics.hpp"

namespace heatcast::synth {

namespace {

constexpr double kDailyPersistence = 0.8;

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::string cell_name(std::string_view prefix, std::size_t i, std::size_t n) {
  const int width = std::max(4, static_cast<int>(std::to_string(n).size()));
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*s%0*zu", static_cast<int>(prefix.size()), prefix.data(), width, i);
  return buf;
}

// Smooth annual cycle peaking in late July, in Kelvin.
double seasonal_k(Date d) {
  const auto ymd = d.ymd();
  const Date jan1 = Date::from_ymd(static_cast<int>(ymd.year()), 1, 1);
  const double doy = static_cast<double>(d - jan1);
  return 1.5 * std::sin(2.0 * std::numbers::pi * (doy - 110.0) / 365.0);
}

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace

double HeatwaveSpec::at(double day) const {
  const double u = (day - static_cast<double>(peak_day)) / width_days;
  return amplitude_k * std::max(0.0, 1.0 - u * u);
}

void SynthSpec::validate() const {
  if (n_cells < 1) throw DomainError("n_cells must be >= 1");
  if (n_days < 1) throw DomainError("n_days must be >= 1");
  if (!(correlation_length_km > 0.0)) throw DomainError("correlation_length_km must be positive");
  if (!(noise_sd_k >= 0.0)) throw DomainError("noise_sd_k must be non-negative");
  if (lag_days < 0) throw DomainError("lag_days must be >= 0");
  if (!(missing_fraction >= 0.0 && missing_fraction < 1.0)) {
    throw DomainError("missing_fraction must lie in [0, 1)");
  }
  if (heatwave) {
    if (!(heatwave->amplitude_k >= 0.0)) throw DomainError("heatwave amplitude must be >= 0");
    if (!(heatwave->width_days > 0.0)) throw DomainError("heatwave width must be positive");
  }
  GeoPoint::make(bbox.lat_min, bbox.lon_min);
  GeoPoint::make(bbox.lat_max, bbox.lon_max);
  if (!(bbox.lat_min < bbox.lat_max) || !(bbox.lon_min < bbox.lon_max)) {
    throw DomainError("bounding box is empty");
  }
}

double surface_response(const PrecursorVector& p) {
  return 285.0 + (p.temp_l8_k - 243.0) - 8.0 * std::tanh(p.elevation_m / 600.0) +
         5.0 * p.h2o_l8 * p.h2o_l8 + 0.0015 * (p.tropopause_m - 11000.0);
}

std::vector<GeoPoint> place_cells(std::size_t n, const BoundingBox& bbox, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> lat(bbox.lat_min, bbox.lat_max);
  std::uniform_real_distribution<double> lon(bbox.lon_min, bbox.lon_max);
  std::vector<GeoPoint> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = lat(rng);
    const double b = lon(rng);
    pts.push_back(GeoPoint{a, b});
  }
  return pts;
}

Eigen::MatrixXd exponential_covariance_factor(std::span<const GeoPoint> points,
                                              double correlation_length_km) {
  if (!(correlation_length_km > 0.0)) throw DomainError("correlation length must be positive");
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    cov(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double d = haversine_km(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(j)]);
      cov(i, j) = cov(j, i) = std::exp(-d / correlation_length_km);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  for (double jitter = 1e-8; llt.info() != Eigen::Success; jitter *= 10.0) {
    if (jitter > 1e-4 * 1.0000001) {
      throw DomainError("covariance matrix is not positive definite even with jitter");
    }
    Eigen::MatrixXd jittered = cov;
    jittered.diagonal().array() += jitter;
    llt.compute(jittered);
  }
  return llt.matrixL();
}

std::vector<double> gaussian_field(const Eigen::MatrixXd& factor, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd z(factor.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(rng);
  const Eigen::VectorXd f = factor.triangularView<Eigen::Lower>() * z;
  return {f.data(), f.data() + f.size()};
}

SynthOutput generate_with_truth(const SynthSpec& spec) {
  spec.validate();
  const auto n = spec.n_cells;

  std::mt19937_64 geo(mix(spec.field_seed, 0x67656f));
  const auto cells = place_cells(n, spec.bbox, geo);
  const auto factor = exponential_covariance_factor(cells, spec.correlation_length_km);
  const auto elev_field = gaussian_field(factor, geo);
  const auto temp_field = gaussian_field(factor, geo);
  const auto h2o_field = gaussian_field(factor, geo);
  const auto trop_field = gaussian_field(factor, geo);

  std::mt19937_64 weather(mix(spec.seed, 0x646179));
  std::mt19937_64 noise_rng(mix(spec.seed, 0x6e6f697365));
  std::mt19937_64 gap_rng(mix(spec.seed, 0x676170));
  std::normal_distribution<double> normal;
  std::bernoulli_distribution missing(spec.missing_fraction);

  // Internal day j covers calendar day start + (j - lag); precursors on day j
  // drive surface temperature on day j + lag.
  const auto lag = static_cast<std::size_t>(spec.lag_days);
  const auto n_internal = static_cast<std::size_t>(spec.n_days) + lag;
  std::vector<std::vector<PrecursorVector>> precursors(n_internal, std::vector<PrecursorVector>(n));
  std::vector<double> anom_t(n, 0.0), anom_w(n, 0.0), anom_p(n, 0.0);
  const double innovation = std::sqrt(1.0 - kDailyPersistence * kDailyPersistence);
  for (std::size_t j = 0; j < n_internal; ++j) {
    auto step = [&](std::vector<double>& a) {
      const auto e = gaussian_field(factor, weather);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = j == 0 ? e[i] : kDailyPersistence * a[i] + innovation * e[i];
      }
    };
    step(anom_t);
    step(anom_w);
    step(anom_p);
    const Date measured = spec.start_date + (static_cast<long>(j) - static_cast<long>(lag));
    const Date target = measured + static_cast<long>(lag);
    const double target_offset = static_cast<double>(target - spec.start_date);
    const double shift = seasonal_k(target) + (spec.heatwave ? spec.heatwave->at(target_offset) : 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& p = precursors[j][i];
      p.elevation_m = std::max(0.0, 700.0 + 450.0 * elev_field[i]);
      p.temp_l8_k = 243.0 + 2.5 * temp_field[i] + 1.2 * anom_t[i] + shift;
      p.h2o_l8 = logistic(0.8 * h2o_field[i] + 0.5 * anom_w[i]);
      p.tropopause_m = 11000.0 + 600.0 * trop_field[i] + 300.0 * anom_p[i];
    }
  }

  SynthOutput out;
  std::vector<GridCellRecord> rows;
  rows.reserve(n * static_cast<std::size_t>(spec.n_days));
  std::vector<std::pair<std::string, double>> truth;
  for (std::size_t i = 0; i < n; ++i) {
    const auto id = cell_name("c", i, n);
    for (int d = 0; d < spec.n_days; ++d) {
      const auto j_today = static_cast<std::size_t>(d) + lag;
      const auto& driver = precursors[static_cast<std::size_t>(d)][i];
      const auto& today = precursors[j_today][i];
      const double clean = surface_response(driver);
      const double observed = clean + spec.noise_sd_k * normal(noise_rng);

      GridCellRecord r;
      r.cell_id = id;
      r.location = cells[i];
      r.date = spec.start_date + d;
      r.precursors.elevation_m = today.elevation_m;
      r.precursors.temp_l8_k = today.temp_l8_k;
      r.precursors.h2o_l8 = today.h2o_l8;
      r.precursors.tropopause_m = today.tropopause_m;
      r.surface_temp_k = observed;
      if (spec.missing_fraction > 0.0) {
        if (missing(gap_rng)) r.precursors.elevation_m.reset();
        if (missing(gap_rng)) r.precursors.temp_l8_k.reset();
        if (missing(gap_rng)) r.precursors.h2o_l8.reset();
        if (missing(gap_rng)) r.precursors.tropopause_m.reset();
        if (missing(gap_rng)) r.surface_temp_k.reset();
      }
      rows.push_back(std::move(r));
      out.noise_free_k.push_back(clean);
    }
  }
  // Cell names are zero-padded and days ascend, so rows are already in key order.
  out.table = make_table(std::move(rows));
  out.table.source_path = "synthetic";
  return out;
}

ObservationTable generate(const SynthSpec& spec) { return generate_with_truth(spec).table; }

std::vector<DesignRow> generate_regression_rows(const RegressionSpec& spec) {
  if (spec.n_rows < 2) throw DomainError("n_rows must be >= 2");
  if (!(spec.target_r2 > 0.0 && spec.target_r2 < 1.0)) throw DomainError("target_r2 must lie in (0, 1)");
  std::mt19937_64 rng(mix(spec.seed, 0x726567));
  std::normal_distribution<double> normal;
  BoundingBox bbox;
  const auto cells = place_cells(spec.n_rows, bbox, rng);

  std::vector<DesignRow> rows(spec.n_rows);
  std::vector<double> signal(spec.n_rows);
  const double temp_sd = std::hypot(2.5, 1.2);
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    auto& r = rows[i];
    r.cell_id = cell_name("r", i, spec.n_rows);
    r.condition = i % 2 == 0 ? ExposureCondition::Reported : ExposureCondition::Faux;
    r.location = cells[i];
    r.precursors.elevation_m = std::max(0.0, 700.0 + 450.0 * normal(rng));
    r.precursors.temp_l8_k = 243.0 + temp_sd * normal(rng);
    r.precursors.h2o_l8 = logistic(std::hypot(0.8, 0.5) * normal(rng));
    r.precursors.tropopause_m = 11000.0 + std::hypot(600.0, 300.0) * normal(rng);
    signal[i] = surface_response(r.precursors);
  }

  double mean = 0.0;
  for (double s : signal) mean += s;
  mean /= static_cast<double>(signal.size());
  double var = 0.0;
  for (double s : signal) var += (s - mean) * (s - mean);
  var /= static_cast<double>(signal.size());
  const double noise_var = var * (1.0 - spec.target_r2) / spec.target_r2;

  // Mid-range profile: sd grows toward the centre of the signal distribution
  // while keeping the average noise variance at noise_var.
  std::vector<double> profile(spec.n_rows, 1.0);
  if (spec.noise == NoiseProfile::MidRange) {
    const double spread = std::sqrt(var);
    double mean_sq = 0.0;
    for (std::size_t i = 0; i < spec.n_rows; ++i) {
      const double u = (signal[i] - mean) / spread;
      profile[i] = 0.25 + 1.75 * std::exp(-u * u);
      mean_sq += profile[i] * profile[i];
    }
    mean_sq /= static_cast<double>(spec.n_rows);
    for (auto& p : profile) p /= std::sqrt(mean_sq);
  }
  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    rows[i].response_q95_k = signal[i] + std::sqrt(noise_var) * profile[i] * normal(rng);
  }
  return rows;
}

DailySeries exchangeable_series(std::size_t n_days, double mean_k, double sd_k, std::uint64_t seed,
                                Date start) {
  std::mt19937_64 rng(mix(seed, 0x736572));
  std::normal_distribution<double> normal(mean_k, sd_k);
  DailySeries s;
  for (std::size_t i = 0; i < n_days; ++i) {
    s.days.push_back(start + static_cast<long>(i));
    s.values.push_back(normal(rng));
  }
  return s;
}

}  // namespace heatcast::synth
