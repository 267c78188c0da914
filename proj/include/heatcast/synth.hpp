#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "heatcast/conformal.hpp"
#include "heatcast/design.hpp"
#include "heatcast/ingest.hpp"

namespace heatcast::synth {

struct BoundingBox {
  double lat_min = 50.0;
  double lat_max = 65.0;
  double lon_min = 75.0;
  double lon_max = 140.0;
};

// Concave parabola added to surface temperatures around peak_day (a day
// offset from start_date): amplitude * max(0, 1 - ((d - peak) / width)^2).
struct HeatwaveSpec {
  int peak_day = 20;
  double amplitude_k = 6.0;
  double width_days = 4.0;

  double at(double day) const;
};

struct SynthSpec {
  std::size_t n_cells = 300;
  BoundingBox bbox;
  int n_days = 61;
  Date start_date = Date::from_ymd(2023, 5, 1);
  // Geography (cell placement and static fields); share it between the two
  // exposure years so the cells match.
  std::uint64_t field_seed = 1;
  // Daily weather and measurement noise.
  std::uint64_t seed = 1;
  double correlation_length_km = 150.0;
  double noise_sd_k = 1.0;
  std::optional<HeatwaveSpec> heatwave;
  // Precursors on day d drive surface temperature on day d + lag_days.
  int lag_days = 14;
  // Independent per-field missingness probability.
  double missing_fraction = 0.0;

  void validate() const;
};

struct SynthOutput {
  ObservationTable table;
  // Surface temperature without measurement noise, aligned with table.rows.
  std::vector<double> noise_free_k;
};

// Deterministic given its settings. Throws DomainError when the covariance cannot
// be factorized even with 1e-4 diagonal jitter.
ObservationTable generate(const SynthSpec& spec);
SynthOutput generate_with_truth(const SynthSpec& spec);

// Nonlinear surface response to precursors:
//   285 + (temp_l8 - 243) - 8 tanh(elevation / 600) + 5 h2o^2 + 0.0015 (tropopause - 11000)
// The tanh term saturates with elevation.
double surface_response(const PrecursorVector& p);

std::vector<GeoPoint> place_cells(std::size_t n, const BoundingBox& bbox, std::mt19937_64& rng);

// Lower Cholesky factor of exp(-d / correlation_length) over the points,
// with escalating jitter 1e-8 .. 1e-4 on failure.
Eigen::MatrixXd exponential_covariance_factor(std::span<const GeoPoint> points,
                                              double correlation_length_km);

// Zero-mean unit-variance draw L z.
std::vector<double> gaussian_field(const Eigen::MatrixXd& factor, std::mt19937_64& rng);

enum class NoiseProfile { Homoscedastic, MidRange };

struct RegressionSpec {
  std::size_t n_rows = 900;
  std::uint64_t seed = 1;
  // Share of response variance carried by surface_response.
  double target_r2 = 0.65;
  NoiseProfile noise = NoiseProfile::Homoscedastic;
};

// Design rows at the 900-row scale, drawn directly from the precursor marginals, with
// response = surface_response + noise sized to hit target_r2.
std::vector<DesignRow> generate_regression_rows(const RegressionSpec& spec);

// Exchangeable daily series: mean_k + N(0, sd_k) i.i.d. over n_days.
DailySeries exchangeable_series(std::size_t n_days, double mean_k, double sd_k, std::uint64_t seed,
                                Date start = Date::from_ymd(2023, 5, 1));

}  // namespace heatcast::synth
