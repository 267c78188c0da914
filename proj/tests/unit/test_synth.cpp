#include <doctest.h>

#include <cmath>

#include "heatcast/design.hpp"
#include "heatcast/diagnostics.hpp"
#include "heatcast/synth.hpp"

using namespace heatcast;

TEST_CASE("generation is a pure function of its settings") {
  synth::SynthSpec spec;
  spec.n_cells = 40;
  spec.n_days = 10;
  spec.missing_fraction = 0.1;
  spec.heatwave = synth::HeatwaveSpec{};
  const auto a = serialize_observations(synth::generate(spec));
  CHECK(a == serialize_observations(synth::generate(spec)));

  auto other = spec;
  other.seed = 2;
  const auto b = synth::generate(other);
  CHECK(serialize_observations(b) != a);
  const auto first = synth::generate(spec);
  REQUIRE(b.rows.size() == first.rows.size());
  for (std::size_t i = 0; i < b.rows.size(); ++i) {
    CHECK(b.rows[i].cell_id == first.rows[i].cell_id);
    CHECK(b.rows[i].location == first.rows[i].location);
  }
}

TEST_CASE("table shape, ids and missingness") {
  synth::SynthSpec spec;
  spec.n_cells = 120;
  spec.n_days = 30;
  spec.missing_fraction = 0.2;
  const auto out = synth::generate_with_truth(spec);
  CHECK(out.table.rows.size() == 3600);
  CHECK(out.noise_free_k.size() == 3600);
  CHECK(out.table.rows.front().cell_id == "c0000");
  CHECK(out.table.rows.front().date == spec.start_date);
  CHECK(out.table.rows.back().date == spec.start_date + 29);
  std::size_t gaps = 0;
  for (const auto& r : out.table.rows) {
    gaps += !r.surface_temp_k.has_value();
    CHECK(r.location.lat_deg >= spec.bbox.lat_min);
    CHECK(r.location.lat_deg <= spec.bbox.lat_max);
    if (r.precursors.h2o_l8) {
      CHECK(*r.precursors.h2o_l8 > 0.0);
      CHECK(*r.precursors.h2o_l8 < 1.0);
    }
    if (r.precursors.elevation_m) CHECK(*r.precursors.elevation_m >= 0.0);
  }
  const double frac = static_cast<double>(gaps) / 3600.0;
  CHECK(frac > 0.17);
  CHECK(frac < 0.23);
}

TEST_CASE("surface temperature follows the lagged precursors") {
  synth::SynthSpec spec;
  spec.n_cells = 30;
  spec.n_days = 40;
  spec.noise_sd_k = 0.0;
  const auto out = synth::generate_with_truth(spec);
  for (std::size_t i = 0; i < out.table.rows.size(); ++i) {
    const auto& r = out.table.rows[i];
    CHECK(*r.surface_temp_k == out.noise_free_k[i]);
    const long offset = r.date - spec.start_date;
    if (offset < spec.lag_days) continue;
    const auto* driver = out.table.find(r.cell_id, r.date - spec.lag_days);
    REQUIRE(driver != nullptr);
    CHECK(*r.surface_temp_k == doctest::Approx(synth::surface_response(*driver->precursors.complete())).epsilon(1e-12));
  }
}

TEST_CASE("zero-amplitude heat wave stays inside the seasonal envelope") {
  for (std::uint64_t s = 1; s <= 50; ++s) {
    synth::SynthSpec spec;
    spec.n_cells = 120;
    spec.field_seed = s;
    spec.seed = 2 * s;
    spec.heatwave = synth::HeatwaveSpec{20, 0.0, 4.0};
    const auto out = synth::generate_with_truth(spec);
    for (int d = 0; d < spec.n_days; ++d) {
      std::vector<double> clean;
      for (std::size_t i = 0; i < out.table.rows.size(); ++i) {
        if (out.table.rows[i].date == spec.start_date + d) clean.push_back(out.noise_free_k[i]);
      }
      const double envelope = empirical_quantile(clean, 0.95);
      CHECK(compute_daily_response(out.table, spec.start_date + d, 0.95) <= envelope + 4.0 * spec.noise_sd_k);
    }
  }
}

TEST_CASE("heat wave peak is recoverable from daily Q95") {
  int hits = 0;
  for (std::uint64_t s = 1; s <= 50; ++s) {
    synth::SynthSpec spec;
    spec.field_seed = s;
    spec.seed = 2 * s;
    spec.heatwave = synth::HeatwaveSpec{};
    const auto table = synth::generate(spec);
    int best = -1;
    double best_v = -1e300;
    for (int d = 0; d < spec.n_days; ++d) {
      const double v = compute_daily_response(table, spec.start_date + d, 0.95);
      if (v > best_v) {
        best_v = v;
        best = d;
      }
    }
    hits += std::abs(best - spec.heatwave->peak_day) <= 1;
  }
  CHECK(hits == 50);
}

TEST_CASE("field correlation decays with the correlation length") {
  std::mt19937_64 rng(11);
  const auto pts = synth::place_cells(500, synth::BoundingBox{}, rng);
  const auto factor = synth::exponential_covariance_factor(pts, 150.0);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double d = haversine_km(pts[i], pts[j]);
      if (d >= 140.0 && d < 160.0) pairs.emplace_back(i, j);
    }
  }
  REQUIRE(pairs.size() > 100);
  double cross = 0.0, sq = 0.0;
  for (int draw = 0; draw < 200; ++draw) {
    const auto f = synth::gaussian_field(factor, rng);
    for (const auto& [i, j] : pairs) {
      cross += f[i] * f[j];
      sq += 0.5 * (f[i] * f[i] + f[j] * f[j]);
    }
  }
  CHECK(std::abs(cross / sq - std::exp(-1.0)) <= 0.15);
}

TEST_CASE("covariance factor handles duplicates and rejects bad lengths") {
  const std::vector<GeoPoint> dup{{55, 100}, {55, 100}, {56, 101}};
  const auto l = synth::exponential_covariance_factor(dup, 150.0);
  CHECK(l.rows() == 3);
  CHECK(std::isfinite(l(2, 2)));
  CHECK_THROWS_AS(synth::exponential_covariance_factor(dup, 0.0), DomainError);
}

TEST_CASE("generator settings validation") {
  synth::SynthSpec spec;
  CHECK_NOTHROW(spec.validate());
  auto bad = spec;
  bad.n_cells = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = spec;
  bad.missing_fraction = 1.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = spec;
  bad.bbox.lat_max = 95.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = spec;
  bad.heatwave = synth::HeatwaveSpec{20, 6.0, 0.0};
  CHECK_THROWS_AS(synth::generate(bad), DomainError);
}

TEST_CASE("heat wave profile") {
  const synth::HeatwaveSpec hw;
  CHECK(hw.at(20.0) == 6.0);
  CHECK(hw.at(22.0) == doctest::Approx(4.5));
  CHECK(hw.at(24.0) == 0.0);
  CHECK(hw.at(40.0) == 0.0);
}

TEST_CASE("regression rows") {
  synth::RegressionSpec spec;
  const auto rows = synth::generate_regression_rows(spec);
  REQUIRE(rows.size() == 900);
  CHECK(rows[0].condition == ExposureCondition::Reported);
  CHECK(rows[1].condition == ExposureCondition::Faux);
  double my = 0.0;
  for (const auto& r : rows) my += r.response_q95_k;
  my /= 900.0;
  double ss_tot = 0.0, ss_res = 0.0;
  for (const auto& r : rows) {
    ss_tot += (r.response_q95_k - my) * (r.response_q95_k - my);
    const double e = r.response_q95_k - synth::surface_response(r.precursors);
    ss_res += e * e;
  }
  CHECK(std::abs(1.0 - ss_res / ss_tot - spec.target_r2) <= 0.06);

  auto mid = spec;
  mid.noise = synth::NoiseProfile::MidRange;
  CHECK(synth::generate_regression_rows(mid) != rows);
  CHECK(synth::generate_regression_rows(spec) == rows);
  mid.target_r2 = 1.0;
  CHECK_THROWS_AS(synth::generate_regression_rows(mid), DomainError);
}

TEST_CASE("exchangeable series") {
  const auto s = synth::exchangeable_series(1000, 300.0, 2.0, 3);
  CHECK_NOTHROW(s.validate());
  double m = 0.0;
  for (double v : s.values) m += v;
  CHECK(std::abs(m / 1000.0 - 300.0) < 0.3);
  CHECK(s.days[1] - s.days[0] == 1);
}
