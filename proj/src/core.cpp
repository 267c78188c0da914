#include "heatcast/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <vector>

namespace heatcast {

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
  }
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

Date Date::from_ymd(int year, unsigned month, unsigned day) {
  const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                                        std::chrono::day{day}};
  if (!ymd.ok()) {
    throw DomainError("invalid calendar date " + std::to_string(year) + "-" +
                      std::to_string(month) + "-" + std::to_string(day));
  }
  return Date{std::chrono::sys_days{ymd}};
}

Date Date::parse(std::string_view iso) {
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw DomainError("date '" + std::string(iso) + "' is not YYYY-MM-DD");
  }
  unsigned y = 0, m = 0, d = 0;
  if (!parse_uint(iso.substr(0, 4), y) || !parse_uint(iso.substr(5, 2), m) ||
      !parse_uint(iso.substr(8, 2), d)) {
    throw DomainError("date '" + std::string(iso) + "' is not YYYY-MM-DD");
  }
  return from_ymd(static_cast<int>(y), m, d);
}

std::string Date::to_string() const {
  const auto v = ymd();
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(v.year()),
                static_cast<unsigned>(v.month()), static_cast<unsigned>(v.day()));
  return buf;
}

Date Date::add_years(int years) const {
  auto v = ymd();
  std::chrono::year_month_day shifted = v + std::chrono::years{years};
  if (!shifted.ok()) {
    shifted = std::chrono::year_month_day{shifted.year() / shifted.month() / std::chrono::last};
  }
  return Date{std::chrono::sys_days{shifted}};
}

GeoPoint GeoPoint::make(double lat_deg, double lon_deg) {
  if (!std::isfinite(lat_deg) || lat_deg < -90.0 || lat_deg > 90.0) {
    throw DomainError("latitude " + std::to_string(lat_deg) + " outside [-90, 90]");
  }
  if (!std::isfinite(lon_deg) || lon_deg < -180.0 || lon_deg > 180.0) {
    throw DomainError("longitude " + std::to_string(lon_deg) + " outside [-180, 180]");
  }
  return GeoPoint{lat_deg, lon_deg};
}

PrecursorVector PrecursorVector::from_features(std::span<const double> x) {
  if (x.size() != kNumPrecursors) {
    throw DomainError("precursor vector needs " + std::to_string(kNumPrecursors) + " values");
  }
  return PrecursorVector{x[0], x[1], x[2], x[3]};
}

void PrecursorVector::validate() const {
  const auto f = as_features();
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) {
      throw DomainError(std::string(kPrecursorNames[i]) + " is not finite");
    }
  }
  if (temp_l8_k <= 0.0) throw DomainError("temp_l8_k must be positive");
  if (h2o_l8 < 0.0 || h2o_l8 > 1.0) throw DomainError("h2o_l8 must lie in [0, 1]");
}

std::optional<PrecursorVector> PrecursorFields::complete() const {
  if (!elevation_m || !temp_l8_k || !h2o_l8 || !tropopause_m) return std::nullopt;
  return PrecursorVector{*elevation_m, *temp_l8_k, *h2o_l8, *tropopause_m};
}

std::string_view to_string(ExposureCondition c) {
  return c == ExposureCondition::Reported ? "reported" : "faux";
}

ExposureCondition parse_condition(std::string_view s) {
  if (s == "reported") return ExposureCondition::Reported;
  if (s == "faux") return ExposureCondition::Faux;
  throw DomainError("unknown exposure condition '" + std::string(s) + "'");
}

double kelvin_to_fahrenheit(double kelvin) {
  if (!std::isfinite(kelvin) || kelvin < 0.0) {
    throw DomainError("temperature must be finite and non-negative Kelvin");
  }
  return (kelvin - 273.15) * 9.0 / 5.0 + 32.0;
}

double empirical_quantile(std::span<const double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty sequence");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("quantile probability outside [0, 1]");
  std::vector<double> v(values.begin(), values.end());
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError("quantile input contains a non-finite value");
  }

  // 0-based position of the interpolation point.
  const double h = static_cast<double>(v.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double frac = h - static_cast<double>(lo);

  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
  const double x_lo = v[lo];
  if (frac == 0.0 || lo + 1 >= v.size()) return x_lo;
  const double x_hi = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
  return x_lo + frac * (x_hi - x_lo);
}

}  // namespace heatcast
