#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "heatcast/errors.hpp"

namespace heatcast {

// Calendar day in the proleptic Gregorian calendar.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::chrono::sys_days days) : days_(days) {}

  // Throws DomainError for impossible dates (2023-02-30, month 13, ...).
  static Date from_ymd(int year, unsigned month, unsigned day);
  // Strict ISO-8601 "YYYY-MM-DD".
  static Date parse(std::string_view iso);

  std::string to_string() const;
  std::chrono::year_month_day ymd() const { return std::chrono::year_month_day{days_}; }
  std::chrono::sys_days sys_days() const { return days_; }

  // Same month-day shifted by whole years; Feb 29 clamps to Feb 28.
  Date add_years(int years) const;

  friend constexpr Date operator+(Date d, long n) {
    return Date{d.days_ + std::chrono::days{n}};
  }
  friend constexpr Date operator-(Date d, long n) {
    return Date{d.days_ - std::chrono::days{n}};
  }
  friend constexpr long operator-(Date a, Date b) { return (a.days_ - b.days_).count(); }
  friend constexpr auto operator<=>(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

struct GeoPoint {
  double lat_deg = 0.0;
  double lon_deg = 0.0;

  // Validates finiteness and the [-90, 90] x [-180, 180] box.
  static GeoPoint make(double lat_deg, double lon_deg);
  friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

inline constexpr std::size_t kNumPrecursors = 4;

// Predictors measured lag_days before the response window. Order of
// as_features() is the model's feature order everywhere in the project.
struct PrecursorVector {
  double elevation_m = 0.0;
  double temp_l8_k = 0.0;
  double h2o_l8 = 0.0;
  double tropopause_m = 0.0;

  std::array<double, kNumPrecursors> as_features() const {
    return {elevation_m, temp_l8_k, h2o_l8, tropopause_m};
  }
  static PrecursorVector from_features(std::span<const double> x);

  // Throws DomainError when a value is non-finite, temp <= 0 or h2o outside [0,1].
  void validate() const;
  friend bool operator==(const PrecursorVector&, const PrecursorVector&) = default;
};

inline constexpr std::array<std::string_view, kNumPrecursors> kPrecursorNames = {
    "elevation_m", "temp_l8_k", "h2o_l8", "tropopause_m"};

// Per-field optional precursors as read from an observation file.
struct PrecursorFields {
  std::optional<double> elevation_m;
  std::optional<double> temp_l8_k;
  std::optional<double> h2o_l8;
  std::optional<double> tropopause_m;

  std::optional<PrecursorVector> complete() const;
  friend bool operator==(const PrecursorFields&, const PrecursorFields&) = default;
};

struct GridCellRecord {
  std::string cell_id;
  GeoPoint location;
  Date date;
  PrecursorFields precursors;
  std::optional<double> surface_temp_k;

  friend bool operator==(const GridCellRecord&, const GridCellRecord&) = default;
};

// Surface temperatures outside (0, kMaxSurfaceTempK) are treated as corrupt.
inline constexpr double kMaxSurfaceTempK = 400.0;

enum class ExposureCondition { Reported, Faux };

std::string_view to_string(ExposureCondition c);
ExposureCondition parse_condition(std::string_view s);

double kelvin_to_fahrenheit(double kelvin);

// Type-7 (linear interpolation) sample quantile. Throws DomainError on empty
// input, non-finite values or q outside [0, 1].
double empirical_quantile(std::span<const double> values, double q);

}  // namespace heatcast
