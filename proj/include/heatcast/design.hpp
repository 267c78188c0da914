#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "heatcast/core.hpp"
#include "heatcast/ingest.hpp"

namespace heatcast {

inline constexpr std::string_view kDesignHeader =
    "cell_id,condition,lat_deg,lon_deg,elevation_m,temp_l8_k,h2o_l8,tropopause_m,response_q95_k,"
    "weight";

// Response window and precursor lag for one exposure condition.
struct DesignSpec {
  Date window_start;
  int window_days = 14;
  int lag_days = 14;
  double q = 0.95;
  int min_days_present = 8;

  void validate() const;
  Date precursor_date() const { return window_start - lag_days; }
  // Same month-day `years` later (negative for earlier); used for the faux year.
  DesignSpec shifted_years(int years) const;
};

struct DesignRow {
  std::string cell_id;
  ExposureCondition condition = ExposureCondition::Reported;
  GeoPoint location;
  PrecursorVector precursors;
  double response_q95_k = 0.0;
  double weight = 1.0;

  friend bool operator==(const DesignRow&, const DesignRow&) = default;
};

// Q(q) of the cell's surface temperatures over the response window, or
// nullopt when fewer than min_days_present days are observed.
// Throws LookupError for an unknown cell.
std::optional<double> compute_cell_response(const ObservationTable& table, const DesignSpec& spec,
                                            std::string_view cell_id);

// Q(q) across all cells observed on `day`. Throws DomainError when none are.
double compute_daily_response(const ObservationTable& table, Date day, double q);

// Precursors on window_start - lag_days; nullopt if any field is missing.
std::optional<PrecursorVector> extract_lagged_precursors(const ObservationTable& table,
                                                         const DesignSpec& spec,
                                                         std::string_view cell_id);

// Within-subject stacking with row-level deletion. Output ordered by cell_id,
// then Reported before Faux. Throws DesignError when both tables are non-empty
// but share no cell.
std::vector<DesignRow> build_stacked_design(const ObservationTable& reported,
                                            const ObservationTable& faux,
                                            const DesignSpec& spec_reported,
                                            const DesignSpec& spec_faux);

// Share-ratio case weights: w = target(c) / sample_share(c).
std::vector<DesignRow> balance_weights(std::vector<DesignRow> rows,
                                       const std::map<ExposureCondition, double>& target_share);

std::string serialize_design(const std::vector<DesignRow>& rows);
void write_design(const std::vector<DesignRow>& rows, const std::filesystem::path& path);
std::vector<DesignRow> read_design(const std::filesystem::path& path);

}  // namespace heatcast
