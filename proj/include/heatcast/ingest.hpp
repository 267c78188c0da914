#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heatcast/core.hpp"

namespace heatcast {

inline constexpr std::string_view kObservationsHeader =
    "cell_id,lat_deg,lon_deg,date,elevation_m,temp_l8_k,h2o_l8,tropopause_m,surface_temp_k";

enum class Field { ElevationM, TempL8K, H2oL8, TropopauseM, SurfaceTempK };

std::string_view field_name(Field f);
Field parse_field(std::string_view name);

// The four precursors; the usual complete-case requirement for training.
const std::set<Field>& precursor_fields();

// Daily per-cell observations, sorted by (cell_id, date) with unique keys.
struct ObservationTable {
  std::vector<GridCellRecord> rows;
  std::string source_path;
  std::size_t n_rejected = 0;

  // All rows of one cell in date order; empty when the cell is unknown.
  std::span<const GridCellRecord> cell_rows(std::string_view cell_id) const;
  const GridCellRecord* find(std::string_view cell_id, Date date) const;
  bool has_cell(std::string_view cell_id) const { return !cell_rows(cell_id).empty(); }
  std::vector<std::string> cell_ids() const;
};

// Sorts rows and enforces key uniqueness: a duplicate (cell_id, date) throws
// DomainError in strict mode; otherwise the last occurrence wins.
ObservationTable make_table(std::vector<GridCellRecord> rows, bool strict = true);

// Throws IoError when the file cannot be read and ParseError (strict) for the
// first malformed line. Lenient mode skips malformed lines and counts them.
ObservationTable parse_observations(const std::filesystem::path& path, bool strict = true);

std::string serialize_observations(const ObservationTable& table);
void write_observations(const ObservationTable& table, const std::filesystem::path& path);

// Keeps rows where every field in `required` is present; order preserved.
ObservationTable complete_case_filter(const ObservationTable& table,
                                      const std::set<Field>& required);

}  // namespace heatcast
