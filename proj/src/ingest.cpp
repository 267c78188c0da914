#include "heatcast/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "heatcast/csv.hpp"

namespace heatcast {

namespace {

constexpr std::size_t kNumColumns = 9;

bool key_less(const GridCellRecord& a, const GridCellRecord& b) {
  if (a.cell_id != b.cell_id) return a.cell_id < b.cell_id;
  return a.date < b.date;
}

bool has_field(const GridCellRecord& r, Field f) {
  switch (f) {
    case Field::ElevationM: return r.precursors.elevation_m.has_value();
    case Field::TempL8K: return r.precursors.temp_l8_k.has_value();
    case Field::H2oL8: return r.precursors.h2o_l8.has_value();
    case Field::TropopauseM: return r.precursors.tropopause_m.has_value();
    case Field::SurfaceTempK: return r.surface_temp_k.has_value();
  }
  return false;
}

void check_finite(const std::optional<double>& v, std::string_view name) {
  if (v && !std::isfinite(*v)) throw DomainError(std::string(name) + " is not finite");
}

GridCellRecord parse_record(const std::vector<std::string>& f) {
  if (f.size() != kNumColumns) {
    throw DomainError("expected " + std::to_string(kNumColumns) + " fields, got " +
                      std::to_string(f.size()));
  }
  GridCellRecord r;
  if (f[0].empty()) throw DomainError("empty cell_id");
  r.cell_id = f[0];
  r.location = GeoPoint::make(csv::parse_double(f[1]), csv::parse_double(f[2]));
  r.date = Date::parse(f[3]);
  r.precursors.elevation_m = csv::parse_optional(f[4]);
  r.precursors.temp_l8_k = csv::parse_optional(f[5]);
  r.precursors.h2o_l8 = csv::parse_optional(f[6]);
  r.precursors.tropopause_m = csv::parse_optional(f[7]);
  r.surface_temp_k = csv::parse_optional(f[8]);

  check_finite(r.precursors.elevation_m, "elevation_m");
  check_finite(r.precursors.temp_l8_k, "temp_l8_k");
  check_finite(r.precursors.h2o_l8, "h2o_l8");
  check_finite(r.precursors.tropopause_m, "tropopause_m");
  check_finite(r.surface_temp_k, "surface_temp_k");
  if (r.precursors.temp_l8_k && *r.precursors.temp_l8_k <= 0.0) {
    throw DomainError("temp_l8_k must be positive");
  }
  if (r.precursors.h2o_l8 && (*r.precursors.h2o_l8 < 0.0 || *r.precursors.h2o_l8 > 1.0)) {
    throw DomainError("h2o_l8 outside [0, 1]");
  }
  if (r.surface_temp_k && (*r.surface_temp_k <= 0.0 || *r.surface_temp_k >= kMaxSurfaceTempK)) {
    throw DomainError("surface_temp_k outside (0, 400)");
  }
  return r;
}

}  // namespace

std::string_view field_name(Field f) {
  switch (f) {
    case Field::ElevationM: return "elevation_m";
    case Field::TempL8K: return "temp_l8_k";
    case Field::H2oL8: return "h2o_l8";
    case Field::TropopauseM: return "tropopause_m";
    case Field::SurfaceTempK: return "surface_temp_k";
  }
  return "";
}

Field parse_field(std::string_view name) {
  for (Field f : {Field::ElevationM, Field::TempL8K, Field::H2oL8, Field::TropopauseM,
                  Field::SurfaceTempK}) {
    if (field_name(f) == name) return f;
  }
  throw DomainError("unknown field '" + std::string(name) + "'");
}

const std::set<Field>& precursor_fields() {
  static const std::set<Field> fields{Field::ElevationM, Field::TempL8K, Field::H2oL8,
                                     Field::TropopauseM};
  return fields;
}

std::span<const GridCellRecord> ObservationTable::cell_rows(std::string_view cell_id) const {
  auto lo = std::lower_bound(rows.begin(), rows.end(), cell_id,
                             [](const GridCellRecord& r, std::string_view id) { return r.cell_id < id; });
  auto hi = std::upper_bound(lo, rows.end(), cell_id,
                             [](std::string_view id, const GridCellRecord& r) { return id < r.cell_id; });
  return {lo, hi};
}

const GridCellRecord* ObservationTable::find(std::string_view cell_id, Date date) const {
  const auto cell = cell_rows(cell_id);
  auto it = std::lower_bound(cell.begin(), cell.end(), date,
                             [](const GridCellRecord& r, Date d) { return r.date < d; });
  if (it == cell.end() || it->date != date) return nullptr;
  return &*it;
}

std::vector<std::string> ObservationTable::cell_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : rows) {
    if (ids.empty() || ids.back() != r.cell_id) ids.push_back(r.cell_id);
  }
  return ids;
}

ObservationTable make_table(std::vector<GridCellRecord> rows, bool strict) {
  // Stable sort keeps file order among duplicates so "last wins" is well defined.
  std::stable_sort(rows.begin(), rows.end(), key_less);
  ObservationTable table;
  table.rows.reserve(rows.size());
  for (auto& r : rows) {
    if (!table.rows.empty() && table.rows.back().cell_id == r.cell_id &&
        table.rows.back().date == r.date) {
      if (strict) {
        throw DomainError("duplicate observation for cell " + r.cell_id + " on " +
                          r.date.to_string());
      }
      table.rows.back() = std::move(r);
      continue;
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

ObservationTable parse_observations(const std::filesystem::path& path, bool strict) {
  if (!std::filesystem::exists(path)) throw IoError("no such file: " + path.string());
  const auto raw = csv::read_table(path, kObservationsHeader);

  std::vector<GridCellRecord> records;
  records.reserve(raw.size());
  std::map<std::pair<std::string, Date>, std::size_t> first_line;
  std::size_t rejected = 0;
  for (const auto& row : raw) {
    try {
      auto rec = parse_record(row.fields);
      if (strict) {
        auto [it, inserted] = first_line.emplace(std::make_pair(rec.cell_id, rec.date), row.line);
        if (!inserted) {
          throw DomainError("duplicate (cell_id, date) first seen on line " +
                            std::to_string(it->second));
        }
      }
      records.push_back(std::move(rec));
    } catch (const DomainError& e) {
      if (strict) throw ParseError(row.line, e.what());
      ++rejected;
    }
  }
  auto table = make_table(std::move(records), strict);
  table.source_path = path.string();
  table.n_rejected = rejected;
  return table;
}

std::string serialize_observations(const ObservationTable& table) {
  std::ostringstream out;
  out << kObservationsHeader << '\n';
  for (const auto& r : table.rows) {
    out << r.cell_id << ',' << csv::format(r.location.lat_deg) << ','
        << csv::format(r.location.lon_deg) << ',' << r.date.to_string() << ','
        << csv::format(r.precursors.elevation_m) << ',' << csv::format(r.precursors.temp_l8_k)
        << ',' << csv::format(r.precursors.h2o_l8) << ','
        << csv::format(r.precursors.tropopause_m) << ',' << csv::format(r.surface_temp_k)
        << '\n';
  }
  return out.str();
}

void write_observations(const ObservationTable& table, const std::filesystem::path& path) {
  csv::write_text(path, serialize_observations(table));
}

ObservationTable complete_case_filter(const ObservationTable& table,
                                      const std::set<Field>& required) {
  ObservationTable out;
  out.source_path = table.source_path;
  out.n_rejected = table.n_rejected;
  std::copy_if(table.rows.begin(), table.rows.end(), std::back_inserter(out.rows),
               [&](const GridCellRecord& r) {
                 return std::all_of(required.begin(), required.end(),
                                    [&](Field f) { return has_field(r, f); });
               });
  return out;
}

}  // namespace heatcast
