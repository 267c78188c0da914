#include "heatcast/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "heatcast/csv.hpp"

namespace heatcast {

void DesignSpec::validate() const {
  if (window_days < 1) throw DomainError("window_days must be >= 1");
  if (lag_days < 0) throw DomainError("lag_days must be >= 0");
  if (!(q > 0.0 && q < 1.0)) throw DomainError("q must lie in (0, 1)");
  if (min_days_present < 1 || min_days_present > window_days) {
    throw DomainError("min_days_present must lie in [1, window_days]");
  }
}

DesignSpec DesignSpec::shifted_years(int years) const {
  DesignSpec s = *this;
  s.window_start = window_start.add_years(years);
  return s;
}

std::optional<double> compute_cell_response(const ObservationTable& table, const DesignSpec& spec,
                                            std::string_view cell_id) {
  spec.validate();
  const auto rows = table.cell_rows(cell_id);
  if (rows.empty()) throw LookupError("unknown cell_id '" + std::string(cell_id) + "'");

  const Date end = spec.window_start + spec.window_days;
  std::vector<double> temps;
  for (const auto& r : rows) {
    if (r.date >= spec.window_start && r.date < end && r.surface_temp_k) {
      temps.push_back(*r.surface_temp_k);
    }
  }
  if (temps.size() < static_cast<std::size_t>(spec.min_days_present)) return std::nullopt;
  return empirical_quantile(temps, spec.q);
}

double compute_daily_response(const ObservationTable& table, Date day, double q) {
  std::vector<double> temps;
  for (const auto& r : table.rows) {
    if (r.date == day && r.surface_temp_k) temps.push_back(*r.surface_temp_k);
  }
  if (temps.empty()) throw DomainError("no surface temperatures on " + day.to_string());
  return empirical_quantile(temps, q);
}

std::optional<PrecursorVector> extract_lagged_precursors(const ObservationTable& table,
                                                         const DesignSpec& spec,
                                                         std::string_view cell_id) {
  spec.validate();
  if (!table.has_cell(cell_id)) {
    throw LookupError("unknown cell_id '" + std::string(cell_id) + "'");
  }
  const auto* rec = table.find(cell_id, spec.precursor_date());
  if (rec == nullptr) return std::nullopt;
  return rec->precursors.complete();
}

namespace {

void append_condition_rows(const ObservationTable& table, const DesignSpec& spec,
                           ExposureCondition condition, std::vector<DesignRow>& out) {
  for (const auto& id : table.cell_ids()) {
    const auto response = compute_cell_response(table, spec, id);
    if (!response) continue;
    const auto precursors = extract_lagged_precursors(table, spec, id);
    if (!precursors) continue;
    DesignRow row;
    row.cell_id = id;
    row.condition = condition;
    row.location = table.cell_rows(id).front().location;
    row.precursors = *precursors;
    row.response_q95_k = *response;
    out.push_back(std::move(row));
  }
}

}  // namespace

std::vector<DesignRow> build_stacked_design(const ObservationTable& reported,
                                            const ObservationTable& faux,
                                            const DesignSpec& spec_reported,
                                            const DesignSpec& spec_faux) {
  spec_reported.validate();
  spec_faux.validate();
  if (!reported.rows.empty() && !faux.rows.empty()) {
    const auto a = reported.cell_ids();
    const auto b = faux.cell_ids();
    std::vector<std::string> shared;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
    if (shared.empty()) {
      throw DesignError("reported and faux tables share no grid cell; no within-subject pairing");
    }
  }

  std::vector<DesignRow> rows;
  append_condition_rows(reported, spec_reported, ExposureCondition::Reported, rows);
  append_condition_rows(faux, spec_faux, ExposureCondition::Faux, rows);
  std::stable_sort(rows.begin(), rows.end(), [](const DesignRow& x, const DesignRow& y) {
    if (x.cell_id != y.cell_id) return x.cell_id < y.cell_id;
    return x.condition < y.condition;
  });
  return rows;
}

std::vector<DesignRow> balance_weights(std::vector<DesignRow> rows,
                                       const std::map<ExposureCondition, double>& target_share) {
  double total_target = 0.0;
  for (const auto& [cond, share] : target_share) {
    if (!(share > 0.0) || !std::isfinite(share)) {
      throw DomainError("target share for " + std::string(to_string(cond)) + " must be positive");
    }
    total_target += share;
  }
  if (std::abs(total_target - 1.0) > 1e-9) throw DomainError("target shares must sum to 1");

  std::map<ExposureCondition, std::size_t> counts;
  for (const auto& r : rows) ++counts[r.condition];
  for (const auto& [cond, share] : target_share) {
    if (counts[cond] == 0) {
      throw WeightingError("condition " + std::string(to_string(cond)) + " absent from rows");
    }
  }
  for (const auto& [cond, n] : counts) {
    if (n > 0 && !target_share.contains(cond)) {
      throw WeightingError("no target share for condition " + std::string(to_string(cond)));
    }
  }

  const auto n = static_cast<double>(rows.size());
  for (auto& r : rows) {
    const double sample_share = static_cast<double>(counts[r.condition]) / n;
    r.weight = target_share.at(r.condition) / sample_share;
  }
  return rows;
}

std::string serialize_design(const std::vector<DesignRow>& rows) {
  std::ostringstream out;
  out << kDesignHeader << '\n';
  for (const auto& r : rows) {
    out << r.cell_id << ',' << to_string(r.condition) << ',' << csv::format(r.location.lat_deg)
        << ',' << csv::format(r.location.lon_deg) << ',' << csv::format(r.precursors.elevation_m)
        << ',' << csv::format(r.precursors.temp_l8_k) << ',' << csv::format(r.precursors.h2o_l8)
        << ',' << csv::format(r.precursors.tropopause_m) << ',' << csv::format(r.response_q95_k)
        << ',' << csv::format(r.weight) << '\n';
  }
  return out.str();
}

void write_design(const std::vector<DesignRow>& rows, const std::filesystem::path& path) {
  csv::write_text(path, serialize_design(rows));
}

std::vector<DesignRow> read_design(const std::filesystem::path& path) {
  std::vector<DesignRow> rows;
  for (const auto& raw : csv::read_table(path, kDesignHeader)) {
    const auto& f = raw.fields;
    try {
      if (f.size() != 10) throw DomainError("expected 10 fields");
      DesignRow r;
      r.cell_id = f[0];
      r.condition = parse_condition(f[1]);
      r.location = GeoPoint::make(csv::parse_double(f[2]), csv::parse_double(f[3]));
      r.precursors = PrecursorVector{csv::parse_double(f[4]), csv::parse_double(f[5]),
                                     csv::parse_double(f[6]), csv::parse_double(f[7])};
      r.precursors.validate();
      r.response_q95_k = csv::parse_double(f[8]);
      r.weight = csv::parse_double(f[9]);
      if (!(r.response_q95_k > 0.0)) throw DomainError("response must be positive");
      if (!(r.weight > 0.0) || !std::isfinite(r.weight)) throw DomainError("weight must be positive");
      rows.push_back(std::move(r));
    } catch (const DomainError& e) {
      throw ParseError(raw.line, e.what());
    }
  }
  return rows;
}

}  // namespace heatcast
