// heatcast: command-line front end. Every subcommand reads its inputs, calls
// the library, writes its CSV and a manifest_<subcommand>.json into the
// output directory.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "heatcast/config.hpp"
#include "heatcast/conformal.hpp"
#include "heatcast/csv.hpp"
#include "heatcast/design.hpp"
#include "heatcast/diagnostics.hpp"
#include "heatcast/forest.hpp"
#include "heatcast/ingest.hpp"
#include "heatcast/pipeline.hpp"
#include "heatcast/svg.hpp"
#include "heatcast/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace heatcast;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kData = 3, kNumeric = 4 };

// Flag values; empty optionals leave the config untouched.
struct Flags {
  std::string config;
  std::string out;
  std::optional<int> threads;
  bool svg = false;

  // synth
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> field_seed;
  std::optional<std::size_t> n_cells;
  std::optional<int> n_days;
  std::optional<double> missing_fraction;
  bool no_heatwave = false;

  // paths
  std::string reported, faux, input, output, design, model, forecasts;

  // ingest
  bool lenient = false;
  std::vector<std::string> require;

  // train
  std::optional<int> n_trees, min_leaf, mtry;

  // forecast
  std::string from, to;
  std::optional<int> lag;

  // intervals
  std::optional<double> alpha, top_fraction;
  std::string method;

  // correlogram
  std::optional<double> bin_km, max_km;
  std::optional<int> n_perm;

  // acf
  std::size_t max_lag = 10;
  bool raw = false;

  // pdp
  std::string feature = "elevation_m";
  std::size_t points = 50;

  // smooth
  std::string x_col, y_col;
  std::optional<double> span, hi_weight;
  std::optional<int> degree;
};

class Run {
 public:
  Run(std::string name, RunConfig cfg) : name_(std::move(name)), cfg_(std::move(cfg)) {
    fs::create_directories(cfg_.paths.output_dir);
  }

  const RunConfig& cfg() const { return cfg_; }
  fs::path out(const std::string& file) const { return cfg_.paths.output_dir / file; }

  void write(const fs::path& path, const std::string& content) {
    csv::write_text(path, content);
    outputs_.push_back(path.string());
  }
  void count(const std::string& key, double v) { counts_[key] = v; }
  void count(const std::string& key, std::size_t v) { counts_[key] = v; }
  void note(const std::string& key, json v) { extra_[key] = std::move(v); }

  void finish() {
    const auto elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start_);
    json m = {{"subcommand", name_},
              {"config", to_json(cfg_)},
              {"seed", cfg_.forest.seed},
              {"counts", counts_},
              {"outputs", outputs_},
              {"elapsed_ms", elapsed.count()}};
    for (auto& [k, v] : extra_.items()) m[k] = v;
    csv::write_text(out("manifest_" + name_ + ".json"), m.dump(2) + "\n");
  }

 private:
  std::string name_;
  RunConfig cfg_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  json counts_ = json::object();
  json extra_ = json::object();
  std::vector<std::string> outputs_;
};

fs::path or_default(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback : fs::path(flag);
}

Date parse_flag_date(const std::string& s, const std::string& flag) {
  try {
    return Date::parse(s);
  } catch (const DomainError& e) {
    throw ConfigError(flag + ": " + e.what());
  }
}

RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig::defaults() : load_config(f.config);
  if (!f.out.empty()) c.paths.output_dir = f.out;
  if (!f.reported.empty()) c.paths.reported = f.reported;
  if (!f.faux.empty()) c.paths.faux = f.faux;
  if (f.threads) c.threads = *f.threads;
  if (f.seed) c.synth.seed = *f.seed;
  if (f.field_seed) c.synth.field_seed = *f.field_seed;
  if (f.n_cells) c.synth.n_cells = *f.n_cells;
  if (f.n_days) c.synth.n_days = *f.n_days;
  if (f.missing_fraction) c.synth.missing_fraction = *f.missing_fraction;
  if (f.no_heatwave) c.synth.heatwave.reset();
  if (f.n_trees) c.forest.n_trees = *f.n_trees;
  if (f.min_leaf) c.forest.min_leaf = *f.min_leaf;
  if (f.mtry) c.forest.mtry = *f.mtry;
  if (f.alpha) c.conformal.alpha = *f.alpha;
  if (f.top_fraction) c.conformal.top_fraction = *f.top_fraction;
  if (!f.method.empty()) {
    try {
      c.conformal.method = parse_interval_kind(f.method);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("--method: ") + e.what());
    }
  }
  if (f.bin_km) c.correlogram.bin_km = *f.bin_km;
  if (f.max_km) c.correlogram.max_km = *f.max_km;
  if (f.n_perm) c.correlogram.n_perm = *f.n_perm;
  if (f.span) c.loess.span = *f.span;
  if (f.degree) c.loess.degree = *f.degree;
  if (f.hi_weight) c.loess.hi_weight = *f.hi_weight;
  c.forest.threads = c.threads;
  c.validate();
  return c;
}

void write_svg(Run& run, bool enabled, const std::string& file, const svg::Chart& chart,
               const std::vector<svg::Series>& series) {
  if (enabled) run.write(run.out(file), svg::render(chart, series));
}

// OOB fitted values paired with their design rows; rows never out of bag are
// dropped.
struct OobFit {
  std::vector<std::size_t> rows;
  std::vector<double> observed;
  std::vector<double> fitted;
};

OobFit oob_fit(const ForestModel& model, const std::vector<DesignRow>& design) {
  if (model.meta().n_rows != design.size()) {
    throw DomainError("model was trained on " + std::to_string(model.meta().n_rows) +
                      " rows but the design has " + std::to_string(design.size()));
  }
  const auto oob = model.oob_predictions();
  OobFit f;
  for (std::size_t i = 0; i < design.size(); ++i) {
    if (!oob[i]) continue;
    f.rows.push_back(i);
    f.observed.push_back(design[i].response_q95_k);
    f.fitted.push_back(*oob[i]);
  }
  if (f.rows.size() < 3) throw DomainError("too few out-of-bag rows");
  return f;
}

std::string row_key(const DesignRow& r) { return r.cell_id + "@" + std::string(to_string(r.condition)); }

// ---------------------------------------------------------------------------

int cmd_synth(const Flags& f) {
  Run run("synth", resolve_config(f));
  const auto& c = run.cfg();
  const auto reported = synth::generate(c.synth);
  const auto faux = synth::generate(c.synth_faux());
  for (const auto& p : {c.paths.reported, c.paths.faux}) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
  }
  run.write(c.paths.reported, serialize_observations(reported));
  run.write(c.paths.faux, serialize_observations(faux));
  run.count("reported_rows", reported.rows.size());
  run.count("faux_rows", faux.rows.size());
  run.finish();
  std::cout << "wrote " << reported.rows.size() << " reported and " << faux.rows.size() << " faux rows\n";
  return kOk;
}

int cmd_ingest(const Flags& f) {
  Run run("ingest", resolve_config(f));
  const auto input = or_default(f.input, run.cfg().paths.reported);
  const auto table = parse_observations(input, !f.lenient);
  std::set<Field> required;
  if (f.require.empty()) {
    required = precursor_fields();
    required.insert(Field::SurfaceTempK);
  } else {
    for (const auto& name : f.require) {
      try {
        required.insert(parse_field(name));
      } catch (const DomainError& e) {
        throw ConfigError(std::string("--require: ") + e.what());
      }
    }
  }
  const auto kept = complete_case_filter(table, required);
  run.write(or_default(f.output, run.out("observations.csv")), serialize_observations(kept));
  run.count("rows_read", table.rows.size());
  run.count("rows_rejected", table.n_rejected);
  run.count("rows_kept", kept.rows.size());
  run.finish();
  std::cout << "read " << table.rows.size() << " rows (" << table.n_rejected << " rejected), kept "
            << kept.rows.size() << " complete rows\n";
  return kOk;
}

int cmd_build(const Flags& f) {
  Run run("build", resolve_config(f));
  const auto& c = run.cfg();
  const auto reported = parse_observations(c.paths.reported);
  const auto faux = parse_observations(c.paths.faux);
  auto rows = build_stacked_design(reported, faux, c.design_reported, c.design_faux);
  if (c.weights) rows = balance_weights(std::move(rows), *c.weights);
  run.write(or_default(f.design, run.out("design.csv")), serialize_design(rows));
  const auto n_reported = static_cast<std::size_t>(std::count_if(
      rows.begin(), rows.end(), [](const DesignRow& r) { return r.condition == ExposureCondition::Reported; }));
  run.count("rows", rows.size());
  run.count("reported_rows", n_reported);
  run.count("faux_rows", rows.size() - n_reported);
  run.finish();
  std::cout << "design: " << rows.size() << " rows (" << n_reported << " reported, "
            << rows.size() - n_reported << " faux)\n";
  return kOk;
}

int cmd_train(const Flags& f) {
  Run run("train", resolve_config(f));
  const auto rows = read_design(or_default(f.design, run.out("design.csv")));
  const auto model = ForestModel::train(Dataset::from_design(rows), run.cfg().forest);
  std::ostringstream text;
  model.save(text);
  run.write(or_default(f.model, run.out("model.txt")), text.str());
  run.count("rows", rows.size());
  if (run.cfg().forest.bootstrap) {
    const auto ve = variance_explained(model);
    run.count("variance_explained", ve.value);
    run.count("rows_never_oob", ve.n_excluded);
    std::cout << "variance explained (OOB): " << csv::format(ve.value) << '\n';
  }
  run.finish();
  std::cout << "trained " << model.trees().size() << " trees on " << rows.size() << " rows\n";
  return kOk;
}

int cmd_fit_report(const Flags& f) {
  Run run("fit-report", resolve_config(f));
  const auto& c = run.cfg();
  const auto rows = read_design(or_default(f.design, run.out("design.csv")));
  const auto model = ForestModel::load(or_default(f.model, run.out("model.txt")));
  const auto fit = oob_fit(model, rows);
  const auto ve = variance_explained(model);

  std::ostringstream pairs;
  pairs << "key,observed_k,fitted_k\n";
  for (std::size_t k = 0; k < fit.rows.size(); ++k) {
    pairs << row_key(rows[fit.rows[k]]) << ',' << csv::format(fit.observed[k]) << ','
          << csv::format(fit.fitted[k]) << '\n';
  }
  run.write(run.out("fit.csv"), pairs.str());

  LoessSpec spec{c.loess.span, c.loess.degree, c.loess.robustness_iters, {}};
  const auto [lo, hi] = std::minmax_element(fit.fitted.begin(), fit.fitted.end());
  std::vector<double> grid(50);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = *lo + (*hi - *lo) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  }
  const auto smooth = loess_fit(fit.fitted, fit.observed, spec, grid);
  run.write(run.out("fit_smooth.csv"), serialize_smooth(grid, smooth));

  write_svg(run, f.svg, "fit.svg", {"Observed vs OOB fitted Q(.95)", "fitted (K)", "observed (K)"},
            {{"rows", fit.fitted, fit.observed, "#1f77b4", true}, {"loess", grid, smooth, "#d62728"}});
  run.count("variance_explained", ve.value);
  run.count("rows_never_oob", ve.n_excluded);
  run.count("rows", fit.rows.size());
  run.finish();
  std::cout << "variance explained (OOB): " << csv::format(ve.value) << '\n';
  return kOk;
}

int cmd_forecast(const Flags& f) {
  Run run("forecast", resolve_config(f));
  const auto& c = run.cfg();
  const auto model = ForestModel::load(or_default(f.model, run.out("model.txt")));
  const auto table = parse_observations(or_default(f.input, c.paths.reported));
  if (table.rows.empty()) throw DomainError("observation table is empty");
  Date from = table.rows.front().date, to = from;
  for (const auto& r : table.rows) {
    from = std::min(from, r.date);
    to = std::max(to, r.date);
  }
  if (!f.from.empty()) from = parse_flag_date(f.from, "--from");
  if (!f.to.empty()) to = parse_flag_date(f.to, "--to");
  const int lag = f.lag.value_or(c.design_reported.lag_days);
  const auto dates = date_range(from, to);
  const auto result = roll_forecast(model, table, dates, lag, c.threads);
  run.write(or_default(f.forecasts, run.out("forecasts.csv")), serialize_forecasts(result.records));

  if (f.svg && !result.records.empty()) {
    std::vector<double> x, y;
    const Date origin = result.records.front().target_date;
    for (const auto& r : result.records) {
      x.push_back(static_cast<double>(r.target_date - origin));
      y.push_back(r.fitted_q95_k);
    }
    write_svg(run, true, "forecast.svg",
              {"Mean fitted Q(.95) by target date", "days after " + origin.to_string(), "K"},
              {{"forecast", x, y}});
  }
  run.count("records", result.records.size());
  run.count("dates_omitted", result.n_omitted);
  run.finish();
  std::cout << result.records.size() << " forecast records, " << result.n_omitted << " dates omitted\n";
  return kOk;
}

int cmd_intervals(const Flags& f) {
  Run run("intervals", resolve_config(f));
  const auto& c = run.cfg();
  const double alpha = c.conformal.alpha;
  std::vector<IntervalRecord> out;

  if (c.conformal.method == IntervalKind::Alg1) {
    auto records = read_forecasts(or_default(f.forecasts, run.out("forecasts.csv")));
    auto params = default_series_forest_params();
    auto qparams = default_series_qrf_params();
    params.threads = qparams.threads = c.threads;
    records = attach_intervals(std::move(records), alpha, params, qparams);
    std::vector<double> x, fit, lo, hi;
    for (const auto& r : records) {
      if (!r.interval) continue;
      out.push_back({r.target_date.to_string(), *r.interval});
      x.push_back(static_cast<double>(r.target_date - records.front().target_date));
      fit.push_back(r.fitted_q95_k);
      lo.push_back(r.interval->lower);
      hi.push_back(r.interval->upper);
    }
    write_svg(run, f.svg, "intervals.svg", {"Forecast with prediction interval", "day", "K"},
              {{"fitted", x, fit}, {"lower", x, lo, "#2ca02c"}, {"upper", x, hi, "#2ca02c"}});
  } else {
    const auto rows = read_design(or_default(f.design, run.out("design.csv")));
    auto qparams = c.forest;
    qparams.seed = c.forest.seed + 1;
    if (c.conformal.method == IntervalKind::Grid) {
      const auto model = ForestModel::load(or_default(f.model, run.out("model.txt")));
      for (const auto& k : grid_cell_intervals(model, rows, alpha, c.conformal.top_fraction, qparams)) {
        out.push_back({row_key(rows[k.row]), k.interval});
      }
    } else {
      std::vector<std::size_t> order(rows.size());
      std::iota(order.begin(), order.end(), 0);
      std::mt19937_64 rng(c.forest.seed);
      std::shuffle(order.begin(), order.end(), rng);
      const auto n_calib = static_cast<std::size_t>(
          std::round(c.conformal.calib_fraction * static_cast<double>(rows.size())));
      if (n_calib == 0 || n_calib >= rows.size()) throw DomainError("split leaves an empty side");
      std::vector<DesignRow> calib, train;
      for (std::size_t k = 0; k < order.size(); ++k) (k < n_calib ? calib : train).push_back(rows[order[k]]);
      const auto ivs = split_cqr_intervals(Dataset::from_design(train), Dataset::from_design(calib),
                                           Dataset::from_design(rows), alpha, qparams);
      for (std::size_t i = 0; i < rows.size(); ++i) out.push_back({row_key(rows[i]), ivs[i]});
    }
  }
  run.write(run.out("intervals.csv"), serialize_intervals(out));
  run.note("method", std::string(to_string(c.conformal.method)));
  run.count("intervals", out.size());
  run.finish();
  double mean_half = 0.0;
  for (const auto& r : out) mean_half += r.interval.half_width();
  if (!out.empty()) mean_half /= static_cast<double>(out.size());
  std::cout << out.size() << " intervals (" << to_string(c.conformal.method) << ", alpha "
            << csv::format(alpha) << "), mean half-width " << csv::format(mean_half) << " K\n";
  return kOk;
}

int cmd_correlogram(const Flags& f) {
  Run run("correlogram", resolve_config(f));
  const auto& c = run.cfg();
  const auto rows = read_design(or_default(f.design, run.out("design.csv")));
  const auto model = ForestModel::load(or_default(f.model, run.out("model.txt")));
  const auto fit = oob_fit(model, rows);
  std::vector<double> residuals(fit.rows.size());
  std::vector<GeoPoint> where(fit.rows.size());
  for (std::size_t k = 0; k < fit.rows.size(); ++k) {
    residuals[k] = fit.observed[k] - fit.fitted[k];
    where[k] = rows[fit.rows[k]].location;
  }
  const auto bins = correlogram(residuals, where, c.correlogram);
  run.write(run.out("correlogram.csv"), serialize_correlogram(bins));
  if (f.svg) {
    std::vector<double> x, y;
    for (const auto& b : bins) {
      if (!b.morans_i) continue;
      x.push_back((b.lo_km + b.hi_km) / 2.0);
      y.push_back(*b.morans_i);
    }
    svg::Chart chart{"Moran's I of OOB residuals", "distance (km)", "Moran's I"};
    chart.show_zero = true;
    write_svg(run, true, "correlogram.svg", chart, {{"I", x, y}});
  }
  run.count("bins", bins.size());
  run.count("residuals", residuals.size());
  run.finish();
  std::cout << bins.size() << " correlogram bins from " << residuals.size() << " residuals\n";
  return kOk;
}

int cmd_acf(const Flags& f) {
  Run run("acf", resolve_config(f));
  const auto records = read_forecasts(or_default(f.forecasts, run.out("forecasts.csv")));
  const auto series = build_daily_series(records);
  std::vector<double> values = series.values;
  if (!f.raw) {
    std::vector<double> day(series.size());
    for (std::size_t i = 0; i < day.size(); ++i) day[i] = static_cast<double>(series.days[i] - series.days.front());
    auto params = default_series_forest_params();
    params.threads = run.cfg().threads;
    const auto model = ForestModel::train(Dataset::from_single_feature("day", day, series.values), params);
    for (std::size_t i = 0; i < day.size(); ++i) {
      values[i] -= model.predict_mean(std::span<const double>(&day[i], 1));
    }
  }
  const auto r = acf(values, f.max_lag);
  run.write(run.out("acf.csv"), serialize_acf(r));
  if (f.svg) {
    std::vector<double> lags(r.size());
    std::iota(lags.begin(), lags.end(), 0.0);
    svg::Chart chart{f.raw ? "ACF of daily series" : "ACF of daily residuals", "lag (days)", "r"};
    chart.show_zero = true;
    write_svg(run, true, "acf.svg", chart, {{"r", lags, r}});
  }
  run.count("series_length", values.size());
  run.note("residuals", !f.raw);
  run.finish();
  std::cout << "acf up to lag " << f.max_lag << " over " << values.size() << " days\n";
  return kOk;
}

int cmd_pdp(const Flags& f) {
  Run run("pdp", resolve_config(f));
  const auto rows = read_design(or_default(f.design, run.out("design.csv")));
  const auto model = ForestModel::load(or_default(f.model, run.out("model.txt")));
  const auto data = Dataset::from_design(rows);
  const auto j = data.feature_index(f.feature);
  double lo = data.at(0, j), hi = lo;
  for (std::size_t i = 0; i < data.n_rows; ++i) {
    lo = std::min(lo, data.at(i, j));
    hi = std::max(hi, data.at(i, j));
  }
  if (f.points < 1) throw ConfigError("--points: must be >= 1");
  std::vector<double> grid(f.points, lo);
  for (std::size_t i = 0; i < grid.size() && grid.size() > 1; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid.size() - 1);
  }
  const auto curve = partial_dependence(model, data, f.feature, grid);
  std::ostringstream o;
  o << "value,fitted_k\n";
  std::vector<double> xs, ys;
  for (const auto& [v, y] : curve) {
    o << csv::format(v) << ',' << csv::format(y) << '\n';
    xs.push_back(v);
    ys.push_back(y);
  }
  run.write(run.out("pdp_" + f.feature + ".csv"), o.str());
  write_svg(run, f.svg, "pdp_" + f.feature + ".svg", {"Partial dependence (others at means)", f.feature, "K"},
            {{f.feature, xs, ys}});
  run.note("feature", f.feature);
  run.count("points", curve.size());
  run.finish();
  std::cout << "partial dependence on " << f.feature << " at " << curve.size() << " points\n";
  return kOk;
}

// Numeric column, or days since the first value when the column holds dates.
std::vector<double> column_values(const std::vector<std::vector<std::string>>& rows, std::size_t col,
                                  const std::string& name) {
  std::vector<double> out;
  std::optional<Date> origin;
  for (const auto& r : rows) {
    const auto& s = r[col];
    try {
      out.push_back(csv::parse_double(s));
    } catch (const DomainError&) {
      const Date d = Date::parse(s);
      if (!origin) origin = d;
      out.push_back(static_cast<double>(d - *origin));
    }
  }
  if (origin && out.size() != rows.size()) throw DomainError("column " + name + " mixes dates and numbers");
  return out;
}

int cmd_smooth(const Flags& f) {
  Run run("smooth", resolve_config(f));
  const auto& c = run.cfg();
  const auto input = or_default(f.input, run.out("forecasts.csv"));
  std::ifstream in(input);
  if (!in) throw IoError("cannot open " + input.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  for (auto h : csv::split(line)) header.emplace_back(h);
  const std::string xname = f.x_col.empty() ? "target_date" : f.x_col;
  const std::string yname = f.y_col.empty() ? "fitted_q95_k" : f.y_col;
  auto find = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError("column '" + name + "' not found in " + input.string());
    return static_cast<std::size_t>(it - header.begin());
  };
  const auto xi = find(xname), yi = find(yname);
  std::vector<std::vector<std::string>> rows;
  for (std::size_t n = 2; std::getline(in, line); ++n) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    for (auto v : csv::split(line)) fields.emplace_back(v);
    if (fields.size() != header.size()) throw ParseError(n, "expected " + std::to_string(header.size()) + " fields");
    rows.push_back(std::move(fields));
  }
  std::vector<double> x, y;
  try {
    x = column_values(rows, xi, xname);
    y = column_values(rows, yi, yname);
  } catch (const DomainError& e) {
    throw ParseError(0, e.what());
  }
  LoessSpec spec{c.loess.span, c.loess.degree, c.loess.robustness_iters, {}};
  if (c.loess.hi_weight != 1.0) spec.prior_weights = upper_quartile_weights(y, c.loess.hi_weight);
  std::vector<double> grid = x;
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  const auto fitted = loess_fit(x, y, spec, grid);
  run.write(run.out("smooth.csv"), serialize_smooth(grid, fitted));
  write_svg(run, f.svg, "smooth.svg", {"Loess smooth", xname, yname},
            {{yname, x, y, "#1f77b4", true}, {"loess", grid, fitted, "#d62728"}});
  run.count("points", x.size());
  run.finish();
  std::cout << "smoothed " << x.size() << " points\n";
  return kOk;
}

int dispatch(const std::string& name, const Flags& f) {
  if (name == "synth") return cmd_synth(f);
  if (name == "ingest") return cmd_ingest(f);
  if (name == "build") return cmd_build(f);
  if (name == "train") return cmd_train(f);
  if (name == "fit-report") return cmd_fit_report(f);
  if (name == "forecast") return cmd_forecast(f);
  if (name == "intervals") return cmd_intervals(f);
  if (name == "correlogram") return cmd_correlogram(f);
  if (name == "acf") return cmd_acf(f);
  if (name == "pdp") return cmd_pdp(f);
  if (name == "smooth") return cmd_smooth(f);
  throw ConfigError("unknown subcommand " + name);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-week-ahead Q(.95) surface temperature forecasts with conformal intervals"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags f;
  app.add_option("-c,--config", f.config, "JSON run configuration");
  app.add_option("-o,--out", f.out, "output directory (overrides paths.output_dir)");
  app.add_option("--threads", f.threads, "worker threads; 0 = all cores (results do not depend on it)");

  auto* synth_cmd = app.add_subcommand("synth", "generate synthetic reported and faux observation files");
  synth_cmd->add_option("--seed", f.seed, "weather/noise seed");
  synth_cmd->add_option("--field-seed", f.field_seed, "geography seed");
  synth_cmd->add_option("--n-cells", f.n_cells);
  synth_cmd->add_option("--n-days", f.n_days);
  synth_cmd->add_option("--missing-fraction", f.missing_fraction);
  synth_cmd->add_flag("--no-heatwave", f.no_heatwave);
  synth_cmd->add_option("--reported", f.reported);
  synth_cmd->add_option("--faux", f.faux);

  auto* ingest_cmd = app.add_subcommand("ingest", "validate an observation file and keep complete rows");
  ingest_cmd->add_option("-i,--input", f.input, "observations.csv (default paths.reported)");
  ingest_cmd->add_option("--output", f.output, "cleaned file (default <out>/observations.csv)");
  ingest_cmd->add_flag("--lenient", f.lenient, "count malformed rows instead of failing");
  ingest_cmd->add_option("--require", f.require, "fields that must be present (default all)");

  auto* build_cmd = app.add_subcommand("build", "build the stacked within-subject design");
  build_cmd->add_option("--reported", f.reported);
  build_cmd->add_option("--faux", f.faux);
  build_cmd->add_option("--design", f.design, "output design.csv");

  auto* train_cmd = app.add_subcommand("train", "train the random forest on design.csv");
  train_cmd->add_option("--design", f.design);
  train_cmd->add_option("--model", f.model, "output model file");
  train_cmd->add_option("--n-trees", f.n_trees);
  train_cmd->add_option("--min-leaf", f.min_leaf);
  train_cmd->add_option("--mtry", f.mtry);

  auto* fit_cmd = app.add_subcommand("fit-report", "variance explained and observed-vs-fitted pairs");
  fit_cmd->add_option("--design", f.design);
  fit_cmd->add_option("--model", f.model);
  fit_cmd->add_flag("--svg", f.svg);

  auto* forecast_cmd = app.add_subcommand("forecast", "roll the frozen model over precursor dates");
  forecast_cmd->add_option("--model", f.model);
  forecast_cmd->add_option("-i,--input", f.input, "observations with precursors (default paths.reported)");
  forecast_cmd->add_option("--from", f.from, "first precursor date");
  forecast_cmd->add_option("--to", f.to, "last precursor date");
  forecast_cmd->add_option("--lag", f.lag, "days between precursor and target date");
  forecast_cmd->add_option("--forecasts", f.forecasts, "output forecasts.csv");
  forecast_cmd->add_flag("--svg", f.svg);

  auto* intervals_cmd = app.add_subcommand("intervals", "conformal prediction intervals");
  intervals_cmd->add_option("--alpha", f.alpha, "miscoverage level");
  intervals_cmd->add_option("--method", f.method, "alg1 (daily series), grid (top fitted rows) or split");
  intervals_cmd->add_option("--top-fraction", f.top_fraction);
  intervals_cmd->add_option("--forecasts", f.forecasts);
  intervals_cmd->add_option("--design", f.design);
  intervals_cmd->add_option("--model", f.model);
  intervals_cmd->add_flag("--svg", f.svg);

  auto* corr_cmd = app.add_subcommand("correlogram", "Moran's I correlogram of OOB residuals");
  corr_cmd->add_option("--design", f.design);
  corr_cmd->add_option("--model", f.model);
  corr_cmd->add_option("--bin-km", f.bin_km);
  corr_cmd->add_option("--max-km", f.max_km);
  corr_cmd->add_option("--n-perm", f.n_perm);
  corr_cmd->add_flag("--svg", f.svg);

  auto* acf_cmd = app.add_subcommand("acf", "autocorrelation of the daily forecast residuals");
  acf_cmd->add_option("--forecasts", f.forecasts);
  acf_cmd->add_option("--max-lag", f.max_lag);
  acf_cmd->add_flag("--raw", f.raw, "use the series itself instead of residuals");
  acf_cmd->add_flag("--svg", f.svg);

  auto* pdp_cmd = app.add_subcommand("pdp", "partial dependence with other features at their means");
  pdp_cmd->add_option("--design", f.design);
  pdp_cmd->add_option("--model", f.model);
  pdp_cmd->add_option("--feature", f.feature);
  pdp_cmd->add_option("--points", f.points);
  pdp_cmd->add_flag("--svg", f.svg);

  auto* smooth_cmd = app.add_subcommand("smooth", "weighted loess of one CSV column on another");
  smooth_cmd->add_option("-i,--input", f.input, "CSV with a header (default <out>/forecasts.csv)");
  smooth_cmd->add_option("--x", f.x_col, "x column (dates become day offsets)");
  smooth_cmd->add_option("--y", f.y_col);
  smooth_cmd->add_option("--span", f.span);
  smooth_cmd->add_option("--degree", f.degree);
  smooth_cmd->add_option("--hi-weight", f.hi_weight, "prior weight for y above its upper quartile");
  smooth_cmd->add_flag("--svg", f.svg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return dispatch(name, f);
  } catch (const ConfigError& e) {
    std::cerr << "heatcast " << name << ": config error: " << e.what() << '\n';
    return kConfig;
  } catch (const IoError& e) {
    std::cerr << "heatcast " << name << ": " << e.what() << '\n';
    return kData;
  } catch (const ParseError& e) {
    std::cerr << "heatcast " << name << ": parse error: " << e.what() << '\n';
    return kData;
  } catch (const LookupError& e) {
    std::cerr << "heatcast " << name << ": " << e.what() << '\n';
    return kData;
  } catch (const DesignError& e) {
    std::cerr << "heatcast " << name << ": design error: " << e.what() << '\n';
    return kData;
  } catch (const WeightingError& e) {
    std::cerr << "heatcast " << name << ": weighting error: " << e.what() << '\n';
    return kData;
  } catch (const Error& e) {
    std::cerr << "heatcast " << name << ": " << e.what() << '\n';
    return kNumeric;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "heatcast " << name << ": " << e.what() << '\n';
    return kData;
  }
}
