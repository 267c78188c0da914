#include "heatcast/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace heatcast {

using nlohmann::json;

std::string_view to_string(IntervalKind k) {
  switch (k) {
    case IntervalKind::Alg1: return "alg1";
    case IntervalKind::Grid: return "grid";
    case IntervalKind::Split: return "split";
  }
  return "alg1";
}

IntervalKind parse_interval_kind(std::string_view s) {
  if (s == "alg1") return IntervalKind::Alg1;
  if (s == "grid") return IntervalKind::Grid;
  if (s == "split") return IntervalKind::Split;
  throw DomainError("unknown interval method '" + std::string(s) + "' (expected alg1, grid or split)");
}

RunConfig RunConfig::defaults() {
  RunConfig c;
  c.synth.heatwave = synth::HeatwaveSpec{};
  c.design_reported.window_start = c.synth.start_date + c.design_reported.lag_days;
  c.design_faux = c.design_reported.shifted_years(-1);
  return c;
}

synth::SynthSpec RunConfig::synth_faux() const {
  auto s = synth;
  s.heatwave.reset();
  s.seed = synth.seed + 1;
  s.start_date = synth.start_date.add_years(-1);
  return s;
}

void RunConfig::validate() const {
  auto guard = [](std::string_view path, auto&& fn) {
    try {
      fn();
    } catch (const DomainError& e) {
      throw ConfigError(std::string(path) + ": " + e.what());
    }
  };
  guard("design.reported", [&] { design_reported.validate(); });
  guard("design.faux", [&] { design_faux.validate(); });
  guard("forest", [&] { forest.validate(kNumPrecursors); });
  guard("synth", [&] { synth.validate(); });
  if (!(conformal.alpha > 0.0 && conformal.alpha <= 0.5)) {
    throw ConfigError("conformal.alpha: must lie in (0, 0.5]");
  }
  if (!(conformal.top_fraction > 0.0 && conformal.top_fraction <= 1.0)) {
    throw ConfigError("conformal.top_fraction: must lie in (0, 1]");
  }
  if (!(conformal.calib_fraction > 0.0 && conformal.calib_fraction < 1.0)) {
    throw ConfigError("conformal.calib_fraction: must lie in (0, 1)");
  }
  if (!(correlogram.bin_km > 0.0)) throw ConfigError("correlogram.bin_km: must be positive");
  if (!(correlogram.max_km > 0.0)) throw ConfigError("correlogram.max_km: must be positive");
  if (correlogram.n_perm < 0) throw ConfigError("correlogram.n_perm: must be >= 0");
  if (!(loess.span > 0.0 && loess.span <= 1.0)) throw ConfigError("loess.span: must lie in (0, 1]");
  if (loess.degree != 1 && loess.degree != 2) throw ConfigError("loess.degree: must be 1 or 2");
  if (!(loess.hi_weight > 0.0)) throw ConfigError("loess.hi_weight: must be positive");
  if (loess.robustness_iters < 0) throw ConfigError("loess.robustness_iters: must be >= 0");
  if (weights) {
    double total = 0.0;
    for (const auto& [c, share] : *weights) {
      if (!(share > 0.0)) throw ConfigError("weights." + std::string(to_string(c)) + ": must be positive");
      total += share;
    }
    if (weights->size() != 2 || std::abs(total - 1.0) > 1e-9) {
      throw ConfigError("weights: reported and faux shares must both be given and sum to 1");
    }
  }
  if (threads < 0) throw ConfigError("threads: must be >= 0");
}

namespace {

// Reads members of one JSON object, remembering which keys were consumed so
// leftovers can be reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const auto* v = find(key);
    if (!v) return;
    out = convert<T>(*v, key);
  }

  template <typename T>
  void read_optional(const std::string& key, std::optional<T>& out) {
    const auto* v = find(key);
    if (!v) return;
    if (v->is_null()) {
      out.reset();
    } else {
      out = convert<T>(*v, key);
    }
  }

  void read_date(const std::string& key, Date& out) {
    std::string s;
    read(key, s);
    if (s.empty()) return;
    try {
      out = Date::parse(s);
    } catch (const DomainError& e) {
      throw ConfigError(child(key) + ": " + e.what());
    }
  }

  std::string child(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(child(k) + ": unknown key");
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  template <typename T>
  T convert(const json& v, const std::string& key) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(child(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(child(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned() == false && v.get<long long>() < 0) {
          throw ConfigError(child(key) + ": must be non-negative");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(child(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(child(key) + ": expected a string");
    }
    return v.get<T>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_design(Section& s, DesignSpec& d) {
  s.read_date("window_start", d.window_start);
  s.read("window_days", d.window_days);
  s.read("lag_days", d.lag_days);
  s.read("q", d.q);
  s.read("min_days_present", d.min_days_present);
  s.finish();
}

json design_json(const DesignSpec& d) {
  return {{"window_start", d.window_start.to_string()},
          {"window_days", d.window_days},
          {"lag_days", d.lag_days},
          {"q", d.q},
          {"min_days_present", d.min_days_present}};
}

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

RunConfig parse_config(const json& j) {
  auto c = RunConfig::defaults();
  Section root(j, "");

  if (const auto* v = root.find("paths")) {
    Section s(*v, "paths");
    std::string p;
    p = c.paths.reported.string();
    s.read("reported", p);
    c.paths.reported = p;
    p = c.paths.faux.string();
    s.read("faux", p);
    c.paths.faux = p;
    p = c.paths.output_dir.string();
    s.read("output_dir", p);
    c.paths.output_dir = p;
    s.finish();
  }

  if (const auto* v = root.find("design")) {
    Section s(*v, "design");
    // Shared knobs first, then per-condition overrides.
    DesignSpec shared = c.design_reported;
    bool faux_start_given = false;
    s.read_date("window_start_reported", shared.window_start);
    Date faux_start = c.design_faux.window_start;
    if (const auto* f = s.find("window_start_faux")) {
      const json wrapped = {{"window_start_faux", *f}};
      Section tmp(wrapped, "design");
      tmp.read_date("window_start_faux", faux_start);
      faux_start_given = true;
    }
    s.read("window_days", shared.window_days);
    s.read("lag_days", shared.lag_days);
    s.read("q", shared.q);
    s.read("min_days_present", shared.min_days_present);
    c.design_reported = shared;
    c.design_faux = shared.shifted_years(-1);
    if (faux_start_given) c.design_faux.window_start = faux_start;
    if (const auto* r = s.find("reported")) {
      Section rs(*r, "design.reported");
      read_design(rs, c.design_reported);
    }
    if (const auto* f = s.find("faux")) {
      Section fs(*f, "design.faux");
      read_design(fs, c.design_faux);
    }
    s.finish();
  }

  if (const auto* v = root.find("forest")) {
    Section s(*v, "forest");
    s.read("n_trees", c.forest.n_trees);
    if (const auto* m = s.find("mtry")) {
      if (m->is_string() && m->get<std::string>() == "auto") {
        c.forest.mtry.reset();
      } else if (m->is_number_integer() || m->is_null()) {
        const json wrapped = {{"mtry", *m}};
        Section tmp(wrapped, "forest");
        tmp.read_optional("mtry", c.forest.mtry);
      } else {
        throw ConfigError("forest.mtry: expected an integer or \"auto\"");
      }
    }
    s.read("min_leaf", c.forest.min_leaf);
    s.read_optional("max_depth", c.forest.max_depth);
    s.read("seed", c.forest.seed);
    s.read("bootstrap", c.forest.bootstrap);
    s.finish();
  }

  if (const auto* v = root.find("conformal")) {
    Section s(*v, "conformal");
    s.read("alpha", c.conformal.alpha);
    s.read("top_fraction", c.conformal.top_fraction);
    s.read("calib_fraction", c.conformal.calib_fraction);
    std::string method(to_string(c.conformal.method));
    s.read("method", method);
    try {
      c.conformal.method = parse_interval_kind(method);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("conformal.method: ") + e.what());
    }
    s.finish();
  }

  if (const auto* v = root.find("correlogram")) {
    Section s(*v, "correlogram");
    s.read("bin_km", c.correlogram.bin_km);
    s.read("max_km", c.correlogram.max_km);
    s.read("n_perm", c.correlogram.n_perm);
    s.read("seed", c.correlogram.seed);
    s.finish();
  }

  if (const auto* v = root.find("loess")) {
    Section s(*v, "loess");
    s.read("span", c.loess.span);
    s.read("degree", c.loess.degree);
    s.read("hi_weight", c.loess.hi_weight);
    s.read("robustness_iters", c.loess.robustness_iters);
    s.finish();
  }

  if (const auto* v = root.find("weights")) {
    if (v->is_null()) {
      c.weights.reset();
    } else {
      Section s(*v, "weights");
      std::map<ExposureCondition, double> shares;
      for (auto cond : {ExposureCondition::Reported, ExposureCondition::Faux}) {
        std::optional<double> share;
        s.read_optional(std::string(to_string(cond)), share);
        if (share) shares[cond] = *share;
      }
      s.finish();
      c.weights = shares;
    }
  }

  if (const auto* v = root.find("synth")) {
    Section s(*v, "synth");
    s.read("n_cells", c.synth.n_cells);
    s.read("n_days", c.synth.n_days);
    s.read_date("start_date", c.synth.start_date);
    s.read("field_seed", c.synth.field_seed);
    s.read("seed", c.synth.seed);
    s.read("correlation_length_km", c.synth.correlation_length_km);
    s.read("noise_sd_k", c.synth.noise_sd_k);
    s.read("lag_days", c.synth.lag_days);
    s.read("missing_fraction", c.synth.missing_fraction);
    if (const auto* b = s.find("bbox")) {
      Section bs(*b, "synth.bbox");
      bs.read("lat_min", c.synth.bbox.lat_min);
      bs.read("lat_max", c.synth.bbox.lat_max);
      bs.read("lon_min", c.synth.bbox.lon_min);
      bs.read("lon_max", c.synth.bbox.lon_max);
      bs.finish();
    }
    if (const auto* h = s.find("heatwave")) {
      if (h->is_null()) {
        c.synth.heatwave.reset();
      } else {
        synth::HeatwaveSpec hw = c.synth.heatwave.value_or(synth::HeatwaveSpec{});
        Section hs(*h, "synth.heatwave");
        hs.read("peak_day", hw.peak_day);
        hs.read("amplitude_k", hw.amplitude_k);
        hs.read("width_days", hw.width_days);
        hs.finish();
        c.synth.heatwave = hw;
      }
    }
    s.finish();
  }

  root.read("threads", c.threads);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json to_json(const RunConfig& c) {
  json weights = nullptr;
  if (c.weights) {
    weights = json::object();
    for (const auto& [cond, share] : *c.weights) weights[std::string(to_string(cond))] = share;
  }
  json heatwave = nullptr;
  if (c.synth.heatwave) {
    heatwave = {{"peak_day", c.synth.heatwave->peak_day},
                {"amplitude_k", c.synth.heatwave->amplitude_k},
                {"width_days", c.synth.heatwave->width_days}};
  }
  return {
      {"paths",
       {{"reported", c.paths.reported.string()},
        {"faux", c.paths.faux.string()},
        {"output_dir", c.paths.output_dir.string()}}},
      {"design", {{"reported", design_json(c.design_reported)}, {"faux", design_json(c.design_faux)}}},
      {"forest",
       {{"n_trees", c.forest.n_trees},
        {"mtry", optional_json(c.forest.mtry)},
        {"min_leaf", c.forest.min_leaf},
        {"max_depth", optional_json(c.forest.max_depth)},
        {"seed", c.forest.seed},
        {"bootstrap", c.forest.bootstrap}}},
      {"conformal",
       {{"alpha", c.conformal.alpha},
        {"top_fraction", c.conformal.top_fraction},
        {"calib_fraction", c.conformal.calib_fraction},
        {"method", std::string(to_string(c.conformal.method))}}},
      {"correlogram",
       {{"bin_km", c.correlogram.bin_km},
        {"max_km", c.correlogram.max_km},
        {"n_perm", c.correlogram.n_perm},
        {"seed", c.correlogram.seed}}},
      {"loess",
       {{"span", c.loess.span},
        {"degree", c.loess.degree},
        {"hi_weight", c.loess.hi_weight},
        {"robustness_iters", c.loess.robustness_iters}}},
      {"weights", weights},
      {"synth",
       {{"n_cells", c.synth.n_cells},
        {"n_days", c.synth.n_days},
        {"start_date", c.synth.start_date.to_string()},
        {"field_seed", c.synth.field_seed},
        {"seed", c.synth.seed},
        {"correlation_length_km", c.synth.correlation_length_km},
        {"noise_sd_k", c.synth.noise_sd_k},
        {"lag_days", c.synth.lag_days},
        {"missing_fraction", c.synth.missing_fraction},
        {"bbox",
         {{"lat_min", c.synth.bbox.lat_min},
          {"lat_max", c.synth.bbox.lat_max},
          {"lon_min", c.synth.bbox.lon_min},
          {"lon_max", c.synth.bbox.lon_max}}},
        {"heatwave", heatwave}}},
      {"threads", c.threads},
  };
}

}  // namespace heatcast
