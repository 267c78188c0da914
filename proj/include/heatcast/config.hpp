#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <json.hpp>

#include "heatcast/design.hpp"
#include "heatcast/diagnostics.hpp"
#include "heatcast/forest.hpp"
#include "heatcast/synth.hpp"

namespace heatcast {

struct PathsConfig {
  std::filesystem::path reported = "out/reported.csv";
  std::filesystem::path faux = "out/faux.csv";
  std::filesystem::path output_dir = "out";
};

enum class IntervalKind { Alg1, Grid, Split };
std::string_view to_string(IntervalKind k);
IntervalKind parse_interval_kind(std::string_view s);

struct ConformalConfig {
  double alpha = 0.25;
  double top_fraction = 0.25;
  IntervalKind method = IntervalKind::Alg1;
  // Held-out share of design rows for the split variant.
  double calib_fraction = 0.5;
};

struct LoessConfig {
  double span = 0.75;
  int degree = 2;
  double hi_weight = 2.0;
  int robustness_iters = 0;
};

struct RunConfig {
  PathsConfig paths;
  DesignSpec design_reported;
  DesignSpec design_faux;
  ForestParams forest;
  ConformalConfig conformal;
  CorrelogramSpec correlogram;
  LoessConfig loess;
  std::optional<std::map<ExposureCondition, double>> weights;
  synth::SynthSpec synth;
  int threads = 1;

  // Synthetic reported year with a heat wave; the faux year starts one year
  // earlier, shares the geography and has none.
  static RunConfig defaults();
  synth::SynthSpec synth_faux() const;

  // Throws ConfigError naming the offending field path.
  void validate() const;
};

// Missing keys keep their defaults; unknown keys and type mismatches throw
// ConfigError with the JSON path (e.g. "forest.min_leaf").
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& c);

}  // namespace heatcast
