#pragma once

// Deliberately naive reference implementations. They share no code with the
// main path and are only meant for small inputs.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "heatcast/conformal.hpp"
#include "heatcast/core.hpp"
#include "heatcast/forest.hpp"

namespace heatcast::oracle {

// Full sort, then the 1-indexed type-7 formula.
double quantile(std::vector<double> values, double q);

// Direct double loop over a nested weight matrix.
double morans_i(const std::vector<double>& values, const std::vector<std::vector<double>>& weights);

// Great-circle distance via the 3-D chord between unit vectors.
double chord_distance_km(const GeoPoint& a, const GeoPoint& b);

struct BandResult {
  std::optional<double> morans_i;
  std::size_t n_pairs = 0;
};

// Moran's I for one distance band [lo_km, hi_km) with a full n x n binary
// weight matrix.
BandResult band_morans_i(const std::vector<double>& values, const std::vector<GeoPoint>& locations,
                         double lo_km, double hi_km);

// Coefficients c_0..c_degree of the weighted polynomial fit in x, solved
// through the normal equations with Gaussian elimination.
std::vector<double> weighted_ls(const std::vector<double>& x, const std::vector<double>& y,
                                const std::vector<double>& w, int degree);

// One local fit: tricube weights over the ceil(span * n) nearest points,
// times optional prior weights, then weighted_ls in (x - x0) / h. Requires a
// positive neighbourhood radius.
double loess_at(const std::vector<double>& x, const std::vector<double>& y, double span, int degree,
                const std::vector<double>& prior_weights, double x0);

struct CoverageCase {
  Dataset train;
  Dataset calib;
  std::vector<double> x_new;
  DailySeries series;
  Date new_day;
  double y_new = 0.0;
};

using CaseGenerator = std::function<CoverageCase(std::uint64_t rep)>;
using IntervalMethodFn = std::function<PredictionInterval(const CoverageCase&)>;

struct CoverageResult {
  double coverage = 0.0;
  std::vector<PredictionInterval> intervals;
  std::vector<double> y_new;
};

// Fraction of replications whose interval contains y_new. Replication r is
// generated from seed r, so the result does not depend on `threads`.
CoverageResult coverage(const IntervalMethodFn& method, const CaseGenerator& generator,
                        std::size_t n_reps, int threads = 1);

}  // namespace heatcast::oracle
