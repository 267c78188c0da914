#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heatcast/core.hpp"

namespace heatcast {

inline constexpr double kEarthRadiusKm = 6371.0;

// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(const GeoPoint& a, const GeoPoint& b);

// Dense n x n spatial weight matrix.
class WeightMatrix {
 public:
  explicit WeightMatrix(std::size_t n) : n_(n), w_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return w_[i * n_ + j]; }
  std::span<const double> data() const { return w_; }

  // Binary adjacency of a rows x cols lattice sharing an edge (rook moves),
  // cells numbered row-major.
  static WeightMatrix rook_grid(std::size_t rows, std::size_t cols);

 private:
  std::size_t n_;
  std::vector<double> w_;
};

// Global Moran's I. DomainError on n < 2, zero variance, zero total weight,
// negative weights or a non-zero diagonal.
double morans_i(std::span<const double> values, const WeightMatrix& weights);

struct CorrelogramSpec {
  double bin_km = 50.0;
  double max_km = 1500.0;
  int n_perm = 999;
  std::uint64_t seed = 20230601;
};

struct CorrelogramBin {
  double lo_km = 0.0;
  double hi_km = 0.0;
  std::optional<double> morans_i;  // absent when fewer than 2 pairs
  std::optional<double> p_value;   // absent when n_perm == 0 or no statistic
  std::size_t n_pairs = 0;
};

// Moran's I per distance band [k*bin_km, (k+1)*bin_km) with binary in-band
// weights; zero-distance pairs fall in the first band. Two-sided permutation
// p-values use shared value shuffles across bands.
std::vector<CorrelogramBin> correlogram(std::span<const double> values,
                                        std::span<const GeoPoint> locations,
                                        const CorrelogramSpec& spec);

// Sample autocorrelations r_0..r_max_lag (r_0 = 1).
std::vector<double> acf(std::span<const double> series, std::size_t max_lag);

struct LoessSpec {
  double span = 0.75;
  int degree = 2;
  int robustness_iters = 0;
  std::vector<double> prior_weights;  // empty means all 1

  void validate(std::size_t n) const;
};

// Local polynomial regression with tricube neighbourhood weights.
std::vector<double> loess_fit(std::span<const double> x, std::span<const double> y,
                              const LoessSpec& spec, std::span<const double> eval_points);

// Prior weights that emphasise the upper quartile: hi_weight for y above
// the 0.75 quantile, 1 otherwise.
std::vector<double> upper_quartile_weights(std::span<const double> y, double hi_weight);

inline constexpr std::string_view kCorrelogramHeader = "bin_lo_km,bin_hi_km,morans_i,p_value,n_pairs";
inline constexpr std::string_view kAcfHeader = "lag,r";
inline constexpr std::string_view kSmoothHeader = "x,fitted";

std::string serialize_correlogram(const std::vector<CorrelogramBin>& bins);
std::vector<CorrelogramBin> read_correlogram(const std::filesystem::path& path);
std::string serialize_acf(std::span<const double> r);
std::vector<double> read_acf(const std::filesystem::path& path);
std::string serialize_smooth(std::span<const double> x, std::span<const double> fitted);
std::vector<std::pair<double, double>> read_smooth(const std::filesystem::path& path);

}  // namespace heatcast
