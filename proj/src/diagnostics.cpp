#include "heatcast/diagnostics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "heatcast/csv.hpp"

namespace heatcast {

double haversine_km(const GeoPoint& a, const GeoPoint& b) {
  constexpr double rad = std::numbers::pi / 180.0;
  const double phi1 = a.lat_deg * rad;
  const double phi2 = b.lat_deg * rad;
  const double dphi = (b.lat_deg - a.lat_deg) * rad;
  const double dlambda = (b.lon_deg - a.lon_deg) * rad;
  const double s1 = std::sin(dphi / 2.0);
  const double s2 = std::sin(dlambda / 2.0);
  const double h = std::clamp(s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2, 0.0, 1.0);
  return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

WeightMatrix WeightMatrix::rook_grid(std::size_t rows, std::size_t cols) {
  WeightMatrix w(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const auto i = r * cols + c;
      if (c + 1 < cols) w(i, i + 1) = w(i + 1, i) = 1.0;
      if (r + 1 < rows) w(i, i + cols) = w(i + cols, i) = 1.0;
    }
  }
  return w;
}

namespace {

// Centered copy plus its sum of squares.
std::pair<Eigen::VectorXd, double> centered(std::span<const double> values) {
  Eigen::VectorXd z = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                                        static_cast<Eigen::Index>(values.size()));
  z.array() -= z.mean();
  return {z, z.squaredNorm()};
}

}  // namespace

double morans_i(std::span<const double> values, const WeightMatrix& weights) {
  const auto n = values.size();
  if (n < 2) throw DomainError("Moran's I needs at least 2 values");
  if (weights.size() != n) throw DomainError("weight matrix size does not match values");
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("Moran's I input contains a non-finite value");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (weights(i, i) != 0.0) throw DomainError("weight matrix diagonal must be zero");
  }
  const auto data = weights.data();
  if (std::any_of(data.begin(), data.end(), [](double w) { return w < 0.0 || !std::isfinite(w); })) {
    throw DomainError("weights must be finite and non-negative");
  }
  const double s0 = std::accumulate(data.begin(), data.end(), 0.0);
  if (!(s0 > 0.0)) throw DomainError("weights sum to zero");

  const auto [z, ss] = centered(values);
  if (!(ss > 0.0)) throw DomainError("values have zero variance");
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> w(
      data.data(), ni, ni);
  const double cross = z.dot(w * z);
  return (static_cast<double>(n) / s0) * (cross / ss);
}

std::vector<CorrelogramBin> correlogram(std::span<const double> values,
                                        std::span<const GeoPoint> locations,
                                        const CorrelogramSpec& spec) {
  const auto n = values.size();
  if (n < 3) throw DomainError("correlogram needs at least 3 values");
  if (locations.size() != n) throw DomainError("values and locations differ in length");
  if (!(spec.bin_km > 0.0) || !std::isfinite(spec.bin_km)) throw DomainError("bin_km must be positive");
  if (!(spec.max_km > 0.0) || !std::isfinite(spec.max_km)) throw DomainError("max_km must be positive");
  if (spec.n_perm < 0) throw DomainError("n_perm must be non-negative");

  const auto n_bins = static_cast<std::size_t>(std::ceil(spec.max_km / spec.bin_km - 1e-12));
  std::vector<std::vector<std::pair<std::uint32_t, std::uint32_t>>> pairs(n_bins);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = haversine_km(locations[i], locations[j]);
      const auto k = static_cast<std::size_t>(std::floor(d / spec.bin_km));
      if (k < n_bins) pairs[k].emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    }
  }

  auto [z, ss] = centered(values);
  if (!(ss > 0.0)) throw DomainError("values have zero variance");
  const auto nd = static_cast<double>(n);

  // I_k = n * sum_{i<j in band} z_i z_j / (m_k * sum z^2), the binary-weight
  // Moran's I with each unordered pair counted once in numerator and S0.
  auto band_stats = [&](const Eigen::VectorXd& v, std::vector<double>& out) {
    for (std::size_t k = 0; k < n_bins; ++k) {
      if (pairs[k].size() < 2) continue;
      double cross = 0.0;
      for (const auto& [i, j] : pairs[k]) cross += v[i] * v[j];
      out[k] = nd * cross / (static_cast<double>(pairs[k].size()) * ss);
    }
  };

  std::vector<double> observed(n_bins, 0.0);
  band_stats(z, observed);

  std::vector<std::size_t> extreme(n_bins, 0);
  if (spec.n_perm > 0) {
    const double expected = -1.0 / (nd - 1.0);
    std::mt19937_64 rng(spec.seed);
    Eigen::VectorXd shuffled = z;
    std::vector<double> perm_stats(n_bins, 0.0);
    for (int p = 0; p < spec.n_perm; ++p) {
      std::shuffle(shuffled.begin(), shuffled.end(), rng);
      band_stats(shuffled, perm_stats);
      for (std::size_t k = 0; k < n_bins; ++k) {
        if (pairs[k].size() < 2) continue;
        const double obs_dev = std::abs(observed[k] - expected);
        if (std::abs(perm_stats[k] - expected) >= obs_dev - 1e-12 * (1.0 + obs_dev)) ++extreme[k];
      }
    }
  }

  std::vector<CorrelogramBin> bins(n_bins);
  for (std::size_t k = 0; k < n_bins; ++k) {
    auto& b = bins[k];
    b.lo_km = static_cast<double>(k) * spec.bin_km;
    b.hi_km = static_cast<double>(k + 1) * spec.bin_km;
    b.n_pairs = pairs[k].size();
    if (b.n_pairs < 2) continue;
    b.morans_i = observed[k];
    if (spec.n_perm > 0) {
      b.p_value = static_cast<double>(extreme[k] + 1) / static_cast<double>(spec.n_perm + 1);
    }
  }
  return bins;
}

std::vector<double> acf(std::span<const double> series, std::size_t max_lag) {
  const auto n = series.size();
  if (n < max_lag + 2) throw DomainError("series too short for the requested lag");
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / static_cast<double>(n);
  double denom = 0.0;
  for (double v : series) denom += (v - mean) * (v - mean);
  if (!(denom > 0.0)) throw DomainError("series has zero variance");
  std::vector<double> r(max_lag + 1);
  r[0] = 1.0;
  for (std::size_t k = 1; k <= max_lag; ++k) {
    double num = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) num += (series[t] - mean) * (series[t + k] - mean);
    r[k] = num / denom;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Loess

void LoessSpec::validate(std::size_t n) const {
  if (!(span > 0.0 && span <= 1.0)) throw DomainError("loess span must lie in (0, 1]");
  if (degree != 1 && degree != 2) throw DomainError("loess degree must be 1 or 2");
  if (robustness_iters < 0) throw DomainError("robustness_iters must be >= 0");
  if (span * static_cast<double>(n) < static_cast<double>(degree + 1) - 1e-9) {
    throw DomainError("loess neighbourhood holds fewer than degree + 1 points");
  }
  if (!prior_weights.empty()) {
    if (prior_weights.size() != n) throw DomainError("prior_weights length mismatch");
    for (double w : prior_weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw DomainError("prior weights must be positive");
    }
  }
}

namespace {

double tricube(double u) {
  const double t = 1.0 - u * u * u;
  return t * t * t;
}

double bisquare(double u) {
  const double t = 1.0 - u * u;
  return t * t;
}

class LocalFitter {
 public:
  LocalFitter(std::span<const double> x, std::span<const double> y, const LoessSpec& spec)
      : x_(x), y_(y), spec_(spec),
        q_(static_cast<std::size_t>(std::ceil(spec.span * static_cast<double>(x.size()) - 1e-9))),
        robust_(x.size(), 1.0) {
    q_ = std::clamp<std::size_t>(q_, 1, x.size());
  }

  void set_robustness(std::vector<double> w) { robust_ = std::move(w); }

  double fit_at(double x0) const {
    const auto n = x_.size();
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {std::abs(x_[i] - x0), i};
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(q_ - 1), dist.end());
    const double h = dist[q_ - 1].first;

    std::vector<std::size_t> idx;
    std::vector<double> wts;
    if (h == 0.0) {
      // Every point at x0 counts, not just the first q of the ties.
      for (std::size_t i = 0; i < n; ++i) {
        if (x_[i] != x0) continue;
        double w = spec_.prior_weights.empty() ? 1.0 : spec_.prior_weights[i];
        w *= robust_[i];
        if (w > 0.0) {
          idx.push_back(i);
          wts.push_back(w);
        }
      }
      if (!idx.empty()) return weighted_mean(idx, wts);
    }
    for (std::size_t k = 0; k < q_; ++k) {
      const auto i = dist[k].second;
      double w = h > 0.0 ? (dist[k].first < h ? tricube(dist[k].first / h) : 0.0) : 1.0;
      if (!spec_.prior_weights.empty()) w *= spec_.prior_weights[i];
      w *= robust_[i];
      if (w > 0.0) {
        idx.push_back(i);
        wts.push_back(w);
      }
    }
    if (idx.empty()) {
      double s = 0.0;
      std::size_t m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(x_[i] - x0) <= h) s += y_[i], ++m;
      }
      return s / static_cast<double>(m);
    }

    for (int degree = spec_.degree; degree >= 1; --degree) {
      const auto m = static_cast<Eigen::Index>(idx.size());
      const auto cols = static_cast<Eigen::Index>(degree + 1);
      if (m < cols) continue;
      Eigen::MatrixXd a(m, cols);
      Eigen::VectorXd b(m);
      for (Eigen::Index r = 0; r < m; ++r) {
        const auto i = idx[static_cast<std::size_t>(r)];
        const double sw = std::sqrt(wts[static_cast<std::size_t>(r)]);
        const double u = (x_[i] - x0) / h;
        double pw = 1.0;
        for (Eigen::Index c = 0; c < cols; ++c) {
          a(r, c) = sw * pw;
          pw *= u;
        }
        b(r) = sw * y_[i];
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
      qr.setThreshold(1e-10);
      if (qr.rank() < cols) continue;
      return qr.solve(b)(0);
    }
    return weighted_mean(idx, wts);
  }

 private:
  double weighted_mean(const std::vector<std::size_t>& idx, const std::vector<double>& wts) const {
    double s = 0.0, t = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      s += wts[k] * y_[idx[k]];
      t += wts[k];
    }
    return s / t;
  }

  std::span<const double> x_;
  std::span<const double> y_;
  const LoessSpec& spec_;
  std::size_t q_;
  std::vector<double> robust_;
};

}  // namespace

std::vector<double> loess_fit(std::span<const double> x, std::span<const double> y,
                              const LoessSpec& spec, std::span<const double> eval_points) {
  if (x.size() != y.size()) throw DomainError("loess x and y differ in length");
  spec.validate(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw DomainError("loess input not finite");
  }
  std::vector<double> distinct(x.begin(), x.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < static_cast<std::size_t>(spec.degree + 1)) {
    throw DomainError("loess needs at least degree + 1 distinct x values");
  }

  LocalFitter fitter(x, y, spec);
  for (int iter = 0; iter < spec.robustness_iters; ++iter) {
    std::vector<double> abs_res(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) abs_res[i] = std::abs(y[i] - fitter.fit_at(x[i]));
    std::vector<double> sorted = abs_res;
    const double median = empirical_quantile(sorted, 0.5);
    if (median == 0.0) break;
    std::vector<double> robust(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u = abs_res[i] / (6.0 * median);
      robust[i] = u < 1.0 ? bisquare(u) : 0.0;
    }
    fitter.set_robustness(std::move(robust));
  }

  std::vector<double> out;
  out.reserve(eval_points.size());
  for (double x0 : eval_points) out.push_back(fitter.fit_at(x0));
  return out;
}

std::vector<double> upper_quartile_weights(std::span<const double> y, double hi_weight) {
  if (!(hi_weight > 0.0)) throw DomainError("hi_weight must be positive");
  const double q3 = empirical_quantile(y, 0.75);
  std::vector<double> w(y.size());
  std::transform(y.begin(), y.end(), w.begin(), [&](double v) { return v > q3 ? hi_weight : 1.0; });
  return w;
}

// ---------------------------------------------------------------------------
// CSV

std::string serialize_correlogram(const std::vector<CorrelogramBin>& bins) {
  std::ostringstream out;
  out << kCorrelogramHeader << '\n';
  for (const auto& b : bins) {
    out << csv::format(b.lo_km) << ',' << csv::format(b.hi_km) << ',' << csv::format(b.morans_i) << ','
        << csv::format(b.p_value) << ',' << b.n_pairs << '\n';
  }
  return out.str();
}

std::vector<CorrelogramBin> read_correlogram(const std::filesystem::path& path) {
  std::vector<CorrelogramBin> bins;
  for (const auto& row : csv::read_table(path, kCorrelogramHeader)) {
    try {
      if (row.fields.size() != 5) throw DomainError("expected 5 fields");
      CorrelogramBin b;
      b.lo_km = csv::parse_double(row.fields[0]);
      b.hi_km = csv::parse_double(row.fields[1]);
      b.morans_i = csv::parse_optional(row.fields[2]);
      b.p_value = csv::parse_optional(row.fields[3]);
      b.n_pairs = static_cast<std::size_t>(csv::parse_long(row.fields[4]));
      bins.push_back(b);
    } catch (const DomainError& e) {
      throw ParseError(row.line, e.what());
    }
  }
  return bins;
}

std::string serialize_acf(std::span<const double> r) {
  std::ostringstream out;
  out << kAcfHeader << '\n';
  for (std::size_t k = 0; k < r.size(); ++k) out << k << ',' << csv::format(r[k]) << '\n';
  return out.str();
}

std::vector<double> read_acf(const std::filesystem::path& path) {
  std::vector<double> r;
  for (const auto& row : csv::read_table(path, kAcfHeader)) {
    try {
      if (row.fields.size() != 2) throw DomainError("expected 2 fields");
      if (csv::parse_long(row.fields[0]) != static_cast<long>(r.size())) {
        throw DomainError("lags must be consecutive from 0");
      }
      r.push_back(csv::parse_double(row.fields[1]));
    } catch (const DomainError& e) {
      throw ParseError(row.line, e.what());
    }
  }
  return r;
}

std::string serialize_smooth(std::span<const double> x, std::span<const double> fitted) {
  std::ostringstream out;
  out << kSmoothHeader << '\n';
  for (std::size_t i = 0; i < x.size() && i < fitted.size(); ++i) {
    out << csv::format(x[i]) << ',' << csv::format(fitted[i]) << '\n';
  }
  return out.str();
}

std::vector<std::pair<double, double>> read_smooth(const std::filesystem::path& path) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& row : csv::read_table(path, kSmoothHeader)) {
    try {
      if (row.fields.size() != 2) throw DomainError("expected 2 fields");
      pts.emplace_back(csv::parse_double(row.fields[0]), csv::parse_double(row.fields[1]));
    } catch (const DomainError& e) {
      throw ParseError(row.line, e.what());
    }
  }
  return pts;
}

}  // namespace heatcast
