#include "heatcast/oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace heatcast::oracle {

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("empty sequence");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("q outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = static_cast<double>(values.size() - 1) * q + 1.0;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = static_cast<std::size_t>(std::ceil(h));
  const double x_lo = values[lo - 1];
  const double x_hi = values[hi - 1];
  return x_lo + (h - std::floor(h)) * (x_hi - x_lo);
}

double morans_i(const std::vector<double>& values, const std::vector<std::vector<double>>& weights) {
  const std::size_t n = values.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += values[i];
  mean /= static_cast<double>(n);

  double s0 = 0.0, num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    den += (values[i] - mean) * (values[i] - mean);
    for (std::size_t j = 0; j < n; ++j) {
      s0 += weights[i][j];
      num += weights[i][j] * (values[i] - mean) * (values[j] - mean);
    }
  }
  if (s0 == 0.0) throw DomainError("weights sum to zero");
  if (den == 0.0) throw DomainError("zero variance");
  return static_cast<double>(n) / s0 * num / den;
}

double chord_distance_km(const GeoPoint& a, const GeoPoint& b) {
  auto unit = [](const GeoPoint& p) {
    const double lat = p.lat_deg * std::numbers::pi / 180.0;
    const double lon = p.lon_deg * std::numbers::pi / 180.0;
    return std::array<double, 3>{std::cos(lat) * std::cos(lon), std::cos(lat) * std::sin(lon),
                                 std::sin(lat)};
  };
  const auto u = unit(a);
  const auto v = unit(b);
  const double dx = u[0] - v[0], dy = u[1] - v[1], dz = u[2] - v[2];
  const double chord = std::min(2.0, std::sqrt(dx * dx + dy * dy + dz * dz));
  return 2.0 * 6371.0 * std::asin(chord / 2.0);
}

BandResult band_morans_i(const std::vector<double>& values, const std::vector<GeoPoint>& locations,
                         double lo_km, double hi_km) {
  const std::size_t n = values.size();
  std::vector<std::vector<double>> w(n, std::vector<double>(n, 0.0));
  BandResult out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double d = chord_distance_km(locations[i], locations[j]);
      if (d >= lo_km && d < hi_km) {
        w[i][j] = 1.0;
        if (i < j) ++out.n_pairs;
      }
    }
  }
  if (out.n_pairs >= 2) out.morans_i = morans_i(values, w);
  return out;
}

std::vector<double> weighted_ls(const std::vector<double>& x, const std::vector<double>& y,
                                const std::vector<double>& w, int degree) {
  const auto m = static_cast<std::size_t>(degree + 1);
  // Augmented normal equations [X'WX | X'Wy].
  std::vector<std::vector<double>> a(m, std::vector<double>(m + 1, 0.0));
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t r = 0; r < m; ++r) {
      const double xr = std::pow(x[i], static_cast<double>(r));
      for (std::size_t c = 0; c < m; ++c) a[r][c] += w[i] * xr * std::pow(x[i], static_cast<double>(c));
      a[r][m] += w[i] * xr * y[i];
    }
  }
  for (std::size_t col = 0; col < m; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < m; ++r) {
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    }
    if (a[pivot][col] == 0.0) throw DomainError("singular normal equations");
    std::swap(a[col], a[pivot]);
    for (std::size_t r = 0; r < m; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= m; ++c) a[r][c] -= f * a[col][c];
    }
  }
  std::vector<double> coef(m);
  for (std::size_t r = 0; r < m; ++r) coef[r] = a[r][m] / a[r][r];
  return coef;
}

double loess_at(const std::vector<double>& x, const std::vector<double>& y, double span, int degree,
                const std::vector<double>& prior_weights, double x0) {
  const std::size_t n = x.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = std::abs(x[i] - x0);
  std::vector<double> sorted = d;
  std::sort(sorted.begin(), sorted.end());
  auto q = static_cast<std::size_t>(std::ceil(span * static_cast<double>(n) - 1e-9));
  q = std::clamp<std::size_t>(q, 1, n);
  const double h = sorted[q - 1];
  if (!(h > 0.0)) throw DomainError("oracle needs a positive neighbourhood radius");

  std::vector<double> u, yy, w;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] >= h) continue;
    const double r = d[i] / h;
    double wi = std::pow(1.0 - r * r * r, 3.0);
    if (!prior_weights.empty()) wi *= prior_weights[i];
    u.push_back((x[i] - x0) / h);
    yy.push_back(y[i]);
    w.push_back(wi);
  }
  return weighted_ls(u, yy, w, degree)[0];
}

CoverageResult coverage(const IntervalMethodFn& method, const CaseGenerator& generator,
                        std::size_t n_reps, int threads) {
  if (n_reps == 0) throw DomainError("n_reps must be >= 1");
  CoverageResult out;
  out.intervals.resize(n_reps);
  out.y_new.resize(n_reps);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t r = next++; r < n_reps; r = next++) {
      const auto c = generator(r);
      out.intervals[r] = method(c);
      out.y_new[r] = c.y_new;
    }
  };
  const auto n_workers = static_cast<std::size_t>(std::max(1, threads));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < std::min(n_workers, n_reps); ++k) pool.emplace_back(work);
  }
  std::size_t hits = 0;
  for (std::size_t r = 0; r < n_reps; ++r) {
    const auto& iv = out.intervals[r];
    if (iv.lower <= out.y_new[r] && out.y_new[r] <= iv.upper) ++hits;
  }
  out.coverage = static_cast<double>(hits) / static_cast<double>(n_reps);
  return out;
}

}  // namespace heatcast::oracle
