#include "heatcast/forest.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "heatcast/csv.hpp"

namespace heatcast {

// ---------------------------------------------------------------------------
// Dataset

Dataset Dataset::from_design(const std::vector<DesignRow>& rows) {
  Dataset d;
  d.n_rows = rows.size();
  d.n_features = kNumPrecursors;
  for (auto name : kPrecursorNames) d.feature_names.emplace_back(name);
  d.x.reserve(d.n_rows * d.n_features);
  for (const auto& r : rows) {
    for (double v : r.precursors.as_features()) d.x.push_back(v);
    d.y.push_back(r.response_q95_k);
    d.w.push_back(r.weight);
  }
  return d;
}

Dataset Dataset::from_single_feature(std::string name, std::span<const double> x,
                                     std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("feature and response lengths differ");
  Dataset d;
  d.n_rows = x.size();
  d.n_features = 1;
  d.feature_names.push_back(std::move(name));
  d.x.assign(x.begin(), x.end());
  d.y.assign(y.begin(), y.end());
  d.w.assign(x.size(), 1.0);
  return d;
}

std::vector<double> Dataset::feature_means() const {
  std::vector<double> means(n_features, 0.0);
  if (n_rows == 0) return means;
  for (std::size_t i = 0; i < n_rows; ++i) {
    for (std::size_t j = 0; j < n_features; ++j) means[j] += at(i, j);
  }
  for (auto& m : means) m /= static_cast<double>(n_rows);
  return means;
}

std::size_t Dataset::feature_index(std::string_view name) const {
  for (std::size_t j = 0; j < feature_names.size(); ++j) {
    if (feature_names[j] == name) return j;
  }
  throw DomainError("unknown feature '" + std::string(name) + "'");
}

// ---------------------------------------------------------------------------
// Params

int ForestParams::resolved_mtry(std::size_t n_features) const {
  if (mtry) return *mtry;
  return std::max(1, static_cast<int>(n_features / 3));
}

void ForestParams::validate(std::size_t n_features) const {
  if (n_trees < 1) throw DomainError("n_trees must be >= 1");
  const int m = resolved_mtry(n_features);
  if (m < 1 || static_cast<std::size_t>(m) > n_features) {
    throw DomainError("mtry must lie in [1, " + std::to_string(n_features) + "]");
  }
  if (min_leaf < 1) throw DomainError("min_leaf must be >= 1");
  if (max_depth && *max_depth < 0) throw DomainError("max_depth must be >= 0");
  if (threads < 0) throw DomainError("threads must be >= 0");
}

// ---------------------------------------------------------------------------
// Tree

const TreeNode& Tree::leaf_for(std::span<const double> x) const {
  std::size_t id = 0;
  while (!nodes[id].is_leaf()) {
    const auto& n = nodes[id];
    id = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                        : n.right);
  }
  return nodes[id];
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t tree_seed(std::uint64_t seed, std::size_t tree_index) {
  return splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tree_index)));
}

// Weighted running mean; exact for constant inputs.
class RunningMean {
 public:
  void add(double v, double weight = 1.0) {
    total_ += weight;
    if (total_ == weight) {
      mean_ = v;
    } else {
      mean_ += (weight / total_) * (v - mean_);
    }
  }
  double value() const { return mean_; }
  double total() const { return total_; }

 private:
  double mean_ = 0.0;
  double total_ = 0.0;
};

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = -std::numeric_limits<double>::infinity();
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<double>& x, std::size_t p, const std::vector<double>& y,
              const std::vector<double>& w, const ForestParams& params, std::uint64_t seed)
      : x_(x), p_(p), y_(y), w_(w), params_(params), mtry_(params.resolved_mtry(p)), rng_(seed) {}

  Tree build() {
    const auto n = static_cast<std::uint32_t>(y_.size());
    std::vector<std::uint32_t> draws(n, 0);
    if (params_.bootstrap) {
      draw_bootstrap(draws);
    } else {
      std::fill(draws.begin(), draws.end(), 1u);
    }
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t k = 0; k < draws[i]; ++k) samples_.push_back(i);
      if (draws[i] == 0) tree_.oob_rows.push_back(i);
    }
    tree_.nodes.emplace_back();
    grow(0, 0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  double x_at(std::uint32_t row, std::size_t j) const { return x_[row * p_ + j]; }
  double weight(std::uint32_t row) const { return params_.bootstrap ? 1.0 : w_[row]; }

  void draw_bootstrap(std::vector<std::uint32_t>& draws) {
    const auto n = draws.size();
    const bool uniform =
        std::all_of(w_.begin(), w_.end(), [&](double v) { return v == w_.front(); });
    if (uniform) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (std::size_t k = 0; k < n; ++k) ++draws[pick(rng_)];
      return;
    }
    // Cumulative sums scale exactly under power-of-two weight scaling, so the
    // drawn indices do not change when all weights are doubled.
    std::vector<double> cumulative(n);
    std::partial_sum(w_.begin(), w_.end(), cumulative.begin());
    const double total = cumulative.back();
    for (std::size_t k = 0; k < n; ++k) {
      const double u = std::generate_canonical<double, 53>(rng_) * total;
      auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), n - 1);
      ++draws[idx];
    }
  }

  void make_leaf(std::size_t node, std::size_t begin, std::size_t end) {
    RunningMean mean;
    for (std::size_t k = begin; k < end; ++k) mean.add(y_[samples_[k]], weight(samples_[k]));
    auto& nd = tree_.nodes[node];
    nd.feature = -1;
    nd.leaf_begin = static_cast<std::uint32_t>(tree_.leaf_rows.size());
    tree_.leaf_rows.insert(tree_.leaf_rows.end(), samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                           samples_.begin() + static_cast<std::ptrdiff_t>(end));
    nd.leaf_end = static_cast<std::uint32_t>(tree_.leaf_rows.size());
    nd.value = mean.value();
  }

  std::vector<std::size_t> sample_features() {
    std::vector<std::size_t> features(p_);
    std::iota(features.begin(), features.end(), 0);
    for (int k = 0; k < mtry_; ++k) {
      std::uniform_int_distribution<std::size_t> pick(static_cast<std::size_t>(k), p_ - 1);
      std::swap(features[static_cast<std::size_t>(k)], features[pick(rng_)]);
    }
    features.resize(static_cast<std::size_t>(mtry_));
    std::sort(features.begin(), features.end());
    return features;
  }

  std::optional<Split> find_split(std::size_t begin, std::size_t end) {
    const auto count = end - begin;
    const auto min_leaf = static_cast<std::size_t>(params_.min_leaf);
    double total_s = 0.0, total_w = 0.0;
    for (std::size_t k = begin; k < end; ++k) {
      total_s += weight(samples_[k]) * y_[samples_[k]];
      total_w += weight(samples_[k]);
    }

    std::optional<Split> best;
    std::vector<std::pair<double, std::uint32_t>> order(count);
    for (std::size_t feature : sample_features()) {
      for (std::size_t k = 0; k < count; ++k) {
        const auto row = samples_[begin + k];
        order[k] = {x_at(row, feature), row};
      }
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;

      double left_s = 0.0, left_w = 0.0;
      for (std::size_t k = 0; k + 1 < count; ++k) {
        const auto row = order[k].second;
        left_s += weight(row) * y_[row];
        left_w += weight(row);
        const std::size_t n_left = k + 1;
        if (n_left < min_leaf) continue;
        if (count - n_left < min_leaf) break;
        const double a = order[k].first;
        const double b = order[k + 1].first;
        if (a == b) continue;
        const double right_s = total_s - left_s;
        const double right_w = total_w - left_w;
        // Minimizing child SSE is maximizing S_l^2/W_l + S_r^2/W_r.
        const double score = left_s * left_s / left_w + right_s * right_s / right_w;
        if (!best || score > best->score) {
          double threshold = std::midpoint(a, b);
          if (threshold >= b) threshold = a;
          best = Split{feature, threshold, score};
        }
      }
    }
    return best;
  }

  void grow(std::size_t node, std::size_t begin, std::size_t end, int depth) {
    const auto count = end - begin;
    const bool depth_exhausted = params_.max_depth && depth >= *params_.max_depth;
    const double first_y = y_[samples_[begin]];
    const bool pure = std::all_of(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                  samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                  [&](std::uint32_t r) { return y_[r] == first_y; });
    if (depth_exhausted || pure || count < 2 * static_cast<std::size_t>(params_.min_leaf)) {
      make_leaf(node, begin, end);
      return;
    }
    const auto split = find_split(begin, end);
    if (!split) {
      make_leaf(node, begin, end);
      return;
    }

    auto first = samples_.begin() + static_cast<std::ptrdiff_t>(begin);
    auto last = samples_.begin() + static_cast<std::ptrdiff_t>(end);
    auto mid = std::stable_partition(first, last, [&](std::uint32_t r) {
      return x_at(r, split->feature) <= split->threshold;
    });
    const auto middle = static_cast<std::size_t>(mid - samples_.begin());

    const auto left = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    const auto right = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    auto& nd = tree_.nodes[node];
    nd.feature = static_cast<std::int32_t>(split->feature);
    nd.threshold = split->threshold;
    nd.left = left;
    nd.right = right;

    grow(static_cast<std::size_t>(left), begin, middle, depth + 1);
    grow(static_cast<std::size_t>(right), middle, end, depth + 1);
  }

  const std::vector<double>& x_;
  std::size_t p_;
  const std::vector<double>& y_;
  const std::vector<double>& w_;
  const ForestParams& params_;
  int mtry_;
  std::mt19937_64 rng_;
  std::vector<std::uint32_t> samples_;
  Tree tree_;
};

}  // namespace

// ---------------------------------------------------------------------------
// ForestModel

ForestModel ForestModel::train(const Dataset& data, const ForestParams& params) {
  if (data.n_rows < 2) throw TrainingError("training needs at least 2 rows");
  if (data.n_features < 1) throw TrainingError("training needs at least 1 feature");
  if (data.x.size() != data.n_rows * data.n_features || data.y.size() != data.n_rows ||
      data.w.size() != data.n_rows || data.feature_names.size() != data.n_features) {
    throw TrainingError("dataset dimensions are inconsistent");
  }
  for (std::size_t i = 0; i < data.n_rows; ++i) {
    if (!std::isfinite(data.y[i])) throw TrainingError("non-finite response");
    if (!(data.w[i] > 0.0) || !std::isfinite(data.w[i])) {
      throw TrainingError("case weights must be positive and finite");
    }
  }
  for (double v : data.x) {
    if (!std::isfinite(v)) throw TrainingError("non-finite feature value");
  }
  params.validate(data.n_features);

  // Canonical row order makes the model independent of the caller's row order.
  std::vector<std::uint32_t> order(data.n_rows);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto ra = data.row(a);
    const auto rb = data.row(b);
    const int c = std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end())   ? -1
                  : std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end()) ? 1
                                                                                             : 0;
    if (c != 0) return c < 0;
    if (data.y[a] != data.y[b]) return data.y[a] < data.y[b];
    return data.w[a] < data.w[b];
  });

  ForestModel model;
  model.feature_names_ = data.feature_names;
  model.original_index_ = order;
  auto& x = model.x_;
  x.reserve(data.x.size());
  for (auto i : order) {
    const auto r = data.row(i);
    x.insert(x.end(), r.begin(), r.end());
    model.y_.push_back(data.y[i]);
    model.w_.push_back(data.w[i]);
  }

  auto& meta = model.meta_;
  meta.params = params;
  meta.params.threads = 1;
  meta.n_rows = data.n_rows;
  meta.y_min = *std::min_element(model.y_.begin(), model.y_.end());
  meta.y_max = *std::max_element(model.y_.begin(), model.y_.end());
  RunningMean ym;
  for (double v : model.y_) ym.add(v);
  meta.y_mean = ym.value();
  double ss = 0.0;
  for (double v : model.y_) ss += (v - meta.y_mean) * (v - meta.y_mean);
  meta.y_var = ss / static_cast<double>(data.n_rows);
  meta.feature_means = data.feature_means();

  const auto n_trees = static_cast<std::size_t>(params.n_trees);
  model.trees_.resize(n_trees);
  std::size_t n_workers = params.threads == 0 ? std::thread::hardware_concurrency()
                                              : static_cast<std::size_t>(params.threads);
  n_workers = std::clamp<std::size_t>(n_workers, 1, n_trees);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t t = next++; t < n_trees; t = next++) {
      TreeBuilder builder(x, data.n_features, model.y_, model.w_, params, tree_seed(params.seed, t));
      model.trees_[t] = builder.build();
    }
  };
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_workers; ++k) pool.emplace_back(work);
  }
  return model;
}

void ForestModel::check_arity(std::span<const double> x) const {
  if (x.size() != n_features()) {
    throw DomainError("feature vector has " + std::to_string(x.size()) + " values, model expects " +
                      std::to_string(n_features()));
  }
  for (double v : x) {
    if (!std::isfinite(v)) throw DomainError("feature vector contains a non-finite value");
  }
}

double ForestModel::predict_mean(std::span<const double> x) const {
  check_arity(x);
  RunningMean mean;
  for (const auto& tree : trees_) mean.add(tree.leaf_for(x).value);
  return std::clamp(mean.value(), meta_.y_min, meta_.y_max);
}

std::vector<double> ForestModel::predict_mean(const Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.n_rows);
  for (std::size_t i = 0; i < data.n_rows; ++i) out.push_back(predict_mean(data.row(i)));
  return out;
}

std::vector<double> ForestModel::canonical_weights(std::span<const double> x) const {
  std::vector<double> weight(y_.size(), 0.0);
  for (const auto& tree : trees_) {
    const auto& leaf = tree.leaf_for(x);
    double leaf_total = 0.0;
    for (auto k = leaf.leaf_begin; k < leaf.leaf_end; ++k) leaf_total += entry_weight(tree.leaf_rows[k]);
    for (auto k = leaf.leaf_begin; k < leaf.leaf_end; ++k) {
      const auto row = tree.leaf_rows[k];
      weight[row] += entry_weight(row) / leaf_total;
    }
  }
  return weight;
}

std::vector<double> ForestModel::quantile_weights(std::span<const double> x) const {
  check_arity(x);
  const auto canonical = canonical_weights(x);
  std::vector<double> out(y_.size(), 0.0);
  const auto n_trees = static_cast<double>(trees_.size());
  for (std::size_t i = 0; i < canonical.size(); ++i) out[original_index_[i]] = canonical[i] / n_trees;
  return out;
}

std::vector<double> ForestModel::predict_quantiles(std::span<const double> x,
                                                   std::span<const double> probs) const {
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile probabilities must lie in (0, 1)");
  }
  check_arity(x);
  const auto weight = canonical_weights(x);

  std::vector<std::uint32_t> by_y(y_.size());
  std::iota(by_y.begin(), by_y.end(), 0u);
  std::stable_sort(by_y.begin(), by_y.end(), [&](auto a, auto b) { return y_[a] < y_[b]; });
  std::vector<double> cumulative(by_y.size());
  double running = 0.0;
  for (std::size_t k = 0; k < by_y.size(); ++k) {
    running += weight[by_y[k]];
    cumulative[k] = running;
  }
  const double total = running;

  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) {
    // Smallest y whose cumulative share reaches p; the slack absorbs rounding
    // in the per-tree share sums.
    const double target = p * total - 1e-12 * total;
    auto it = std::lower_bound(cumulative.begin(), cumulative.end(), target);
    auto k = static_cast<std::size_t>(it - cumulative.begin());
    k = std::min(k, by_y.size() - 1);
    // Skip zero-weight rows so the answer is a response with positive mass.
    while (k + 1 < by_y.size() && weight[by_y[k]] == 0.0) ++k;
    out.push_back(y_[by_y[k]]);
  }
  return out;
}

std::vector<double> ForestModel::training_responses() const {
  std::vector<double> out(y_.size());
  for (std::size_t i = 0; i < y_.size(); ++i) out[original_index_[i]] = y_[i];
  return out;
}

std::vector<std::optional<double>> ForestModel::oob_predictions() const {
  const auto p = n_features();
  std::vector<RunningMean> means(y_.size());
  for (const auto& tree : trees_) {
    for (auto row : tree.oob_rows) {
      means[row].add(tree.leaf_for({x_.data() + row * p, p}).value);
    }
  }
  std::vector<std::optional<double>> out(y_.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    if (means[i].total() > 0.0) out[original_index_[i]] = means[i].value();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization
//
// Line-oriented text, every double in shortest round-trip form:
//
//   heatcast-forest 1
//   features <p> <name>...
//   params <n_trees> <mtry> <min_leaf> <max_depth|-1> <seed> <bootstrap 0|1>
//   rows <n>
//   x <n*p values>            canonical row-major order
//   y <n values>
//   w <n values>
//   order <n indices>         canonical -> caller row index
//   tree <n_nodes> <n_leaf_rows> <n_oob>
//   <feature> <threshold> <left> <right> <leaf_begin> <leaf_end> <value>   (n_nodes lines)
//   leaf_rows <indices>
//   oob <indices>
//   end

namespace {

template <typename T>
void write_list(std::ostream& out, std::string_view tag, const std::vector<T>& v) {
  out << tag;
  for (const auto& e : v) {
    if constexpr (std::is_floating_point_v<T>) {
      out << ' ' << csv::format(e);
    } else {
      out << ' ' << e;
    }
  }
  out << '\n';
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string s;
    if (!(in_ >> s)) throw ParseError(0, "truncated forest model");
    return s;
  }
  void expect(std::string_view tag) {
    const auto w = word();
    if (w != tag) throw ParseError(0, "forest model: expected '" + std::string(tag) + "', got '" + w + "'");
  }
  double real() {
    const auto w = word();
    try {
      return csv::parse_double(w);
    } catch (const DomainError& e) {
      throw ParseError(0, std::string("forest model: ") + e.what());
    }
  }
  long integer() {
    const auto w = word();
    try {
      return csv::parse_long(w);
    } catch (const DomainError& e) {
      throw ParseError(0, std::string("forest model: ") + e.what());
    }
  }
  std::uint64_t u64() {
    const auto w = word();
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size()) throw ParseError(0, "forest model: bad seed");
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void ForestModel::save(std::ostream& out) const {
  const auto& pr = meta_.params;
  out << "heatcast-forest 1\n";
  out << "features " << feature_names_.size();
  for (const auto& f : feature_names_) out << ' ' << f;
  out << '\n';
  out << "params " << pr.n_trees << ' ' << pr.resolved_mtry(n_features()) << ' ' << pr.min_leaf << ' '
      << (pr.max_depth ? *pr.max_depth : -1) << ' ' << pr.seed << ' ' << (pr.bootstrap ? 1 : 0) << '\n';
  out << "rows " << y_.size() << '\n';
  write_list(out, "x", x_);
  write_list(out, "y", y_);
  write_list(out, "w", w_);
  write_list(out, "order", original_index_);
  for (const auto& tree : trees_) {
    out << "tree " << tree.nodes.size() << ' ' << tree.leaf_rows.size() << ' ' << tree.oob_rows.size()
        << '\n';
    for (const auto& n : tree.nodes) {
      out << n.feature << ' ' << csv::format(n.threshold) << ' ' << n.left << ' ' << n.right << ' '
          << n.leaf_begin << ' ' << n.leaf_end << ' ' << csv::format(n.value) << '\n';
    }
    write_list(out, "leaf_rows", tree.leaf_rows);
    write_list(out, "oob", tree.oob_rows);
  }
  out << "end\n";
}

ForestModel ForestModel::load(std::istream& in) {
  TokenReader r(in);
  r.expect("heatcast-forest");
  if (r.integer() != 1) throw ParseError(0, "unsupported forest model version");

  ForestModel m;
  r.expect("features");
  const auto p = static_cast<std::size_t>(r.integer());
  for (std::size_t j = 0; j < p; ++j) m.feature_names_.push_back(r.word());

  r.expect("params");
  auto& pr = m.meta_.params;
  pr.n_trees = static_cast<int>(r.integer());
  pr.mtry = static_cast<int>(r.integer());
  pr.min_leaf = static_cast<int>(r.integer());
  const long depth = r.integer();
  if (depth >= 0) pr.max_depth = static_cast<int>(depth);
  pr.seed = r.u64();
  pr.bootstrap = r.integer() != 0;

  r.expect("rows");
  const auto n = static_cast<std::size_t>(r.integer());
  r.expect("x");
  m.x_.resize(n * p);
  for (auto& v : m.x_) v = r.real();
  r.expect("y");
  m.y_.resize(n);
  for (auto& v : m.y_) v = r.real();
  r.expect("w");
  m.w_.resize(n);
  for (auto& v : m.w_) v = r.real();
  r.expect("order");
  m.original_index_.resize(n);
  for (auto& v : m.original_index_) {
    v = static_cast<std::uint32_t>(r.integer());
    if (v >= n) throw ParseError(0, "forest model: row index out of range");
  }

  for (int t = 0; t < pr.n_trees; ++t) {
    r.expect("tree");
    Tree tree;
    tree.nodes.resize(static_cast<std::size_t>(r.integer()));
    tree.leaf_rows.resize(static_cast<std::size_t>(r.integer()));
    tree.oob_rows.resize(static_cast<std::size_t>(r.integer()));
    for (auto& nd : tree.nodes) {
      nd.feature = static_cast<std::int32_t>(r.integer());
      nd.threshold = r.real();
      nd.left = static_cast<std::int32_t>(r.integer());
      nd.right = static_cast<std::int32_t>(r.integer());
      nd.leaf_begin = static_cast<std::uint32_t>(r.integer());
      nd.leaf_end = static_cast<std::uint32_t>(r.integer());
      nd.value = r.real();
    }
    r.expect("leaf_rows");
    for (auto& v : tree.leaf_rows) v = static_cast<std::uint32_t>(r.integer());
    r.expect("oob");
    for (auto& v : tree.oob_rows) v = static_cast<std::uint32_t>(r.integer());
    const auto n_nodes = static_cast<std::int32_t>(tree.nodes.size());
    for (const auto& nd : tree.nodes) {
      const bool bad_children = !nd.is_leaf() && (nd.left <= 0 || nd.right <= 0 || nd.left >= n_nodes ||
                                                   nd.right >= n_nodes ||
                                                   static_cast<std::size_t>(nd.feature) >= p);
      const bool bad_leaf = nd.is_leaf() && (nd.leaf_begin > nd.leaf_end ||
                                             nd.leaf_end > tree.leaf_rows.size() ||
                                             nd.leaf_begin == nd.leaf_end);
      if (bad_children || bad_leaf) throw ParseError(0, "forest model: corrupt tree structure");
    }
    m.trees_.push_back(std::move(tree));
  }
  r.expect("end");

  auto& meta = m.meta_;
  meta.n_rows = n;
  if (n > 0) {
    meta.y_min = *std::min_element(m.y_.begin(), m.y_.end());
    meta.y_max = *std::max_element(m.y_.begin(), m.y_.end());
  }
  RunningMean ym;
  for (double v : m.y_) ym.add(v);
  meta.y_mean = ym.value();
  double ss = 0.0;
  for (double v : m.y_) ss += (v - meta.y_mean) * (v - meta.y_mean);
  meta.y_var = n > 0 ? ss / static_cast<double>(n) : 0.0;
  // Feature means in caller order, matching Dataset::feature_means.
  meta.feature_means.assign(p, 0.0);
  std::vector<std::size_t> by_original(n);
  for (std::size_t i = 0; i < n; ++i) by_original[m.original_index_[i]] = i;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = by_original[k];
    for (std::size_t j = 0; j < p; ++j) meta.feature_means[j] += m.x_[i * p + j];
  }
  if (n > 0) {
    for (auto& v : meta.feature_means) v /= static_cast<double>(n);
  }
  return m;
}

void ForestModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  save(out);
  if (!out) throw IoError("write failed for " + path.string());
}

ForestModel ForestModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return load(in);
}

// ---------------------------------------------------------------------------

VarianceExplained variance_explained(const ForestModel& model) {
  if (!model.meta().params.bootstrap) {
    throw DomainError("variance explained needs out-of-bag rows; train with bootstrap on");
  }
  const auto oob = model.oob_predictions();
  const auto y = model.training_responses();
  VarianceExplained out;
  RunningMean y_mean;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (oob[i]) {
      y_mean.add(y[i]);
    } else {
      ++out.n_excluded;
    }
  }
  if (y_mean.total() == 0.0) throw DomainError("no row was ever out of bag");
  double sse = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (!oob[i]) continue;
    sse += (y[i] - *oob[i]) * (y[i] - *oob[i]);
    ss += (y[i] - y_mean.value()) * (y[i] - y_mean.value());
  }
  if (ss == 0.0) throw DomainError("response variance is zero");
  out.value = 1.0 - sse / ss;
  return out;
}

std::vector<std::pair<double, double>> partial_dependence(const ForestModel& model,
                                                          const Dataset& training,
                                                          std::string_view feature,
                                                          std::span<const double> grid) {
  const auto j = training.feature_index(feature);
  if (training.n_features != model.n_features()) {
    throw DomainError("training table does not match the model's feature space");
  }
  if (grid.empty()) throw DomainError("partial dependence grid is empty");
  auto point = training.feature_means();
  std::vector<std::pair<double, double>> curve;
  curve.reserve(grid.size());
  for (double v : grid) {
    point[j] = v;
    curve.emplace_back(v, model.predict_mean(point));
  }
  return curve;
}

}  // namespace heatcast
