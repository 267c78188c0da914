#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "heatcast/design.hpp"

namespace heatcast {

// Dense row-major feature matrix with response and positive case weights.
struct Dataset {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> w;
  std::vector<std::string> feature_names;

  // Features are the four precursors in PrecursorVector::as_features order.
  static Dataset from_design(const std::vector<DesignRow>& rows);
  // Single-predictor dataset with unit weights.
  static Dataset from_single_feature(std::string name, std::span<const double> x,
                                     std::span<const double> y);

  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * n_features, n_features};
  }
  double at(std::size_t i, std::size_t j) const { return x[i * n_features + j]; }
  std::vector<double> feature_means() const;
  std::size_t feature_index(std::string_view name) const;  // DomainError if unknown
};

struct ForestParams {
  int n_trees = 500;
  std::optional<int> mtry;  // default max(1, p / 3)
  int min_leaf = 5;
  std::optional<int> max_depth;
  std::uint64_t seed = 42;
  bool bootstrap = true;
  // Worker threads for training; 0 uses hardware concurrency. Never affects output.
  int threads = 1;

  int resolved_mtry(std::size_t n_features) const;
  void validate(std::size_t n_features) const;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  // Leaf payload: slice of Tree::leaf_rows and the leaf mean response.
  std::uint32_t leaf_begin = 0;
  std::uint32_t leaf_end = 0;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;
  // In-bag training rows per leaf; a row drawn k times appears k times.
  std::vector<std::uint32_t> leaf_rows;
  std::vector<std::uint32_t> oob_rows;

  const TreeNode& leaf_for(std::span<const double> x) const;
};

struct TrainingMeta {
  ForestParams params;
  std::size_t n_rows = 0;
  double y_mean = 0.0;
  double y_var = 0.0;
  double y_min = 0.0;
  double y_max = 0.0;
  std::vector<double> feature_means;
};

// Regression forest that also answers conditional-quantile queries through
// leaf co-membership weights over the stored training responses.
class ForestModel {
 public:
  // Throws TrainingError on fewer than 2 rows, no features, non-finite
  // responses or non-positive weights.
  static ForestModel train(const Dataset& data, const ForestParams& params);

  double predict_mean(std::span<const double> x) const;
  std::vector<double> predict_mean(const Dataset& data) const;

  // Weighted left-continuous inverse CDF of training responses at each prob.
  std::vector<double> predict_quantiles(std::span<const double> x,
                                        std::span<const double> probs) const;
  // Per training row (in caller order), average over trees of leaf share.
  std::vector<double> quantile_weights(std::span<const double> x) const;

  // Out-of-bag mean per training row in caller order; nullopt if never OOB.
  std::vector<std::optional<double>> oob_predictions() const;

  const std::vector<Tree>& trees() const { return trees_; }
  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t n_features() const { return feature_names_.size(); }
  const TrainingMeta& meta() const { return meta_; }
  // Training responses in caller order.
  std::vector<double> training_responses() const;

  void save(std::ostream& out) const;
  static ForestModel load(std::istream& in);
  void save(const std::filesystem::path& path) const;
  static ForestModel load(const std::filesystem::path& path);

 private:
  void check_arity(std::span<const double> x) const;
  // Unnormalized (sums to n_trees) co-membership weights in canonical order.
  std::vector<double> canonical_weights(std::span<const double> x) const;
  double entry_weight(std::uint32_t row) const { return meta_.params.bootstrap ? 1.0 : w_[row]; }

  std::vector<std::string> feature_names_;
  TrainingMeta meta_;
  // Training rows in canonical (sorted) order; trees index these.
  std::vector<double> x_;
  std::vector<double> y_;
  std::vector<double> w_;
  // canonical index -> caller's row index
  std::vector<std::uint32_t> original_index_;
  std::vector<Tree> trees_;
};

struct VarianceExplained {
  double value = 0.0;
  std::size_t n_excluded = 0;  // rows that were never out of bag
};

// 1 - MSE_oob / Var(y). DomainError without bootstrap or with constant y.
VarianceExplained variance_explained(const ForestModel& model);

// Fitted mean along `feature` with every other feature fixed at its training mean.
std::vector<std::pair<double, double>> partial_dependence(const ForestModel& model,
                                                          const Dataset& training,
                                                          std::string_view feature,
                                                          std::span<const double> grid);

}  // namespace heatcast
