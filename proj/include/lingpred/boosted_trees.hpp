#pragma once

// Gradient-boosted regression trees with squared-error loss and exact greedy
// split search. No subsampling and no leaf regularization: the ensemble starts
// at the training mean and each round adds learning_rate * tree(residuals).
//
// Split order is deterministic: features are scanned in index order and
// thresholds in ascending order; a candidate replaces the incumbent only on a
// strictly larger gain (beyond a 1e-12 relative tie band), so ties go to the
// lowest feature, then the lowest threshold. A sample goes left iff x[feature] <= threshold.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "lingpred/error.hpp"

namespace lingpred {

struct BoostParams {
  int n_trees = 100;
  int max_depth = 10;
  double learning_rate = 0.1;

  void validate() const {
    if (n_trees < 1) throw ModelError("boosted trees: n_trees must be >= 1");
    if (max_depth < 0) throw ModelError("boosted trees: max_depth must be >= 0");
    if (!(learning_rate > 0 && learning_rate <= 1)) throw ModelError("boosted trees: learning_rate must be in (0,1]");
  }
};

// Leaf iff feature < 0.
struct TreeNode {
  int feature = -1;
  double threshold = 0;
  int left = -1;
  int right = -1;
  double value = 0;

  bool operator==(const TreeNode&) const = default;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  template <typename Row>
  double evaluate(const Row& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }

  bool operator==(const RegressionTree&) const = default;
};

struct TreeEnsemble {
  double base = 0;
  BoostParams params;
  std::vector<RegressionTree> trees;
  std::vector<double> training_mse;  // after each round

  template <typename Row>
  double evaluate(const Row& x) const {
    double s = base;
    for (const auto& t : trees) s += params.learning_rate * t.evaluate(x);
    return s;
  }
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0;
  double gain = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& X, const Eigen::VectorXd& r, int max_depth)
      : X_(X), r_(r), max_depth_(max_depth) {}

  RegressionTree build() {
    std::vector<int> idx(static_cast<std::size_t>(X_.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    tree_.nodes.clear();
    grow(idx, 0);
    return std::move(tree_);
  }

 private:
  int grow(const std::vector<int>& idx, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double sum = 0;
    for (int i : idx) sum += r_[i];
    const double mean = sum / static_cast<double>(idx.size());
    tree_.nodes[static_cast<std::size_t>(id)].value = mean;
    if (depth >= max_depth_ || idx.size() < 2) return id;

    const SplitChoice best = find_split(idx, sum);
    if (best.feature < 0) return id;

    std::vector<int> left, right;
    for (int i : idx) (X_(i, best.feature) <= best.threshold ? left : right).push_back(i);
    if (left.empty() || right.empty()) return id;

    const int l = grow(left, depth + 1);
    const int r = grow(right, depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  SplitChoice find_split(const std::vector<int>& idx, double sum) const {
    const double n = static_cast<double>(idx.size());
    double sq = 0;
    for (int i : idx) sq += r_[i] * r_[i];
    const double parent = sum * sum / n;
    // Gains at rounding-noise level are not splits, and gains closer than
    // tie_eps are ties (identical partitions can differ in the last bits).
    const double min_gain = 1e-14 * std::max(sq, std::numeric_limits<double>::min());
    const double tie_eps = 1e-12 * sq;

    SplitChoice best;
    best.gain = min_gain;
    std::vector<int> order(idx);
    for (int f = 0; f < X_.cols(); ++f) {
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return X_(a, f) < X_(b, f); });
      double left_sum = 0;
      for (std::size_t k = 0; k + 1 < order.size(); ++k) {
        left_sum += r_[order[k]];
        const double a = X_(order[k], f);
        const double b = X_(order[k + 1], f);
        if (!(a < b)) continue;
        const double nl = static_cast<double>(k + 1);
        const double nr = n - nl;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / nl + right_sum * right_sum / nr - parent;
        if (gain > best.gain + (best.feature >= 0 ? tie_eps : 0.0)) {
          double thr = a + (b - a) / 2;
          if (!(thr < b)) thr = a;
          best = {f, thr, gain};
        }
      }
    }
    if (best.feature < 0) best.gain = 0;
    return best;
  }

  const Eigen::MatrixXd& X_;
  const Eigen::VectorXd& r_;
  int max_depth_;
  RegressionTree tree_;
};

}  // namespace detail

// Fits on the rows of X (already in model space).
inline TreeEnsemble fit_tree_ensemble(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const BoostParams& params) {
  params.validate();
  if (X.rows() < 1) throw ModelError("boosted trees: no training samples");
  if (X.rows() != y.size()) throw ModelError("boosted trees: design/response length mismatch");
  if (!X.allFinite() || !y.allFinite()) throw ModelError("boosted trees: non-finite training data");

  TreeEnsemble ens;
  ens.params = params;
  ens.base = y.mean();
  Eigen::VectorXd pred = Eigen::VectorXd::Constant(y.size(), ens.base);
  for (int t = 0; t < params.n_trees; ++t) {
    const Eigen::VectorXd resid = y - pred;
    ens.trees.push_back(detail::TreeBuilder(X, resid, params.max_depth).build());
    auto& tree = ens.trees.back();
    // Residuals of a mean-initialized squared-loss fit sum to zero, so a tree
    // without splits is exactly zero; drop the rounding noise.
    if (tree.nodes.size() == 1) tree.nodes[0].value = 0.0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) pred[i] += params.learning_rate * tree.evaluate(X.row(i));
    ens.training_mse.push_back((y - pred).squaredNorm() / static_cast<double>(y.size()));
  }
  return ens;
}

}  // namespace lingpred
