#pragma once

// Predictors behind one fit/predict contract: the average-score baseline,
// multi-task group lasso and gradient-boosted trees.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "lingpred/boosted_trees.hpp"
#include "lingpred/error.hpp"
#include "lingpred/features.hpp"
#include "lingpred/group_lasso.hpp"
#include "lingpred/table.hpp"

namespace lingpred {

enum class ModelKind { Mean, GroupLasso, BoostedTrees };

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Mean: return "mean";
    case ModelKind::GroupLasso: return "group_lasso";
    case ModelKind::BoostedTrees: return "boosted_trees";
  }
  return "";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view s) {
  if (s == "mean") return ModelKind::Mean;
  if (s == "group_lasso") return ModelKind::GroupLasso;
  if (s == "boosted_trees") return ModelKind::BoostedTrees;
  return std::nullopt;
}

// One training example.
struct Sample {
  FeatureVector features;
  double score = 0;
  std::string task;
};

// Per-feature centering and scaling fitted on training data only.
// Constant features keep scale 1 and are passed through centered.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<bool> constant;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const auto n = static_cast<double>(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double m = X.col(j).mean();
      const double var = (X.col(j).array() - m).square().sum() / n;
      const double sd = std::sqrt(var);
      const bool flat = !(sd > 1e-12 * std::max(1.0, std::abs(m)));
      s.mean.push_back(m);
      s.scale.push_back(flat ? 1.0 : sd);
      s.constant.push_back(flat);
    }
    return s;
  }

  Eigen::RowVectorXd apply(std::span<const double> x) const {
    Eigen::RowVectorXd z(static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) z[static_cast<Eigen::Index>(j)] = (x[j] - mean[j]) / scale[j];
    return z;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    Eigen::MatrixXd Z(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j)
      Z.col(j) = (X.col(j).array() - mean[static_cast<std::size_t>(j)]) / scale[static_cast<std::size_t>(j)];
    return Z;
  }

  bool operator==(const Standardizer&) const = default;
};

struct MeanParams {
  double value = 0;
};

struct GroupLassoParams {
  double lambda = 0.005;
  double tol = 1e-6;
  int max_iters = 10000;
};

struct GroupLassoModel {
  GroupLassoParams params;
  std::vector<std::string> tasks;  // column order of weights
  Eigen::MatrixXd weights;         // d x K, on standardized features
  Eigen::VectorXd intercepts;      // K
  double objective = 0;
  int iterations = 0;
  bool converged = false;
};

struct RegressionModel {
  ModelKind kind = ModelKind::Mean;
  std::vector<std::string> feature_order;
  Standardizer standardizer;
  std::variant<MeanParams, GroupLassoModel, TreeEnsemble> params;
};

struct Prediction {
  double value = 0;      // clamped to [0,1]
  double unclamped = 0;
};

// Which predictor to fit and with what hyperparameters.
struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::Mean;
  BoostParams boost;
  GroupLassoParams lasso;
};

namespace detail {

inline void check_samples(std::span<const Sample> samples, std::vector<std::string>& order) {
  if (samples.empty()) throw ModelError("cannot fit a model on zero samples");
  order = samples.front().features.names;
  for (const auto& s : samples) {
    if (s.features.names != order) throw ModelError("training samples disagree on feature names/order");
    if (s.features.values.size() != order.size()) throw ModelError("feature vector length mismatch");
    if (!std::isfinite(s.score)) throw ModelError("non-finite training score");
    for (double v : s.features.values)
      if (!std::isfinite(v)) throw ModelError("non-finite training feature");
  }
}

inline Eigen::MatrixXd design(std::span<const Sample> samples, std::size_t d) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = 0; j < d; ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = samples[i].features.values[j];
  return X;
}

}  // namespace detail

inline RegressionModel fit_mean_baseline(std::span<const Sample> samples) {
  RegressionModel m;
  m.kind = ModelKind::Mean;
  detail::check_samples(samples, m.feature_order);
  double s = 0;
  for (const auto& x : samples) s += x.score;
  m.params = MeanParams{s / static_cast<double>(samples.size())};
  const auto X = detail::design(samples, m.feature_order.size());
  m.standardizer = Standardizer::fit(X);
  return m;
}

// Multi-task fit: samples are grouped by their task label, features are
// standardized on the pooled data, and each task gets an unpenalized
// intercept by centering its responses and columns.
inline RegressionModel fit_group_lasso(std::span<const Sample> samples, const GroupLassoParams& params = {}) {
  RegressionModel m;
  m.kind = ModelKind::GroupLasso;
  detail::check_samples(samples, m.feature_order);
  const auto d = m.feature_order.size();
  if (d == 0) throw ModelError("group lasso needs at least one feature");
  const Eigen::MatrixXd X = detail::design(samples, d);
  m.standardizer = Standardizer::fit(X);
  const Eigen::MatrixXd Z = m.standardizer.apply(X);

  std::map<std::string, std::vector<Eigen::Index>> by_task;
  for (std::size_t i = 0; i < samples.size(); ++i) by_task[samples[i].task].push_back(static_cast<Eigen::Index>(i));

  GroupLassoProblem prob;
  prob.lambda = params.lambda;
  prob.tol = params.tol;
  prob.max_iters = params.max_iters;
  GroupLassoModel gl;
  gl.params = params;
  std::vector<Eigen::RowVectorXd> col_means;
  std::vector<double> y_means;
  for (const auto& [task, rows] : by_task) {
    Eigen::MatrixXd Xk(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    Eigen::VectorXd yk(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      Xk.row(static_cast<Eigen::Index>(r)) = Z.row(rows[r]);
      yk[static_cast<Eigen::Index>(r)] = samples[static_cast<std::size_t>(rows[r])].score;
    }
    const Eigen::RowVectorXd mu = Xk.colwise().mean();
    const double ybar = yk.mean();
    prob.X.push_back(Xk.rowwise() - mu);
    prob.y.push_back(yk.array() - ybar);
    col_means.push_back(mu);
    y_means.push_back(ybar);
    gl.tasks.push_back(task);
  }

  const auto sol = solve_group_lasso(prob);
  gl.weights = sol.W;
  gl.intercepts.resize(static_cast<Eigen::Index>(gl.tasks.size()));
  for (std::size_t k = 0; k < gl.tasks.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    gl.intercepts[kk] = y_means[k] - col_means[k].dot(sol.W.col(kk));
  }
  gl.objective = sol.objective;
  gl.iterations = sol.iterations;
  gl.converged = sol.converged;
  m.params = std::move(gl);
  return m;
}

inline RegressionModel fit_boosted_trees(std::span<const Sample> samples, const BoostParams& params = {}) {
  params.validate();
  RegressionModel m;
  m.kind = ModelKind::BoostedTrees;
  detail::check_samples(samples, m.feature_order);
  const Eigen::MatrixXd X = detail::design(samples, m.feature_order.size());
  m.standardizer = Standardizer::fit(X);
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y[static_cast<Eigen::Index>(i)] = samples[i].score;
  m.params = fit_tree_ensemble(m.standardizer.apply(X), y, params);
  return m;
}

inline RegressionModel fit_model(const ModelSpec& spec, std::span<const Sample> samples) {
  switch (spec.kind) {
    case ModelKind::Mean: return fit_mean_baseline(samples);
    case ModelKind::GroupLasso: return fit_group_lasso(samples, spec.lasso);
    case ModelKind::BoostedTrees: return fit_boosted_trees(samples, spec.boost);
  }
  throw ModelError("unknown model kind");
}

// Applies the model to one feature vector. `task` selects the group-lasso
// column; it may be empty for single-task models.
inline Prediction predict(const RegressionModel& model, const FeatureVector& fv, std::string_view task = {}) {
  if (fv.names != model.feature_order) {
    std::string expected = join(model.feature_order, ",");
    throw ModelError("feature names/order mismatch: model expects [" + expected + "], got [" + join(fv.names, ",") +
                     "]");
  }
  for (double v : fv.values)
    if (!std::isfinite(v)) throw ModelError("non-finite feature value");
  const Eigen::RowVectorXd z = model.standardizer.apply(fv.values);

  double raw = 0;
  if (const auto* mp = std::get_if<MeanParams>(&model.params)) {
    raw = mp->value;
  } else if (const auto* gl = std::get_if<GroupLassoModel>(&model.params)) {
    // Single-task models answer for any label.
    std::size_t k = 0;
    if (gl->tasks.size() > 1) {
      if (task.empty()) throw ModelError("multi-task model needs a task to predict for");
      auto it = std::find(gl->tasks.begin(), gl->tasks.end(), task);
      if (it == gl->tasks.end()) throw ModelError("model has no weights for task '" + std::string(task) + "'");
      k = static_cast<std::size_t>(it - gl->tasks.begin());
    }
    const auto kk = static_cast<Eigen::Index>(k);
    raw = gl->intercepts[kk] + z.dot(gl->weights.col(kk));
  } else {
    raw = std::get<TreeEnsemble>(model.params).evaluate(z);
  }
  return {std::clamp(raw, 0.0, 1.0), raw};
}

// ---------------------------------------------------------------------------
// Serialization: versioned JSON, reals as 17-significant-digit strings.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json real(double v) { return format_double17(v); }

inline double real(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  return parse_double(j.get<std::string>(), "model file");
}

inline nlohmann::json reals_json(std::span<const double> v) {
  auto a = nlohmann::json::array();
  for (double x : v) a.push_back(real(x));
  return a;
}

inline std::vector<double> reals(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(real(x));
  return v;
}

}  // namespace detail

inline nlohmann::json model_to_json(const RegressionModel& m) {
  using nlohmann::json;
  json j;
  j["format_version"] = kModelFormatVersion;
  j["kind"] = model_kind_name(m.kind);
  j["feature_order"] = m.feature_order;
  json st;
  st["mean"] = detail::reals_json(m.standardizer.mean);
  st["scale"] = detail::reals_json(m.standardizer.scale);
  auto constant = json::array();
  for (bool c : m.standardizer.constant) constant.push_back(c);
  st["constant"] = constant;
  j["standardizer"] = st;

  if (const auto* mp = std::get_if<MeanParams>(&m.params)) {
    j["hyperparameters"] = json::object();
    j["mean"] = detail::real(mp->value);
  } else if (const auto* gl = std::get_if<GroupLassoModel>(&m.params)) {
    j["hyperparameters"] = {{"lambda", detail::real(gl->params.lambda)},
                            {"tol", detail::real(gl->params.tol)},
                            {"max_iters", gl->params.max_iters}};
    j["tasks"] = gl->tasks;
    auto w = json::array();
    for (Eigen::Index r = 0; r < gl->weights.rows(); ++r) {
      auto row = json::array();
      for (Eigen::Index c = 0; c < gl->weights.cols(); ++c) row.push_back(detail::real(gl->weights(r, c)));
      w.push_back(row);
    }
    j["weights"] = w;
    auto b = json::array();
    for (Eigen::Index k = 0; k < gl->intercepts.size(); ++k) b.push_back(detail::real(gl->intercepts[k]));
    j["intercepts"] = b;
    j["solver"] = {{"objective", detail::real(gl->objective)},
                   {"iterations", gl->iterations},
                   {"converged", gl->converged}};
  } else {
    const auto& e = std::get<TreeEnsemble>(m.params);
    j["hyperparameters"] = {{"n_trees", e.params.n_trees},
                            {"max_depth", e.params.max_depth},
                            {"learning_rate", detail::real(e.params.learning_rate)}};
    j["base"] = detail::real(e.base);
    auto trees = json::array();
    for (const auto& t : e.trees) {
      auto nodes = json::array();
      for (const auto& n : t.nodes)
        nodes.push_back(json::array({n.feature, detail::real(n.threshold), n.left, n.right, detail::real(n.value)}));
      trees.push_back(nodes);
    }
    j["trees"] = trees;
  }
  return j;
}

inline RegressionModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion)
      throw DataError("unsupported model format version " + j.at("format_version").dump());
    auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) throw DataError("unknown model kind " + j.at("kind").dump());
    RegressionModel m;
    m.kind = *kind;
    m.feature_order = j.at("feature_order").get<std::vector<std::string>>();
    const auto& st = j.at("standardizer");
    m.standardizer.mean = detail::reals(st.at("mean"));
    m.standardizer.scale = detail::reals(st.at("scale"));
    for (const auto& c : st.at("constant")) m.standardizer.constant.push_back(c.get<bool>());
    const auto d = m.feature_order.size();
    if (m.standardizer.mean.size() != d || m.standardizer.scale.size() != d || m.standardizer.constant.size() != d)
      throw DataError("standardizer length does not match feature_order");
    const auto& hp = j.at("hyperparameters");
    switch (m.kind) {
      case ModelKind::Mean:
        m.params = MeanParams{detail::real(j.at("mean"))};
        break;
      case ModelKind::GroupLasso: {
        GroupLassoModel gl;
        gl.params.lambda = detail::real(hp.at("lambda"));
        gl.params.tol = detail::real(hp.at("tol"));
        gl.params.max_iters = hp.at("max_iters").get<int>();
        gl.tasks = j.at("tasks").get<std::vector<std::string>>();
        const auto K = static_cast<Eigen::Index>(gl.tasks.size());
        const auto& w = j.at("weights");
        if (w.size() != d) throw DataError("weights row count does not match feature_order");
        gl.weights.resize(static_cast<Eigen::Index>(d), K);
        for (std::size_t r = 0; r < d; ++r) {
          auto row = detail::reals(w[r]);
          if (static_cast<Eigen::Index>(row.size()) != K) throw DataError("weights column count does not match tasks");
          for (Eigen::Index c = 0; c < K; ++c) gl.weights(static_cast<Eigen::Index>(r), c) = row[static_cast<std::size_t>(c)];
        }
        auto b = detail::reals(j.at("intercepts"));
        if (static_cast<Eigen::Index>(b.size()) != K) throw DataError("intercept count does not match tasks");
        gl.intercepts = Eigen::Map<Eigen::VectorXd>(b.data(), K);
        if (j.contains("solver")) {
          const auto& s = j.at("solver");
          gl.objective = detail::real(s.at("objective"));
          gl.iterations = s.at("iterations").get<int>();
          gl.converged = s.at("converged").get<bool>();
        }
        m.params = std::move(gl);
        break;
      }
      case ModelKind::BoostedTrees: {
        TreeEnsemble e;
        e.params.n_trees = hp.at("n_trees").get<int>();
        e.params.max_depth = hp.at("max_depth").get<int>();
        e.params.learning_rate = detail::real(hp.at("learning_rate"));
        e.base = detail::real(j.at("base"));
        for (const auto& t : j.at("trees")) {
          RegressionTree tree;
          for (const auto& n : t) {
            TreeNode node{n.at(0).get<int>(), detail::real(n.at(1)), n.at(2).get<int>(), n.at(3).get<int>(),
                          detail::real(n.at(4))};
            tree.nodes.push_back(node);
          }
          const int count = static_cast<int>(tree.nodes.size());
          if (count == 0) throw DataError("empty tree in model file");
          for (const auto& node : tree.nodes)
            if (node.feature >= 0 && (node.feature >= static_cast<int>(d) || node.left <= 0 || node.right <= 0 ||
                                      node.left >= count || node.right >= count))
              throw DataError("malformed tree node in model file");
          e.trees.push_back(std::move(tree));
        }
        m.params = std::move(e);
        break;
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

}  // namespace lingpred
