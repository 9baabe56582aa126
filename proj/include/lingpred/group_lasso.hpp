#pragma once

// Multi-task group lasso:
//
//   min_W  sum_k 1/(2 n_k) ||y_k - X_k w_k||^2  +  lambda * sum_j ||W_j||_2
//
// W is d x K (column k = weights of task k, row j = feature j across tasks).
// Solved by proximal gradient descent (ISTA) with step 1/L, where L bounds
// the Lipschitz constant of the smooth part: max_k lambda_max(X_k^T X_k / n_k).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "lingpred/error.hpp"

namespace lingpred {

// Proximal operator of tau * ||.||_2: v * max(0, 1 - tau / ||v||).
template <typename Derived>
Eigen::VectorXd block_soft_threshold(const Eigen::MatrixBase<Derived>& v, double tau) {
  if (tau < 0) throw ModelError("block_soft_threshold: negative threshold");
  const double norm = v.norm();
  if (norm <= tau) return Eigen::VectorXd::Zero(v.size());
  return v * (1.0 - tau / norm);
}

struct GroupLassoProblem {
  std::vector<Eigen::MatrixXd> X;  // n_k x d per task
  std::vector<Eigen::VectorXd> y;  // n_k per task
  double lambda = 0.005;
  double tol = 1e-6;  // relative objective change
  int max_iters = 10000;
  bool record_trace = false;

  std::size_t n_tasks() const { return X.size(); }
  Eigen::Index n_features() const { return X.empty() ? 0 : X.front().cols(); }

  void validate() const {
    if (X.empty()) throw ModelError("group lasso: no tasks");
    if (X.size() != y.size()) throw ModelError("group lasso: design/response task count mismatch");
    if (!(lambda >= 0) || !std::isfinite(lambda)) throw ModelError("group lasso: lambda must be >= 0");
    if (!(tol > 0)) throw ModelError("group lasso: tol must be > 0");
    if (max_iters < 1) throw ModelError("group lasso: max_iters must be >= 1");
    const auto d = n_features();
    for (std::size_t k = 0; k < X.size(); ++k) {
      if (X[k].cols() != d) throw ModelError("group lasso: task " + std::to_string(k) + " has a different dimension");
      if (X[k].rows() < 1) throw ModelError("group lasso: task " + std::to_string(k) + " has no samples");
      if (X[k].rows() != y[k].size())
        throw ModelError("group lasso: task " + std::to_string(k) + " design/response length mismatch");
      if (!X[k].allFinite() || !y[k].allFinite())
        throw ModelError("group lasso: non-finite values in task " + std::to_string(k));
    }
  }
};

struct GroupLassoSolution {
  Eigen::MatrixXd W;  // d x K
  double objective = 0;
  int iterations = 0;
  bool converged = false;
  double lipschitz = 0;
  std::vector<double> trace;  // objective after each accepted step, if requested
};

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
inline double power_iteration(const Eigen::MatrixXd& A, int max_iters = 1000, double tol = 1e-12) {
  if (A.rows() == 0) return 0;
  // Start from the basis vector of the largest diagonal entry. For a PSD
  // matrix A*e_j is then nonzero unless A is; a fixed start such as the ones
  // vector can be orthogonal to the whole range (e.g. two centered rows).
  Eigen::Index j = 0;
  if (A.diagonal().maxCoeff(&j) <= 0) return 0;
  Eigen::VectorXd v = Eigen::VectorXd::Unit(A.rows(), j);
  double est = 0;
  for (int it = 0; it < max_iters; ++it) {
    Eigen::VectorXd w = A * v;
    const double nw = w.norm();
    if (nw == 0) return 0;
    v = w / nw;
    if (std::abs(nw - est) <= tol * nw) return nw;
    est = nw;
  }
  return est;
}

namespace detail {

inline double smooth_loss(const GroupLassoProblem& p, const Eigen::MatrixXd& W) {
  double s = 0;
  for (std::size_t k = 0; k < p.n_tasks(); ++k) {
    const double n = static_cast<double>(p.X[k].rows());
    s += (p.y[k] - p.X[k] * W.col(static_cast<Eigen::Index>(k))).squaredNorm() / (2.0 * n);
  }
  return s;
}

inline Eigen::MatrixXd smooth_gradient(const GroupLassoProblem& p, const Eigen::MatrixXd& W) {
  Eigen::MatrixXd G(W.rows(), W.cols());
  for (std::size_t k = 0; k < p.n_tasks(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double n = static_cast<double>(p.X[k].rows());
    G.col(kk) = -p.X[k].transpose() * (p.y[k] - p.X[k] * W.col(kk)) / n;
  }
  return G;
}

}  // namespace detail

inline double group_lasso_objective(const GroupLassoProblem& p, const Eigen::MatrixXd& W) {
  return detail::smooth_loss(p, W) + p.lambda * W.rowwise().norm().sum();
}

// Largest KKT violation over the feature blocks:
//   zero rows:    max(0, ||grad_j|| - lambda)
//   nonzero rows: ||grad_j + lambda W_j / ||W_j|| ||
inline double kkt_residual(const GroupLassoProblem& p, const Eigen::MatrixXd& W) {
  const Eigen::MatrixXd G = detail::smooth_gradient(p, W);
  double worst = 0;
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    const double wn = W.row(j).norm();
    double r = 0;
    if (wn == 0) r = std::max(0.0, G.row(j).norm() - p.lambda);
    else r = (G.row(j) + p.lambda * W.row(j) / wn).norm();
    worst = std::max(worst, r);
  }
  return worst;
}

inline GroupLassoSolution solve_group_lasso(const GroupLassoProblem& p) {
  p.validate();
  const auto d = p.n_features();
  const auto K = static_cast<Eigen::Index>(p.n_tasks());

  double L = 0;
  for (const auto& X : p.X) {
    const Eigen::MatrixXd A = X.transpose() * X / static_cast<double>(X.rows());
    L = std::max(L, power_iteration(A));
  }

  GroupLassoSolution sol;
  sol.W = Eigen::MatrixXd::Zero(d, K);
  sol.lipschitz = L;
  sol.objective = group_lasso_objective(p, sol.W);
  if (L == 0) {
    // Zero design: the loss ignores W and the penalty is minimized at 0.
    sol.converged = true;
    return sol;
  }

  for (int it = 1; it <= p.max_iters; ++it) {
    const Eigen::MatrixXd G = detail::smooth_gradient(p, sol.W);
    Eigen::MatrixXd next(d, K);
    double f_next = 0;
    // The power-iteration estimate can sit just below the true constant;
    // double L until the step does not increase the objective.
    for (int backtrack = 0;; ++backtrack) {
      const Eigen::MatrixXd Z = sol.W - G / L;
      for (Eigen::Index j = 0; j < d; ++j) next.row(j) = block_soft_threshold(Z.row(j).transpose(), p.lambda / L);
      f_next = group_lasso_objective(p, next);
      if (f_next <= sol.objective || backtrack >= 60) break;
      L *= 2;
    }
    const double prev = sol.objective;
    sol.W = std::move(next);
    sol.objective = f_next;
    sol.iterations = it;
    if (p.record_trace) sol.trace.push_back(f_next);
    const double denom = std::max(std::abs(prev), std::numeric_limits<double>::min());
    if (std::abs(prev - f_next) / denom < p.tol) {
      sol.converged = true;
      break;
    }
  }
  sol.lipschitz = L;
  return sol;
}

}  // namespace lingpred
