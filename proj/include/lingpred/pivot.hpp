#pragma once

// Pivot selection: for a target language, the candidate training language
// with the highest predicted score, found by linear search over candidates.
// Ties go to the lexicographically smallest language code.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <functional>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "lingpred/error.hpp"
#include "lingpred/models.hpp"
#include "lingpred/parallel.hpp"

namespace lingpred {

struct PivotSelection {
  std::string target;
  std::string best_pivot;
  double predicted = 0;
  std::map<std::string, double> full_row;  // candidate -> predicted score

  bool operator==(const PivotSelection&) const = default;
};

using PivotFeatureFn = std::function<FeatureVector(const std::string& pivot, const std::string& target)>;

namespace detail {

inline std::vector<std::string> sorted_unique(std::span<const std::string> codes, const char* what) {
  std::vector<std::string> v(codes.begin(), codes.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  if (v.empty()) throw DataError(std::string("pivot selection: no ") + what);
  return v;
}

// Argmax over a row whose keys iterate in ascending code order.
inline PivotSelection argmax_row(const std::string& target, std::map<std::string, double> row) {
  PivotSelection sel;
  sel.target = target;
  bool first = true;
  for (const auto& [pivot, score] : row) {
    if (first || score > sel.predicted) {
      sel.best_pivot = pivot;
      sel.predicted = score;
      first = false;
    }
  }
  sel.full_row = std::move(row);
  return sel;
}

inline double predict_pair(const RegressionModel& model, const PivotFeatureFn& features, const std::string& pivot,
                           const std::string& target, std::string_view task) {
  FeatureVector fv;
  try {
    fv = features(pivot, target);
  } catch (const Error& e) {
    throw DataError("features for pivot '" + pivot + "' -> target '" + target + "': " + e.what());
  }
  return predict(model, fv, task).value;
}

}  // namespace detail

inline PivotSelection select_best_pivot(const RegressionModel& model, const std::string& target,
                                        std::span<const std::string> candidates, const PivotFeatureFn& features,
                                        std::string_view task = {}) {
  std::map<std::string, double> row;
  for (const auto& p : detail::sorted_unique(candidates, "candidate pivots"))
    row[p] = detail::predict_pair(model, features, p, target, task);
  return detail::argmax_row(target, std::move(row));
}

struct PivotGrid {
  std::vector<std::string> pivots;   // sorted
  std::vector<std::string> targets;  // sorted
  std::vector<std::vector<double>> cells;  // [pivot][target]
  std::map<std::string, double> pivot_average;
  std::vector<PivotSelection> selections;  // one per target
  double best_selection_average = 0;       // mean over targets of each target's best score
  // Pivots whose training size came from the configured default.
  std::vector<std::string> default_size_pivots;
};

inline PivotGrid pivot_matrix(const RegressionModel& model, std::span<const std::string> targets,
                              std::span<const std::string> candidates, const PivotFeatureFn& features,
                              std::string_view task = {}, int jobs = 1) {
  PivotGrid g;
  g.pivots = detail::sorted_unique(candidates, "candidate pivots");
  g.targets = detail::sorted_unique(targets, "targets");
  const auto P = g.pivots.size();
  const auto T = g.targets.size();
  g.cells.assign(P, std::vector<double>(T, 0.0));
  parallel_for(P * T, jobs, [&](std::size_t c) {
    const auto p = c / T;
    const auto t = c % T;
    g.cells[p][t] = detail::predict_pair(model, features, g.pivots[p], g.targets[t], task);
  });
  for (std::size_t p = 0; p < P; ++p) {
    double s = 0;
    for (double v : g.cells[p]) s += v;
    g.pivot_average[g.pivots[p]] = s / static_cast<double>(T);
  }
  double best = 0;
  for (std::size_t t = 0; t < T; ++t) {
    std::map<std::string, double> row;
    for (std::size_t p = 0; p < P; ++p) row[g.pivots[p]] = g.cells[p][t];
    g.selections.push_back(detail::argmax_row(g.targets[t], std::move(row)));
    best += g.selections.back().predicted;
  }
  g.best_selection_average = best / static_cast<double>(T);
  return g;
}

inline void write_pivot_grid_csv(std::ostream& out, const PivotGrid& g) {
  write_row(out, {"pivot", "target", "predicted"});
  for (std::size_t p = 0; p < g.pivots.size(); ++p)
    for (std::size_t t = 0; t < g.targets.size(); ++t)
      write_row(out, {g.pivots[p], g.targets[t], format_double(g.cells[p][t])});
}

inline nlohmann::json pivot_summary_json(const PivotGrid& g) {
  nlohmann::json j;
  j["pivots"] = g.pivots;
  j["n_targets"] = g.targets.size();
  j["pivot_average"] = g.pivot_average;
  j["best_selection_average"] = g.best_selection_average;
  auto sel = nlohmann::json::object();
  for (const auto& s : g.selections) sel[s.target] = {{"best_pivot", s.best_pivot}, {"predicted", s.predicted}};
  j["selections"] = sel;
  j["default_train_size_pivots"] = g.default_size_pivots;
  return j;
}

}  // namespace lingpred
