#pragma once

// Leave-one-language-out (LOLO) evaluation, MAE aggregation and side-by-side
// method comparison.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "lingpred/datastore.hpp"
#include "lingpred/error.hpp"
#include "lingpred/models.hpp"
#include "lingpred/parallel.hpp"

namespace lingpred {

// 100 * mean |predicted - actual|.
inline double mae_x100(std::span<const std::pair<double, double>> pairs) {
  if (pairs.empty()) throw DataError("MAE of an empty set");
  double s = 0;
  for (const auto& [p, a] : pairs) {
    if (!(p >= 0 && p <= 1 && a >= 0 && a <= 1)) throw DataError("MAE inputs must lie in [0,1]");
    s += std::abs(p - a);
  }
  return 100.0 * s / static_cast<double>(pairs.size());
}

struct LanguageResult {
  double predicted = 0;  // mean prediction over the fold's records
  double actual = 0;     // mean actual score over the fold's records
  double abs_error = 0;  // mean per-record |predicted - actual|
  std::size_t n_records = 0;

  bool operator==(const LanguageResult&) const = default;
};

struct RowResult {
  std::vector<std::string> pivots;
  std::string target;
  double predicted = 0;
  double unclamped = 0;
  double actual = 0;

  bool operator==(const RowResult&) const = default;
};

struct EvaluationReport {
  std::string task_id;
  std::string method;
  ModelKind kind = ModelKind::Mean;
  std::map<std::string, LanguageResult> per_language;
  std::vector<RowResult> rows;  // canonical record order
  double mae_x100 = 0;          // over languages (primary aggregation)
  double row_mae_x100 = 0;      // over individual (pivot, target) records
  std::size_t n_folds = 0;
};

struct LoloOptions {
  // Also drop training records in which the held-out language is a pivot.
  bool strict_lolo = false;
  int jobs = 1;
};

using FeatureFn = std::function<FeatureVector(const PerformanceRecord&)>;

namespace detail {

inline std::vector<PerformanceRecord> canonical(std::span<const PerformanceRecord> records) {
  std::vector<PerformanceRecord> out(records.begin(), records.end());
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  return out;
}

inline bool in_training(const PerformanceRecord& r, const std::string& held_out, bool strict) {
  if (r.target == held_out) return false;
  if (strict && std::find(r.pivots.begin(), r.pivots.end(), held_out) != r.pivots.end()) return false;
  return true;
}

inline double language_mae_x100(const std::map<std::string, LanguageResult>& per_language) {
  std::vector<std::pair<double, double>> errs;
  for (const auto& [_, r] : per_language) errs.emplace_back(r.abs_error, 0.0);
  return mae_x100(errs);
}

}  // namespace detail

// Recomputes the report's MAE from its per-language map.
inline double recompute_mae_x100(const EvaluationReport& r) { return detail::language_mae_x100(r.per_language); }

// LOLO over one task's records. For every target t the model is fitted on
// records whose target differs from t and scored on the records targeting t.
// `auxiliary` records (other tasks) join the training set of multi-task group
// lasso fits, with t excluded from them as well; other kinds ignore them.
// Mean-baseline fits need no features, so `features` is not called for them.
inline EvaluationReport lolo_evaluate(std::span<const PerformanceRecord> records, const ModelSpec& spec,
                                      const FeatureFn& features, const LoloOptions& opts = {},
                                      std::span<const PerformanceRecord> auxiliary = {}) {
  if (records.empty()) throw DataError("LOLO: no records");
  const std::string task = records.front().task_id;
  for (const auto& r : records)
    if (r.task_id != task) throw DataError("LOLO: records span several tasks ('" + task + "', '" + r.task_id + "')");
  for (const auto& r : auxiliary)
    if (r.task_id == task) throw DataError("LOLO: auxiliary records must come from other tasks");

  const auto primary = detail::canonical(records);
  const auto aux = spec.kind == ModelKind::GroupLasso ? detail::canonical(auxiliary) : std::vector<PerformanceRecord>{};

  std::vector<std::string> targets;
  for (const auto& r : primary) targets.push_back(r.target);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.size() < 2) throw DataError("LOLO on task '" + task + "' needs at least 2 distinct target languages");

  // Features are a pure function of the record; compute each once.
  const bool need_features = spec.kind != ModelKind::Mean;
  std::vector<Sample> p_samples(primary.size()), a_samples(aux.size());
  auto build = [&](const std::vector<PerformanceRecord>& src, std::vector<Sample>& dst) {
    parallel_for(src.size(), opts.jobs, [&](std::size_t i) {
      dst[i].score = src[i].score;
      dst[i].task = src[i].task_id;
      if (need_features) dst[i].features = features(src[i]);
    });
  };
  build(primary, p_samples);
  build(aux, a_samples);

  struct Fold {
    std::vector<std::size_t> test;
    std::vector<Prediction> predictions;
  };
  std::vector<Fold> folds(targets.size());
  parallel_for(targets.size(), opts.jobs, [&](std::size_t f) {
    const auto& held_out = targets[f];
    std::vector<Sample> train;
    auto& fold = folds[f];
    for (std::size_t i = 0; i < primary.size(); ++i) {
      if (primary[i].target == held_out) fold.test.push_back(i);
      else if (detail::in_training(primary[i], held_out, opts.strict_lolo)) train.push_back(p_samples[i]);
    }
    for (std::size_t i = 0; i < aux.size(); ++i)
      if (detail::in_training(aux[i], held_out, opts.strict_lolo)) train.push_back(a_samples[i]);
    try {
      if (train.empty()) throw ModelError("empty training set");
      const auto model = fit_model(spec, train);
      for (auto i : fold.test) fold.predictions.push_back(predict(model, p_samples[i].features, task));
    } catch (const Error& e) {
      throw ModelError("LOLO fold '" + held_out + "' of task '" + task + "' (" + spec.name + "): " + e.what());
    }
  });

  EvaluationReport rep;
  rep.task_id = task;
  rep.method = spec.name;
  rep.kind = spec.kind;
  rep.n_folds = targets.size();
  rep.rows.resize(primary.size());
  std::vector<std::pair<double, double>> row_pairs;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    LanguageResult lr;
    const auto& fold = folds[f];
    for (std::size_t j = 0; j < fold.test.size(); ++j) {
      const auto i = fold.test[j];
      const auto& pr = fold.predictions[j];
      lr.predicted += pr.value;
      lr.actual += primary[i].score;
      lr.abs_error += std::abs(pr.value - primary[i].score);
      rep.rows[i] = {primary[i].pivots, primary[i].target, pr.value, pr.unclamped, primary[i].score};
    }
    const auto n = static_cast<double>(fold.test.size());
    lr.n_records = fold.test.size();
    lr.predicted /= n;
    lr.actual /= n;
    lr.abs_error /= n;
    rep.per_language.emplace(targets[f], lr);
  }
  for (const auto& r : rep.rows) row_pairs.emplace_back(r.predicted, r.actual);
  rep.mae_x100 = detail::language_mae_x100(rep.per_language);
  rep.row_mae_x100 = mae_x100(row_pairs);
  return rep;
}

// ---------------------------------------------------------------------------
// Comparison across methods

// An externally produced estimate, e.g. scores on machine-translated test sets.
struct ExternalEstimate {
  std::string method;
  std::string target;
  double predicted = 0;
  std::optional<double> actual;  // defaults to the reports' actual for the target
};

struct ComparisonRow {
  std::string method;
  bool external = false;
  double mae_x100 = 0;
  std::size_t covered = 0;
  std::size_t total = 0;
  std::map<std::string, std::optional<double>> abs_error_x100;  // absent where not covered
};

struct ComparisonTable {
  std::string task_id;
  std::vector<std::string> languages;
  std::vector<ComparisonRow> rows;
};

// Rows: mean baselines first, then external methods (first-appearance order),
// then the remaining reports in input order.
inline ComparisonTable compare_methods(std::span<const EvaluationReport> reports,
                                       std::span<const ExternalEstimate> external = {}) {
  if (reports.empty()) throw DataError("comparison needs at least one evaluation report");
  ComparisonTable table;
  table.task_id = reports.front().task_id;
  for (const auto& [lang, _] : reports.front().per_language) table.languages.push_back(lang);
  for (const auto& r : reports) {
    if (r.task_id != table.task_id)
      throw DataError("cannot compare reports of different tasks ('" + table.task_id + "' vs '" + r.task_id + "')");
    std::vector<std::string> langs;
    for (const auto& [lang, _] : r.per_language) langs.push_back(lang);
    if (langs != table.languages) throw DataError("reports for task '" + table.task_id + "' cover different languages");
  }

  auto from_report = [&](const EvaluationReport& r) {
    ComparisonRow row;
    row.method = r.method;
    row.mae_x100 = r.mae_x100;
    row.total = table.languages.size();
    row.covered = r.per_language.size();
    for (const auto& [lang, lr] : r.per_language) row.abs_error_x100[lang] = 100.0 * lr.abs_error;
    return row;
  };

  for (const auto& r : reports)
    if (r.kind == ModelKind::Mean) table.rows.push_back(from_report(r));

  std::vector<std::string> ext_order;
  std::map<std::string, std::map<std::string, double>> ext_err;
  for (const auto& e : external) {
    auto it = reports.front().per_language.find(e.target);
    if (it == reports.front().per_language.end())
      throw DataError("external method '" + e.method + "' covers '" + e.target + "', which task '" + table.task_id +
                      "' does not evaluate");
    const double actual = e.actual.value_or(it->second.actual);
    if (!(e.predicted >= 0 && e.predicted <= 1 && actual >= 0 && actual <= 1))
      throw DataError("external estimate for (" + e.method + "," + e.target + ") outside [0,1]");
    if (!ext_err.count(e.method)) ext_order.push_back(e.method);
    if (!ext_err[e.method].emplace(e.target, std::abs(e.predicted - actual)).second)
      throw DataError("duplicate external estimate for (" + e.method + "," + e.target + ")");
  }
  for (const auto& m : ext_order) {
    ComparisonRow row;
    row.method = m;
    row.external = true;
    row.total = table.languages.size();
    std::vector<std::pair<double, double>> pairs;
    for (const auto& lang : table.languages) {
      auto it = ext_err[m].find(lang);
      if (it == ext_err[m].end()) {
        row.abs_error_x100[lang] = std::nullopt;
      } else {
        row.abs_error_x100[lang] = 100.0 * it->second;
        pairs.emplace_back(it->second, 0.0);
      }
    }
    row.covered = pairs.size();
    row.mae_x100 = mae_x100(pairs);
    table.rows.push_back(std::move(row));
  }

  for (const auto& r : reports)
    if (r.kind != ModelKind::Mean) table.rows.push_back(from_report(r));
  return table;
}

// ---------------------------------------------------------------------------
// Output

inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["task_id"] = r.task_id;
  j["method"] = r.method;
  j["kind"] = model_kind_name(r.kind);
  j["n_folds"] = r.n_folds;
  j["mae_x100"] = r.mae_x100;
  j["row_mae_x100"] = r.row_mae_x100;
  auto& pl = j["per_language"] = nlohmann::json::object();
  for (const auto& [lang, lr] : r.per_language)
    pl[lang] = {{"predicted", lr.predicted},
                {"actual", lr.actual},
                {"abs_error", lr.abs_error},
                {"n_records", lr.n_records}};
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"pivots", row.pivots},
                    {"target", row.target},
                    {"predicted", row.predicted},
                    {"unclamped", row.unclamped},
                    {"actual", row.actual}});
  j["rows"] = rows;
  return j;
}

inline nlohmann::json comparison_to_json(const ComparisonTable& t) {
  nlohmann::json j;
  j["task_id"] = t.task_id;
  j["languages"] = t.languages;
  auto rows = nlohmann::json::array();
  for (const auto& r : t.rows) {
    nlohmann::json errs = nlohmann::json::object();
    for (const auto& [lang, e] : r.abs_error_x100) errs[lang] = e ? nlohmann::json(*e) : nlohmann::json(nullptr);
    rows.push_back({{"method", r.method},
                    {"external", r.external},
                    {"mae_x100", r.mae_x100},
                    {"covered", r.covered},
                    {"total", r.total},
                    {"abs_error_x100", errs}});
  }
  j["rows"] = rows;
  return j;
}

// Aligned human-readable table.
inline void write_comparison_text(std::ostream& out, const ComparisonTable& t) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"method", "MAEx100", "coverage"};
  for (const auto& l : t.languages) header.push_back(l);
  cells.push_back(header);
  auto fixed2 = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };
  for (const auto& r : t.rows) {
    std::vector<std::string> line{r.method + (r.external ? " (external)" : ""), fixed2(r.mae_x100),
                                  std::to_string(r.covered) + "/" + std::to_string(r.total)};
    for (const auto& l : t.languages) {
      auto it = r.abs_error_x100.find(l);
      line.push_back(it != r.abs_error_x100.end() && it->second ? fixed2(*it->second) : "-");
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  out << "task: " << t.task_id << '\n';
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c) out << "  ";
      if (c == 0) out << std::left << std::setw(static_cast<int>(width[c])) << line[c];
      else out << std::right << std::setw(static_cast<int>(width[c])) << line[c];
    }
    out << '\n';
  }
}

// `target,method,abs_error_x100`, one line per covered cell. Header is written
// only when `header` is set so several tables can share one file.
inline void write_per_language_csv(std::ostream& out, const ComparisonTable& t, bool header = true) {
  if (header) write_row(out, {"target", "method", "abs_error_x100"});
  for (const auto& l : t.languages)
    for (const auto& r : t.rows) {
      auto it = r.abs_error_x100.find(l);
      if (it != r.abs_error_x100.end() && it->second) write_row(out, {l, r.method, format_double(*it->second)});
    }
}

}  // namespace lingpred
