#pragma once

// Workflow commands behind the command-line tool. Each writes its outputs
// under the configured run directory; JSON outputs are a pure function of the
// configuration and inputs, and the wall-clock timestamp lives only in
// metadata.json.

#include <nlohmann/json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lingpred/audit.hpp"
#include "lingpred/config.hpp"
#include "lingpred/evaluation.hpp"
#include "lingpred/features.hpp"
#include "lingpred/models.hpp"
#include "lingpred/parallel.hpp"
#include "lingpred/pivot.hpp"

namespace lingpred {

inline constexpr const char* kToolVersion = "1.0.0";

namespace detail {

template <typename Fn>
void write_output(const fs::path& path, Fn&& fn) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  fn(out);
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

inline void write_json(const fs::path& path, const nlohmann::json& j) {
  write_output(path, [&](std::ostream& o) { o << j.dump(2) << '\n'; });
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

inline std::vector<ModelSpec> model_specs(const RunConfig& cfg) {
  if (!cfg.models.empty()) return cfg.models;
  ModelSpec mean{"baseline", ModelKind::Mean, {}, {}};
  ModelSpec trees{"boosted_trees", ModelKind::BoostedTrees, {}, {}};
  ModelSpec lasso{"group_lasso", ModelKind::GroupLasso, {}, {}};
  return {mean, trees, lasso};
}

inline const ModelSpec& find_spec(const std::vector<ModelSpec>& specs, const std::string& name) {
  for (const auto& s : specs)
    if (s.name == name) return s;
  throw DataError("no model named '" + name + "' in the configuration");
}

inline std::vector<std::string> selected_tasks(const RunConfig& cfg, const Workspace& ws) {
  const auto loaded = ws.task_ids();
  if (cfg.tasks.empty()) return loaded;
  for (const auto& t : cfg.tasks)
    if (std::find(loaded.begin(), loaded.end(), t) == loaded.end())
      throw DataError("configured task '" + t + "' has no performance records");
  return cfg.tasks;
}

// Records of the other tasks that share a multi-task group-lasso fit with `task`.
inline std::vector<PerformanceRecord> auxiliary_records(const RunConfig& cfg, const Workspace& ws,
                                                        const std::string& task) {
  auto group = cfg.group_lasso_tasks.empty() ? ws.task_ids() : cfg.group_lasso_tasks;
  std::vector<PerformanceRecord> out;
  for (const auto& r : ws.records)
    if (r.task_id != task && std::find(group.begin(), group.end(), r.task_id) != group.end()) out.push_back(r);
  return out;
}

inline FeatureFn record_features(const RunConfig& cfg, const Workspace& ws) {
  return [&cfg, &ws](const PerformanceRecord& r) {
    return assemble_features(r.target, r.pivots, ws.context(r.task_id), cfg.features);
  };
}

inline std::vector<Sample> samples_for(const RunConfig& cfg, const Workspace& ws,
                                       std::span<const PerformanceRecord> records) {
  const auto fn = record_features(cfg, ws);
  std::vector<Sample> out(records.size());
  parallel_for(records.size(), cfg.jobs, [&](std::size_t i) {
    out[i] = Sample{fn(records[i]), records[i].score, records[i].task_id};
  });
  return out;
}

inline RegressionModel train_for_task(const RunConfig& cfg, const Workspace& ws, const ModelSpec& spec,
                                      const std::string& task) {
  auto records = ws.records_for(task);
  if (records.empty()) throw DataError("task '" + task + "' has no performance records");
  if (spec.kind == ModelKind::GroupLasso) {
    auto aux = auxiliary_records(cfg, ws, task);
    records.insert(records.end(), aux.begin(), aux.end());
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  return fit_model(spec, samples_for(cfg, ws, records));
}

}  // namespace detail

// Writes resolved_config.json (deterministic) and metadata.json (timestamp).
inline void write_run_metadata(const RunConfig& cfg, const std::string& command) {
  fs::create_directories(cfg.output_dir);
  detail::write_json(cfg.output_dir / "resolved_config.json", run_config_to_json(cfg));
  detail::write_json(cfg.output_dir / "metadata.json",
                     {{"command", command}, {"tool_version", kToolVersion}, {"started_utc", detail::utc_timestamp()}});
}

// ---------------------------------------------------------------------------

inline nlohmann::json cmd_validate(const RunConfig& cfg, std::ostream& log) {
  Warnings warnings;
  auto ws = Workspace::load(cfg, &warnings);

  nlohmann::json j;
  auto& tasks = j["tasks"] = nlohmann::json::object();
  std::set<std::string> languages;
  for (const auto& t : ws->task_ids()) {
    std::set<std::string> targets, pivots;
    std::size_t n = 0;
    for (const auto& r : ws->records_for(t)) {
      ++n;
      targets.insert(r.target);
      pivots.insert(r.pivots.begin(), r.pivots.end());
    }
    languages.insert(targets.begin(), targets.end());
    languages.insert(pivots.begin(), pivots.end());
    tasks[t] = {{"records", n}, {"targets", targets.size()}, {"pivots", std::vector<std::string>(pivots.begin(), pivots.end())}};
  }
  j["records"] = ws->records.size();
  j["languages"] = languages.size();
  j["profiles"] = ws->profiles.size();
  auto& mats = j["matrices"] = nlohmann::json::object();
  for (const auto& [f, m] : ws->matrices) mats[std::string(facet_name(f))] = m.entries().size();
  j["vocabularies"] = ws->vocabularies.size();
  j["tokenizer_languages"] = ws->tokenizer.size();
  j["train_size_tasks"] = ws->train_sizes.size();
  j["registry_tasks"] = ws->registry ? ws->registry->tasks.size() : 0;
  std::size_t n_ext = 0;
  for (const auto& [_, v] : ws->external) n_ext += v.size();
  j["external_estimates"] = n_ext;
  std::vector<std::string> unprofiled;
  for (const auto& l : languages)
    if (!ws->profiles.count(l)) unprofiled.push_back(l);
  j["languages_without_profile"] = unprofiled;
  j["warnings"] = warnings;
  j["valid"] = true;

  write_run_metadata(cfg, "validate");
  detail::write_json(cfg.output_dir / "report.json", j);
  log << "valid: " << ws->records.size() << " records over " << ws->task_ids().size() << " tasks, " << languages.size()
      << " languages, " << ws->profiles.size() << " profiles\n";
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  return j;
}

// One CSV row per performance record of the selected tasks.
inline std::size_t cmd_featurize(const RunConfig& cfg, std::ostream& log) {
  auto ws = Workspace::load(cfg);
  std::vector<PerformanceRecord> records;
  for (const auto& t : detail::selected_tasks(cfg, *ws)) {
    auto r = ws->records_for(t);
    records.insert(records.end(), r.begin(), r.end());
  }
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.key() < b.key(); });
  const auto samples = detail::samples_for(cfg, *ws, records);

  write_run_metadata(cfg, "featurize");
  detail::write_output(cfg.output_dir / "features.csv", [&](std::ostream& o) {
    std::vector<std::string> header{"task", "pivots", "target", "score"};
    for (const auto& n : feature_names(cfg.features)) header.push_back(n);
    header.push_back("imputed");
    write_row(o, header);
    for (std::size_t i = 0; i < records.size(); ++i) {
      std::vector<std::string> row{records[i].task_id, join(records[i].pivots), records[i].target,
                                   format_double(records[i].score)};
      for (double v : samples[i].features.values) row.push_back(format_double(v));
      row.push_back(join(samples[i].features.imputed, " | "));
      write_row(o, row);
    }
  });
  log << "featurized " << records.size() << " records -> " << (cfg.output_dir / "features.csv").string() << '\n';
  return records.size();
}

// Fits one configured model on every record of `task` and serializes it.
inline RegressionModel cmd_train(const RunConfig& cfg, const std::string& task, const std::string& model_name,
                                 std::ostream& log) {
  auto ws = Workspace::load(cfg);
  const auto specs = detail::model_specs(cfg);
  const auto& spec = model_name.empty() ? specs.front() : detail::find_spec(specs, model_name);
  auto model = detail::train_for_task(cfg, *ws, spec, task);

  write_run_metadata(cfg, "train");
  const auto path = cfg.output_dir / ("model_" + spec.name + ".json");
  detail::write_json(path, model_to_json(model));
  log << "trained " << spec.name << " on task " << task << " -> " << path.string() << '\n';
  return model;
}

struct LoloRun {
  std::vector<EvaluationReport> reports;
  std::vector<ComparisonTable> comparisons;
};

inline LoloRun cmd_lolo(const RunConfig& cfg, std::ostream& log) {
  auto ws = Workspace::load(cfg);
  const auto specs = detail::model_specs(cfg);
  const auto features = detail::record_features(cfg, *ws);
  const LoloOptions opts{cfg.strict_lolo, cfg.jobs};

  LoloRun run;
  nlohmann::json report;
  auto& tasks_json = report["tasks"] = nlohmann::json::object();
  for (const auto& task : detail::selected_tasks(cfg, *ws)) {
    const auto records = ws->records_for(task);
    std::vector<EvaluationReport> reports;
    for (const auto& spec : specs) {
      std::vector<PerformanceRecord> aux;
      if (spec.kind == ModelKind::GroupLasso) aux = detail::auxiliary_records(cfg, *ws, task);
      try {
        reports.push_back(lolo_evaluate(records, spec, features, opts, aux));
      } catch (const ModelError& e) {
        throw ModelError("task '" + task + "', model '" + spec.name + "': " + e.what());
      } catch (const DataError& e) {
        throw DataError("task '" + task + "', model '" + spec.name + "': " + e.what());
      }
    }
    std::vector<ExternalEstimate> ext;
    if (auto it = ws->external.find(task); it != ws->external.end()) ext = it->second;
    auto table = compare_methods(reports, ext);

    auto& tj = tasks_json[task];
    auto arr = nlohmann::json::array();
    for (const auto& r : reports) arr.push_back(report_to_json(r));
    tj["reports"] = arr;
    tj["comparison"] = comparison_to_json(table);
    run.reports.insert(run.reports.end(), reports.begin(), reports.end());
    run.comparisons.push_back(std::move(table));
  }
  report["strict_lolo"] = cfg.strict_lolo;

  write_run_metadata(cfg, "lolo");
  detail::write_json(cfg.output_dir / "report.json", report);
  detail::write_output(cfg.output_dir / "comparison.txt", [&](std::ostream& o) {
    for (std::size_t i = 0; i < run.comparisons.size(); ++i) {
      if (i) o << '\n';
      write_comparison_text(o, run.comparisons[i]);
    }
  });
  detail::write_output(cfg.output_dir / "per_language.csv", [&](std::ostream& o) {
    for (std::size_t i = 0; i < run.comparisons.size(); ++i) write_per_language_csv(o, run.comparisons[i], i == 0);
  });
  for (const auto& t : run.comparisons) write_comparison_text(log, t);
  return run;
}

struct PredictionRow {
  std::vector<std::string> pivots;
  std::string target;
  Prediction prediction;
};

// Scores every target in `targets` for the pivot set `pivots` with a saved model.
inline std::vector<PredictionRow> cmd_predict(const RunConfig& cfg, const fs::path& model_path, const std::string& task,
                                              const std::vector<std::string>& pivots,
                                              const std::vector<std::string>& targets, std::ostream& log) {
  std::ifstream in(model_path);
  if (!in) throw DataError("cannot open model '" + model_path.string() + "'");
  nlohmann::json mj;
  try {
    in >> mj;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model '" + model_path.string() + "' is not valid JSON: " + e.what());
  }
  const auto model = model_from_json(mj);
  auto ws = Workspace::load(cfg);
  if (targets.empty()) throw DataError("predict: no target languages given");

  std::vector<PredictionRow> rows(targets.size());
  parallel_for(targets.size(), cfg.jobs, [&](std::size_t i) {
    const auto fv = assemble_features(targets[i], pivots, ws->context(task), cfg.features);
    rows[i] = PredictionRow{fv.pivots, targets[i], predict(model, fv, task)};
  });

  write_run_metadata(cfg, "predict");
  detail::write_output(cfg.output_dir / "predictions.csv", [&](std::ostream& o) {
    write_row(o, {"pivots", "target", "predicted", "unclamped"});
    for (const auto& r : rows)
      write_row(o, {join(r.pivots), r.target, format_double(r.prediction.value), format_double(r.prediction.unclamped)});
  });
  for (const auto& r : rows) log << join(r.pivots) << " -> " << r.target << ": " << format_double(r.prediction.value) << '\n';
  return rows;
}

inline PivotGrid cmd_pivot(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.pivot) throw DataError("configuration has no 'pivot' section");
  const auto& pc = *cfg.pivot;
  auto ws = Workspace::load(cfg);
  const auto specs = detail::model_specs(cfg);
  const auto& spec = detail::find_spec(specs, pc.model);
  const auto model = detail::train_for_task(cfg, *ws, spec, pc.task);

  std::vector<std::string> targets = pc.targets;
  if (targets.empty())
    for (const auto& [code, _] : ws->profiles) targets.push_back(code);
  const auto& ctx = ws->context(pc.task);
  PivotFeatureFn fn = [&](const std::string& pivot, const std::string& target) {
    return assemble_features(target, {pivot}, ctx, cfg.features);
  };
  auto grid = pivot_matrix(model, targets, pc.candidates, fn, pc.task, cfg.jobs);
  for (const auto& p : grid.pivots)
    if (!ctx.train_size(p)) grid.default_size_pivots.push_back(p);

  auto summary = pivot_summary_json(grid);
  summary["task"] = pc.task;
  summary["model"] = spec.name;
  write_run_metadata(cfg, "pivot");
  detail::write_json(cfg.output_dir / "report.json", summary);
  detail::write_output(cfg.output_dir / "pivot_grid.csv", [&](std::ostream& o) { write_pivot_grid_csv(o, grid); });
  detail::write_output(cfg.output_dir / "pivot_selection.csv", [&](std::ostream& o) {
    write_row(o, {"target", "best_pivot", "predicted"});
    for (const auto& s : grid.selections) write_row(o, {s.target, s.best_pivot, format_double(s.predicted)});
  });
  log << "pivot grid " << grid.pivots.size() << " x " << grid.targets.size() << '\n';
  for (const auto& [p, avg] : grid.pivot_average) log << "  " << p << " average " << format_double(avg) << '\n';
  if (!grid.default_size_pivots.empty())
    log << "  training size defaulted for: " << join(grid.default_size_pivots, ", ") << '\n';
  return grid;
}

inline CoverageReport cmd_audit(const RunConfig& cfg, std::ostream& log) {
  if (!cfg.registry) throw DataError("configuration has no 'registry' path");
  Warnings warnings;
  auto ws = Workspace::load(cfg, &warnings);
  auto rep = coverage_report(*ws->registry, ws->profiles, cfg.audit_threshold, &warnings);

  write_run_metadata(cfg, "audit");
  auto j = coverage_to_json(rep);
  j["warnings"] = warnings;
  detail::write_json(cfg.output_dir / "report.json", j);
  detail::write_output(cfg.output_dir / "yearwise_cumulative.csv", [&](std::ostream& o) { write_yearwise_csv(o, rep); });
  detail::write_output(cfg.output_dir / "langcount_rcdf.csv", [&](std::ostream& o) { write_rcdf_csv(o, rep); });
  detail::write_output(cfg.output_dir / "family_fractions.csv",
                       [&](std::ostream& o) { write_family_fractions_csv(o, rep); });
  if (!rep.per_language_task_count.empty())
    detail::write_output(cfg.output_dir / "per_language.csv",
                         [&](std::ostream& o) { write_language_counts_csv(o, rep); });
  const auto& s = rep.summary;
  log << s.n_tasks << " tasks, median " << format_double(s.median_languages) << " languages/task, max "
      << s.max_languages << ", " << s.tasks_below_threshold << " below " << s.below_threshold_k << '\n';
  for (const auto& w : warnings) log << "warning: " << w << '\n';
  return rep;
}

}  // namespace lingpred
