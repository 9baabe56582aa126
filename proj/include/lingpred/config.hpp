#pragma once

// Declarative run configuration (JSON) and the workspace that loads every
// input it references.

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lingpred/datastore.hpp"
#include "lingpred/error.hpp"
#include "lingpred/evaluation.hpp"
#include "lingpred/features.hpp"
#include "lingpred/models.hpp"

namespace lingpred {

namespace fs = std::filesystem;

struct PivotConfig {
  std::string task;
  std::string model;  // name of an entry in RunConfig::models
  std::vector<std::string> candidates;
  std::vector<std::string> targets;  // empty: every profiled language
};

struct RunConfig {
  std::vector<fs::path> performance;
  std::optional<fs::path> profiles;
  std::optional<fs::path> vocabularies;   // directory of <code>.txt
  std::optional<fs::path> tokenizations;  // code,word,n_subwords
  std::map<Facet, fs::path> typology;
  std::optional<fs::path> train_sizes;
  std::optional<fs::path> registry;
  std::optional<fs::path> external;  // method,task,target,predicted[,actual]

  FeatureConfig features;
  std::vector<ModelSpec> models;
  // Tasks sharing each multi-task group-lasso fit; empty means all loaded tasks.
  std::vector<std::string> group_lasso_tasks;
  std::vector<std::string> tasks;  // tasks to evaluate; empty means all
  std::optional<PivotConfig> pivot;

  fs::path output_dir = "run";
  std::uint64_t seed = 0;  // recorded only; every algorithm is deterministic
  bool strict_lolo = false;
  ScoreScale score_scale = ScoreScale::Auto;
  Delimiter delimiter = Delimiter::Auto;
  int jobs = 1;
  int audit_threshold = 20;
};

namespace detail {

inline std::string_view scale_name(ScoreScale s) {
  switch (s) {
    case ScoreScale::Auto: return "auto";
    case ScoreScale::Percent: return "percent";
    case ScoreScale::Fraction: return "fraction";
  }
  return "";
}

inline ScoreScale parse_scale(const std::string& s) {
  if (s == "auto") return ScoreScale::Auto;
  if (s == "percent") return ScoreScale::Percent;
  if (s == "fraction") return ScoreScale::Fraction;
  throw DataError("unknown score_scale '" + s + "' (auto|percent|fraction)");
}

inline std::string_view delimiter_name(Delimiter d) {
  switch (d) {
    case Delimiter::Auto: return "auto";
    case Delimiter::Comma: return "comma";
    case Delimiter::Tab: return "tab";
  }
  return "";
}

inline Delimiter parse_delimiter(const std::string& s) {
  if (s == "auto") return Delimiter::Auto;
  if (s == "comma") return Delimiter::Comma;
  if (s == "tab") return Delimiter::Tab;
  throw DataError("unknown delimiter '" + s + "' (auto|comma|tab)");
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

}  // namespace detail

inline ModelSpec parse_model_spec(const nlohmann::json& j) {
  ModelSpec m;
  const auto kind = j.at("kind").get<std::string>();
  auto k = parse_model_kind(kind);
  if (!k) throw DataError("unknown model kind '" + kind + "' (mean|group_lasso|boosted_trees)");
  m.kind = *k;
  m.name = j.value("name", kind);
  m.boost.n_trees = j.value("n_trees", m.boost.n_trees);
  m.boost.max_depth = j.value("max_depth", m.boost.max_depth);
  m.boost.learning_rate = j.value("learning_rate", m.boost.learning_rate);
  m.lasso.lambda = j.value("lambda", m.lasso.lambda);
  m.lasso.tol = j.value("tol", m.lasso.tol);
  m.lasso.max_iters = j.value("max_iters", m.lasso.max_iters);
  if (m.kind == ModelKind::BoostedTrees) m.boost.validate();
  if (m.kind == ModelKind::GroupLasso) {
    if (!(m.lasso.lambda >= 0)) throw DataError("model '" + m.name + "': lambda must be >= 0");
    if (!(m.lasso.tol > 0) || m.lasso.max_iters < 1) throw DataError("model '" + m.name + "': bad solver settings");
  }
  return m;
}

inline nlohmann::json model_spec_to_json(const ModelSpec& m) {
  nlohmann::json j{{"name", m.name}, {"kind", model_kind_name(m.kind)}};
  if (m.kind == ModelKind::BoostedTrees) {
    j["n_trees"] = m.boost.n_trees;
    j["max_depth"] = m.boost.max_depth;
    j["learning_rate"] = m.boost.learning_rate;
  } else if (m.kind == ModelKind::GroupLasso) {
    j["lambda"] = m.lasso.lambda;
    j["tol"] = m.lasso.tol;
    j["max_iters"] = m.lasso.max_iters;
  }
  return j;
}

// Relative paths resolve against `base` (normally the config file's directory).
inline RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base) {
  try {
    RunConfig c;
    auto opt_path = [&](const char* key) -> std::optional<fs::path> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      return detail::resolve(base, j.at(key).get<std::string>());
    };
    if (j.contains("performance")) {
      const auto& p = j.at("performance");
      if (p.is_string()) c.performance.push_back(detail::resolve(base, p.get<std::string>()));
      else
        for (const auto& x : p) c.performance.push_back(detail::resolve(base, x.get<std::string>()));
    }
    c.profiles = opt_path("profiles");
    c.vocabularies = opt_path("vocabularies");
    c.tokenizations = opt_path("tokenizations");
    c.train_sizes = opt_path("train_sizes");
    c.registry = opt_path("registry");
    c.external = opt_path("external");
    if (j.contains("typology"))
      for (const auto& [k, v] : j.at("typology").items()) {
        auto f = parse_facet(k);
        if (!f) throw DataError("unknown typology facet '" + k + "'");
        c.typology[*f] = detail::resolve(base, v.get<std::string>());
      }
    if (j.contains("features")) {
      const auto& f = j.at("features");
      if (f.contains("enabled")) c.features.enabled = f.at("enabled").get<std::vector<std::string>>();
      if (f.contains("imputation")) {
        auto p = parse_imputation(f.at("imputation").get<std::string>());
        if (!p) throw DataError("unknown imputation policy " + f.at("imputation").dump());
        c.features.imputation = *p;
      }
      if (f.contains("aggregation") && f.at("aggregation").get<std::string>() != "mean")
        throw DataError("unsupported aggregation " + f.at("aggregation").dump() + " (mean)");
      if (f.contains("size_transform")) {
        auto s = f.at("size_transform").get<std::string>();
        if (s == "log10p1") c.features.size_transform = SizeTransform::Log10p1;
        else if (s == "raw") c.features.size_transform = SizeTransform::Raw;
        else throw DataError("unknown size_transform '" + s + "' (log10p1|raw)");
      }
      if (f.contains("geo_mode")) {
        auto s = f.at("geo_mode").get<std::string>();
        if (s == "similarity") c.features.geo_mode = GeoMode::Similarity;
        else if (s == "raw") c.features.geo_mode = GeoMode::RawDistance;
        else throw DataError("unknown geo_mode '" + s + "' (similarity|raw)");
      }
      if (f.contains("default_train_size") && !f.at("default_train_size").is_null())
        c.features.default_train_size = f.at("default_train_size").get<double>();
      c.features.validate();
    }
    if (j.contains("models"))
      for (const auto& m : j.at("models")) c.models.push_back(parse_model_spec(m));
    std::set<std::string> names;
    for (const auto& m : c.models)
      if (!names.insert(m.name).second) throw DataError("duplicate model name '" + m.name + "'");
    c.group_lasso_tasks = j.value("group_lasso_tasks", std::vector<std::string>{});
    c.tasks = j.value("tasks", std::vector<std::string>{});
    if (j.contains("pivot")) {
      const auto& p = j.at("pivot");
      PivotConfig pc;
      pc.task = p.at("task").get<std::string>();
      pc.model = p.at("model").get<std::string>();
      pc.candidates = p.at("candidates").get<std::vector<std::string>>();
      pc.targets = p.value("targets", std::vector<std::string>{});
      c.pivot = std::move(pc);
    }
    if (j.contains("output_dir")) c.output_dir = detail::resolve(base, j.at("output_dir").get<std::string>());
    c.seed = j.value("seed", std::uint64_t{0});
    c.strict_lolo = j.value("strict_lolo", false);
    c.score_scale = detail::parse_scale(j.value("score_scale", std::string("auto")));
    c.delimiter = detail::parse_delimiter(j.value("delimiter", std::string("auto")));
    c.jobs = j.value("jobs", 1);
    if (c.jobs < 1) throw DataError("jobs must be >= 1");
    c.audit_threshold = j.value("audit_threshold", 20);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run configuration: ") + e.what());
  }
}

inline RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

// Fully resolved configuration, written next to every run's outputs.
inline nlohmann::json run_config_to_json(const RunConfig& c) {
  using nlohmann::json;
  auto opt = [](const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); };
  json j;
  auto perf = json::array();
  for (const auto& p : c.performance) perf.push_back(p.string());
  j["performance"] = perf;
  j["profiles"] = opt(c.profiles);
  j["vocabularies"] = opt(c.vocabularies);
  j["tokenizations"] = opt(c.tokenizations);
  j["train_sizes"] = opt(c.train_sizes);
  j["registry"] = opt(c.registry);
  j["external"] = opt(c.external);
  auto typ = json::object();
  for (const auto& [f, p] : c.typology) typ[std::string(facet_name(f))] = p.string();
  j["typology"] = typ;
  j["features"] = {{"enabled", c.features.enabled},
                   {"canonical_order", feature_names(c.features)},
                   {"imputation", imputation_name(c.features.imputation)},
                   {"aggregation", "mean"},
                   {"size_transform", c.features.size_transform == SizeTransform::Log10p1 ? "log10p1" : "raw"},
                   {"geo_mode", c.features.geo_mode == GeoMode::Similarity ? "similarity" : "raw"},
                   {"default_train_size",
                    c.features.default_train_size ? json(*c.features.default_train_size) : json(nullptr)}};
  auto models = json::array();
  for (const auto& m : c.models) models.push_back(model_spec_to_json(m));
  j["models"] = models;
  j["group_lasso_tasks"] = c.group_lasso_tasks;
  j["tasks"] = c.tasks;
  if (c.pivot)
    j["pivot"] = {{"task", c.pivot->task},
                  {"model", c.pivot->model},
                  {"candidates", c.pivot->candidates},
                  {"targets", c.pivot->targets}};
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["strict_lolo"] = c.strict_lolo;
  j["score_scale"] = detail::scale_name(c.score_scale);
  j["delimiter"] = detail::delimiter_name(c.delimiter);
  j["jobs"] = c.jobs;
  j["audit_threshold"] = c.audit_threshold;
  return j;
}

// Everything a run reads, loaded and validated once. Immutable after load;
// feature contexts point into it, so it is neither copyable nor movable.
class Workspace {
 public:
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;

  static std::unique_ptr<Workspace> load(const RunConfig& cfg, Warnings* warnings = nullptr) {
    std::unique_ptr<Workspace> w(new Workspace());
    auto require = [](const fs::path& p) {
      if (!fs::exists(p)) throw DataError("input not found: '" + p.string() + "'");
    };
    for (const auto& p : cfg.performance) {
      require(p);
      auto recs = ingest_performance_table(read_table_file(p.string(), cfg.delimiter), {}, cfg.score_scale, p.string());
      w->records.insert(w->records.end(), recs.begin(), recs.end());
    }
    {
      std::map<decltype(w->records.front().key()), std::size_t> seen;
      for (std::size_t i = 0; i < w->records.size(); ++i)
        if (!seen.emplace(w->records[i].key(), i).second)
          throw DataError("duplicate performance key across input tables (records " + std::to_string(seen[w->records[i].key()] + 1) +
                          " and " + std::to_string(i + 1) + ")");
    }
    if (cfg.profiles) {
      require(*cfg.profiles);
      w->profiles = ingest_language_profiles(read_table_file(cfg.profiles->string(), cfg.delimiter), cfg.profiles->string());
    }
    for (const auto& [facet, p] : cfg.typology) {
      require(p);
      w->matrices.emplace(facet, ingest_distance_matrix(read_table_file(p.string(), cfg.delimiter), facet, warnings,
                                                        p.string()));
    }
    if (cfg.vocabularies) {
      require(*cfg.vocabularies);
      w->vocabularies = ingest_vocabulary_dir(*cfg.vocabularies, warnings);
    }
    if (cfg.tokenizations) {
      require(*cfg.tokenizations);
      auto tok = ingest_tokenizations(read_table_file(cfg.tokenizations->string(), cfg.delimiter),
                                      cfg.tokenizations->string());
      for (const auto& [code, words] : tok) w->tokenizer.emplace(code, tokenizer_quality(words));
    }
    if (cfg.train_sizes) {
      require(*cfg.train_sizes);
      w->train_sizes = ingest_train_sizes(read_table_file(cfg.train_sizes->string(), cfg.delimiter),
                                          cfg.train_sizes->string());
    }
    if (cfg.registry) {
      require(*cfg.registry);
      w->registry = ingest_benchmark_registry(read_table_file(cfg.registry->string(), cfg.delimiter),
                                              cfg.registry->string());
    }
    if (cfg.external) {
      require(*cfg.external);
      const auto t = read_table_file(cfg.external->string(), cfg.delimiter);
      const auto what = cfg.external->string();
      const auto cm = t.require_column("method", what);
      const auto ct = t.require_column("task", what);
      const auto cg = t.require_column("target", what);
      const auto cp = t.require_column("predicted", what);
      const auto ca = t.column("actual");
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        const auto& row = t.rows[r];
        const auto where = what + " line " + std::to_string(t.lines[r]);
        ExternalEstimate e;
        e.method = row[cm];
        e.target = row[cg];
        try {
          e.predicted = normalize_score(parse_double(row[cp], "predicted"), cfg.score_scale);
          if (ca && !row[*ca].empty()) e.actual = normalize_score(parse_double(row[*ca], "actual"), cfg.score_scale);
        } catch (const DataError& err) {
          throw DataError(where + ": " + err.what());
        }
        w->external[row[ct]].push_back(std::move(e));
      }
    }
    // One feature context per task (training sizes are task-specific).
    std::set<std::string> tasks;
    for (const auto& r : w->records) tasks.insert(r.task_id);
    for (const auto& [t, _] : w->train_sizes) tasks.insert(t);
    for (const auto& t : tasks) {
      auto it = w->train_sizes.find(t);
      w->contexts.emplace(t, FeatureContext(&w->profiles, &w->matrices, &w->vocabularies, &w->tokenizer,
                                            it == w->train_sizes.end() ? nullptr : &it->second));
    }
    w->no_task_context = FeatureContext(&w->profiles, &w->matrices, &w->vocabularies, &w->tokenizer, nullptr);
    return w;
  }

  const FeatureContext& context(const std::string& task) const {
    auto it = contexts.find(task);
    return it == contexts.end() ? no_task_context : it->second;
  }

  std::vector<std::string> task_ids() const {
    std::set<std::string> s;
    for (const auto& r : records) s.insert(r.task_id);
    return {s.begin(), s.end()};
  }

  std::vector<PerformanceRecord> records_for(const std::string& task) const {
    std::vector<PerformanceRecord> out;
    for (const auto& r : records)
      if (r.task_id == task) out.push_back(r);
    return out;
  }

  std::vector<PerformanceRecord> records;
  ProfileMap profiles;
  MatrixSet matrices;
  VocabularyMap vocabularies;
  std::map<std::string, TokenizerQuality> tokenizer;
  TrainSizes train_sizes;
  std::optional<BenchmarkRegistry> registry;
  std::map<std::string, std::vector<ExternalEstimate>> external;  // task -> estimates

 private:
  Workspace() = default;
  std::map<std::string, FeatureContext> contexts;
  FeatureContext no_task_context;
};

}  // namespace lingpred
