// lingpred: predict zero-shot cross-lingual transfer performance.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lingpred/commands.hpp"

namespace {

using namespace lingpred;

struct Overrides {
  std::string config;
  std::string out;
  std::optional<int> jobs;
  bool strict_lolo = false;
  std::string imputation;
  std::string score_scale;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tasks;
};

RunConfig resolve_config(const Overrides& o) {
  RunConfig cfg = o.config.empty() ? parse_run_config(nlohmann::json::object(), fs::current_path())
                                   : load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = fs::absolute(o.out).lexically_normal();
  if (o.jobs) {
    if (*o.jobs < 1) throw DataError("--jobs must be >= 1");
    cfg.jobs = *o.jobs;
  }
  if (o.strict_lolo) cfg.strict_lolo = true;
  if (!o.imputation.empty()) {
    auto p = parse_imputation(o.imputation);
    if (!p) throw DataError("unknown imputation policy '" + o.imputation + "' (strict|mean|zero)");
    cfg.features.imputation = *p;
  }
  if (!o.score_scale.empty()) cfg.score_scale = detail::parse_scale(o.score_scale);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.tasks.empty()) cfg.tasks = o.tasks;
  return cfg;
}

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config, "Run configuration (JSON)");
  cmd->add_option("-o,--out", o.out, "Run directory (overrides output_dir)");
  cmd->add_option("-j,--jobs", o.jobs, "Worker threads for folds and grid cells");
  cmd->add_flag("--strict-lolo", o.strict_lolo, "Also drop training records that use the held-out language as a pivot");
  cmd->add_option("--imputation", o.imputation, "Missing-feature policy: strict, mean or zero");
  cmd->add_option("--score-scale", o.score_scale, "Score interpretation: auto, percent or fraction");
  cmd->add_option("--seed", o.seed, "Recorded in the resolved configuration");
  cmd->add_option("--task", o.tasks, "Restrict to these tasks")->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Predict zero-shot cross-lingual transfer performance from language features"};
  app.set_version_flag("--version", std::string(lingpred::kToolVersion));
  app.require_subcommand(1);

  Overrides o;
  auto* validate = app.add_subcommand("validate", "Load and check every input");
  auto* featurize = app.add_subcommand("featurize", "Write assembled feature vectors to CSV");
  auto* train = app.add_subcommand("train", "Fit a model on one task and save it");
  auto* lolo = app.add_subcommand("lolo", "Leave-one-language-out evaluation of every configured model");
  auto* predict_cmd = app.add_subcommand("predict", "Score target languages with a saved model");
  auto* pivot = app.add_subcommand("pivot", "Predict a pivot x target grid and pick the best pivot per target");
  auto* audit = app.add_subcommand("audit", "Benchmark coverage statistics");
  for (auto* c : {validate, featurize, train, lolo, predict_cmd, pivot, audit}) add_common(c, o);

  std::string model_name;
  train->add_option("--model", model_name, "Name of the configured model to fit (default: first)");

  std::string model_file;
  std::vector<std::string> pivots, targets;
  predict_cmd->add_option("--model-file", model_file, "Saved model JSON")->required();
  predict_cmd->add_option("--pivots", pivots, "Pivot language set")->delimiter(',')->required();
  predict_cmd->add_option("--targets", targets, "Target languages")->delimiter(',')->required();

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(o);
    auto& log = std::cout;
    if (validate->parsed()) {
      cmd_validate(cfg, log);
    } else if (featurize->parsed()) {
      cmd_featurize(cfg, log);
    } else if (train->parsed()) {
      if (o.tasks.size() != 1) throw DataError("train needs exactly one --task");
      cmd_train(cfg, o.tasks.front(), model_name, log);
    } else if (lolo->parsed()) {
      cmd_lolo(cfg, log);
    } else if (predict_cmd->parsed()) {
      if (o.tasks.size() > 1) throw DataError("predict takes at most one --task");
      cmd_predict(cfg, model_file, o.tasks.empty() ? std::string() : o.tasks.front(), pivots, targets, log);
    } else if (pivot->parsed()) {
      cmd_pivot(cfg, log);
    } else if (audit->parsed()) {
      cmd_audit(cfg, log);
    }
  } catch (const lingpred::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
