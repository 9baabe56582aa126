// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   acceptance               run every criterion
//   acceptance --criterion N run criterion N only

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "lingpred/commands.hpp"
#include "test_util.hpp"

using namespace lingpred;
using lingpred::testing::data_path;
using lingpred::testing::temp_dir;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (!pass) detail << "; ";
      detail << what;
      pass = false;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

Eigen::MatrixXd gaussian(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c) {
  std::normal_distribution<double> z(0, 1);
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = z(rng);
  return m;
}

RunConfig xtreme_config(const std::string& out) {
  auto cfg = load_run_config(data_path("configs/xtreme_mbert.json"));
  cfg.output_dir = temp_dir(out);
  return cfg;
}

// ---------------------------------------------------------------------------

void criterion_1(Outcome& o) {
  const std::map<std::string, double> expected = {{"pawsx", 7.18}, {"xnli", 5.32}, {"xquad", 6.89}, {"tydiqa", 7.82}};
  auto cfg = xtreme_config("acceptance_1");
  cfg.models = {ModelSpec{"baseline", ModelKind::Mean, {}, {}}};
  std::ostringstream log;
  const auto t0 = Clock::now();
  const auto run = cmd_lolo(cfg, log);
  const double elapsed = seconds_since(t0);
  for (const auto& r : run.reports) {
    auto it = expected.find(r.task_id);
    if (it == expected.end()) continue;
    o.detail << r.task_id << " " << fixed(r.mae_x100) << " (want " << fixed(it->second) << ") ";
    if (std::abs(r.mae_x100 - it->second) > 0.5) o.pass = false;
  }
  o.detail << "in " << fixed(elapsed, 3) << " s";
  if (run.reports.size() != expected.size()) o.require(false, "expected 4 task reports");
  if (elapsed >= 1.0) o.require(false, "runtime >= 1 s");
}

void criterion_2(Outcome& o) {
  auto cfg = xtreme_config("acceptance_2");
  std::ostringstream log;
  const auto run = cmd_lolo(cfg, log);
  std::map<std::string, std::map<ModelKind, double>> mae;
  for (const auto& r : run.reports) mae[r.task_id][r.kind] = r.mae_x100;
  int bt_wins = 0, gl_wins = 0;
  for (const auto& [task, m] : mae) {
    const double base = m.at(ModelKind::Mean);
    bt_wins += m.at(ModelKind::BoostedTrees) < base;
    gl_wins += m.at(ModelKind::GroupLasso) < base;
    o.detail << task << " base " << fixed(base) << " boosted " << fixed(m.at(ModelKind::BoostedTrees)) << " lasso "
             << fixed(m.at(ModelKind::GroupLasso)) << "; ";
  }
  o.detail << "boosted beats baseline on " << bt_wins << "/4, group lasso on " << gl_wins << "/4";
  if (bt_wins < 3 || gl_wins < 3) o.pass = false;
}

// Independent optimality check: for each weight row j with gradient block g_j,
// nonzero rows need g_j + lambda w_j/|w_j| = 0, zero rows need |g_j| <= lambda.
double kkt_oracle(const GroupLassoProblem& p, const Eigen::MatrixXd& W) {
  Eigen::MatrixXd G(W.rows(), W.cols());
  for (std::size_t k = 0; k < p.X.size(); ++k) {
    const auto kk = static_cast<Eigen::Index>(k);
    const double n = static_cast<double>(p.X[k].rows());
    G.col(kk) = -p.X[k].transpose() * (p.y[k] - p.X[k] * W.col(kk)) / n;
  }
  double worst = 0;
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    const double nw = W.row(j).norm();
    const double r = nw > 0 ? (G.row(j) + p.lambda * W.row(j) / nw).norm() : std::max(0.0, G.row(j).norm() - p.lambda);
    worst = std::max(worst, r);
  }
  return worst;
}

void criterion_3(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(31);

  double worst_ols = 0;
  for (int trial = 0; trial < 20; ++trial) {
    GroupLassoProblem p;
    p.X = {gaussian(rng, 20, 5)};
    p.y = {gaussian(rng, 20, 1).col(0)};
    p.lambda = 0;
    p.tol = 1e-15;
    p.max_iters = 200000;
    const auto sol = solve_group_lasso(p);
    const Eigen::VectorXd ols = p.X[0].colPivHouseholderQr().solve(p.y[0]);
    worst_ols = std::max(worst_ols, (sol.W.col(0) - ols).cwiseAbs().maxCoeff());
  }
  o.require(worst_ols < 1e-6, "lambda=0 deviates from least squares by " + format_double(worst_ols));

  int increases = 0;
  double worst_kkt = 0;
  std::uniform_real_distribution<double> lam(0.001, 0.5);
  std::uniform_int_distribution<int> tasks(1, 4), dims(2, 8);
  for (int trial = 0; trial < 100; ++trial) {
    GroupLassoProblem p;
    const int K = tasks(rng), d = dims(rng);
    for (int k = 0; k < K; ++k) {
      p.X.push_back(gaussian(rng, 30, d));
      p.y.push_back(gaussian(rng, 30, 1).col(0));
    }
    p.lambda = lam(rng);
    p.tol = 1e-14;
    p.max_iters = 100000;
    p.record_trace = true;
    const auto sol = solve_group_lasso(p);
    double prev = group_lasso_objective(p, Eigen::MatrixXd::Zero(d, K));
    for (double f : sol.trace) {
      if (f > prev) ++increases;
      prev = f;
    }
    worst_kkt = std::max(worst_kkt, kkt_oracle(p, sol.W));
  }
  o.require(increases == 0, std::to_string(increases) + " objective increases");
  o.require(worst_kkt < 1e-4, "KKT residual " + format_double(worst_kkt));

  const int d = 8, n = 200;
  const std::set<int> support{0, 2, 5};
  Eigen::MatrixXd Wtrue = Eigen::MatrixXd::Zero(d, 2);
  for (int j : support) Wtrue.row(j) << 1.0 + 0.5 * j, -0.8 + 0.3 * j;
  GroupLassoProblem p;
  p.lambda = 0.1;
  p.tol = 1e-12;
  p.max_iters = 100000;
  for (int k = 0; k < 2; ++k) {
    p.X.push_back(gaussian(rng, n, d));
    p.y.push_back(p.X.back() * Wtrue.col(k) + 0.05 * gaussian(rng, n, 1).col(0));
  }
  const auto sol = solve_group_lasso(p);
  bool recovered = true;
  for (int j = 0; j < d; ++j) {
    const bool zero = (sol.W.row(j).array() == 0).all();
    recovered &= support.count(j) ? !zero : zero;
  }
  o.require(recovered, "planted support not recovered");

  const double elapsed = seconds_since(t0);
  o.detail << (o.pass ? "" : "; ") << "max |W-OLS| " << format_double(worst_ols) << ", max KKT " << format_double(worst_kkt)
           << ", support recovered " << (recovered ? "yes" : "no") << ", " << fixed(elapsed, 3) << " s";
  o.require(elapsed < 10.0, "runtime >= 10 s");
}

double ensemble_mse(const TreeEnsemble& e, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  double s = 0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) s += std::pow(y[i] - e.evaluate(X.row(i)), 2);
  return s / static_cast<double>(X.rows());
}

void criterion_4(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(-1, 1);
  auto uniform = [&](Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
    return m;
  };

  bool depth0 = true;
  double depth1_err = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = uniform(12 + trial, 3);
    const Eigen::VectorXd y = uniform(12 + trial, 1).col(0);
    const auto e0 = fit_tree_ensemble(X, y, {1, 0, 0.1});
    for (Eigen::Index i = 0; i < X.rows(); ++i) depth0 &= e0.evaluate(X.row(i)) == y.mean();
    // Depth 1 at rate 1: each side of the stump predicts its own mean.
    const auto e1 = fit_tree_ensemble(X, y, {1, 1, 1.0});
    const auto& root = e1.trees[0].nodes[0];
    double sl = 0, sr = 0, nl = 0, nr = 0;
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const bool left = root.feature < 0 || X(i, root.feature) <= root.threshold;
      (left ? sl : sr) += y[i];
      (left ? nl : nr) += 1;
    }
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const bool left = root.feature < 0 || X(i, root.feature) <= root.threshold;
      depth1_err = std::max(depth1_err, std::abs(e1.evaluate(X.row(i)) - (left ? sl / nl : sr / nr)));
    }
  }
  o.require(depth0, "depth-0 tree differs from the mean");
  o.require(depth1_err < 1e-12, "depth-1 leaf differs from its mean by " + format_double(depth1_err));

  int increases = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 20 + 10 * trial;
    Eigen::MatrixXd X = uniform(n, 1 + trial % 5);
    for (Eigen::Index i = 0; i < n; i += 4) X(i, 0) = 0.5;
    const Eigen::VectorXd y = uniform(n, 1).col(0);
    const auto e = fit_tree_ensemble(X, y, {50, 1 + trial % 6, 0.3});
    double prev = (y.array() - y.mean()).square().mean();
    for (double m : e.training_mse) {
      if (m > prev * (1 + 1e-12)) ++increases;
      prev = m;
    }
  }
  o.require(increases == 0, std::to_string(increases) + " training-MSE increases");

  double worst_fit = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd X = uniform(10 + 5 * trial, 3);
    const Eigen::VectorXd y = uniform(10 + 5 * trial, 1).col(0);
    worst_fit = std::max(worst_fit, ensemble_mse(fit_tree_ensemble(X, y, {1, 64, 1.0}), X, y));
  }
  o.require(worst_fit < 1e-12, "interpolation MSE " + format_double(worst_fit));

  const double elapsed = seconds_since(t0);
  o.detail << (o.pass ? "" : "; ") << "depth-1 leaf error " << format_double(depth1_err) << ", worst interpolation MSE "
           << format_double(worst_fit) << ", " << fixed(elapsed, 3) << " s";
  o.require(elapsed < 30.0, "runtime >= 30 s");
}

void criterion_5(Outcome& o) {
  auto cfg = xtreme_config("acceptance_5");
  const auto ws = Workspace::load(cfg);
  const auto features = detail::record_features(cfg, *ws);
  std::mt19937_64 rng(51);
  std::size_t folds = 0, changed = 0, perm_diffs = 0;
  for (const auto& task : ws->task_ids()) {
    const auto records = ws->records_for(task);
    for (const auto& spec : detail::model_specs(cfg)) {
      const auto aux = spec.kind == ModelKind::GroupLasso ? detail::auxiliary_records(cfg, *ws, task)
                                                          : std::vector<PerformanceRecord>{};
      const auto base = lolo_evaluate(records, spec, features, {}, aux);
      for (const auto& [t, lr] : base.per_language) {
        ++folds;
        // Mutate every copy of the held-out language's scores, in this task and
        // in the auxiliary tasks alike.
        auto mutated = records;
        auto mutated_aux = aux;
        for (auto* set : {&mutated, &mutated_aux})
          for (auto& r : *set)
            if (r.target == t) r.score = 1.0 - r.score;
        const auto m = lolo_evaluate(mutated, spec, features, {}, mutated_aux);
        for (std::size_t i = 0; i < base.rows.size(); ++i)
          if (base.rows[i].target == t && m.rows[i].unclamped != base.rows[i].unclamped) ++changed;
      }
      const auto bytes = report_to_json(base).dump();
      for (int k = 0; k < 3; ++k) {
        auto shuffled = records;
        auto shuffled_aux = aux;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        std::shuffle(shuffled_aux.begin(), shuffled_aux.end(), rng);
        perm_diffs += report_to_json(lolo_evaluate(shuffled, spec, features, {}, shuffled_aux)).dump() != bytes;
      }
    }
  }
  o.detail << folds << " folds mutated, " << changed << " held-out predictions changed, " << perm_diffs
           << " permuted reports differ";
  o.pass = changed == 0 && perm_diffs == 0 && folds > 0;
}

void criterion_6(Outcome& o) {
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0, 1);
  std::uniform_int_distribution<int> coarse(0, 3);
  // Identity model over a single feature, so predictions are the table values.
  RegressionModel model;
  model.kind = ModelKind::GroupLasso;
  model.feature_order = {"v"};
  model.standardizer = {{0.0}, {1.0}, {false}};
  GroupLassoModel gl;
  gl.tasks = {"t"};
  gl.weights = Eigen::MatrixXd::Ones(1, 1);
  gl.intercepts = Eigen::VectorXd::Zero(1);
  model.params = gl;

  int mismatches = 0, ties = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<std::string> cands;
    const int P = 1 + trial % 9;
    for (int i = 0; i < P; ++i) cands.push_back(std::string(1, static_cast<char>('a' + (i * 7) % 26)) + "x");
    std::shuffle(cands.begin(), cands.end(), rng);
    std::map<std::string, double> row;
    for (const auto& c : cands) row[c] = trial % 2 ? coarse(rng) / 3.0 : u(rng);
    const PivotFeatureFn fn = [&](const std::string& p, const std::string&) {
      FeatureVector f;
      f.names = {"v"};
      f.values = {row.at(p)};
      return f;
    };
    const auto sel = select_best_pivot(model, "tt", cands, fn);
    // Exhaustive scan: collect the maximum, then the smallest code attaining it.
    double best = -1;
    for (const auto& c : cands) best = std::max(best, row.at(c));
    std::vector<std::string> winners;
    for (const auto& c : cands)
      if (row.at(c) == best) winners.push_back(c);
    ties += winners.size() > 1;
    const auto expected = *std::min_element(winners.begin(), winners.end());
    if (sel.best_pivot != expected || sel.predicted != best || sel.full_row != row) ++mismatches;
  }
  o.detail << "1000 grids, " << ties << " with ties, " << mismatches << " mismatches";
  o.pass = mismatches == 0 && ties > 0;
}

void criterion_7(Outcome& o) {
  auto cfg = load_run_config(data_path("configs/audit.json"));
  cfg.output_dir = temp_dir("acceptance_7");
  std::ostringstream log;
  const auto r = cmd_audit(cfg, log);
  const auto ws = Workspace::load(cfg);
  std::map<std::string, int> big;
  for (const auto& t : ws->registry->tasks)
    if (t.n_languages >= 50) big[t.task_id] = t.n_languages;
  const std::map<std::string, int> expected = {{"Tatoeba", 73}, {"UDPOS", 57}, {"WikiANN", 100}};
  o.detail << r.summary.n_tasks << " tasks, median " << format_double(r.summary.median_languages) << ", rcdf(50) "
           << r.langcount_rcdf.at(50) << " {";
  for (const auto& [k, v] : big) o.detail << " " << k << ":" << v;
  o.detail << " }";
  o.pass = r.summary.n_tasks == 18 && r.summary.median_languages == 11.0 && r.langcount_rcdf.at(50) == 3 &&
           big == expected;
}

void criterion_8(Outcome& o) {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<int> size(0, 30), token(0, 60);
  int violations = 0;
  for (int i = 0; i < 10000; ++i) {
    Vocabulary a, b;
    for (int k = size(rng); k > 0; --k) a.subwords.insert("w" + std::to_string(token(rng)));
    for (int k = size(rng); k > 0; --k) b.subwords.insert("w" + std::to_string(token(rng)));
    if (a.subwords.empty() && b.subwords.empty()) continue;
    std::vector<std::string> inter, uni;
    std::set_intersection(a.subwords.begin(), a.subwords.end(), b.subwords.begin(), b.subwords.end(),
                          std::back_inserter(inter));
    std::set_union(a.subwords.begin(), a.subwords.end(), b.subwords.begin(), b.subwords.end(), std::back_inserter(uni));
    const double oracle = static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    const double ab = subword_overlap(a, b), ba = subword_overlap(b, a);
    violations += ab != ba || ab < 0 || ab > 1 || std::abs(ab - oracle) > 1e-15;
    if (!a.subwords.empty()) violations += subword_overlap(a, a) != 1.0;
  }
  o.require(violations == 0, std::to_string(violations) + " overlap violations");

  // Hand oracle: 4 words split into 1, 2, 3, 1 subwords.
  const std::vector<TokenizedWord> words = {{"a", 1}, {"b", 2}, {"c", 3}, {"d", 1}};
  const auto q = tokenizer_quality(words);
  o.require(q.fertility == 7.0 / 4.0 && q.continued_pct == 0.5, "tokenizer quality arithmetic");

  auto cfg = xtreme_config("acceptance_8");
  const auto ws = Workspace::load(cfg);
  std::vector<PerformanceRecord> records = ws->records;
  std::vector<std::string> langs;
  for (const auto& [code, _] : ws->profiles) langs.push_back(code);
  auto hash = [&](int jobs) {
    std::vector<FeatureVector> out(records.size() + langs.size());
    parallel_for(out.size(), jobs, [&](std::size_t i) {
      if (i < records.size()) {
        out[i] = assemble_features(records[i].target, records[i].pivots, ws->context(records[i].task_id), cfg.features);
      } else {
        out[i] = assemble_features(langs[i - records.size()], {"en"}, ws->context("tydiqa"), cfg.features);
      }
    });
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a over value bytes
    for (const auto& fv : out)
      for (double v : fv.values) {
        unsigned char b[sizeof(double)];
        std::memcpy(b, &v, sizeof v);
        for (auto c : b) h = (h ^ c) * 1099511628211ull;
      }
    return h;
  };
  const auto h1 = hash(1), h2 = hash(1), h4 = hash(4);
  o.require(h1 == h2 && h1 == h4, "feature hash differs across runs or jobs");
  std::ostringstream hx;
  hx << std::hex << h1;
  o.detail << (o.pass ? "" : "; ") << "10^4 overlap pairs checked, feature hash " << hx.str() << " stable over "
           << records.size() + langs.size() << " vectors";
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<void(Outcome&)>> criteria = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                                criterion_5, criterion_6, criterion_7, criterion_8};
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      const int n = std::atoi(argv[++i]);
      if (n < 1 || n > static_cast<int>(criteria.size())) {
        std::cerr << "no criterion " << argv[i] << '\n';
        return 2;
      }
      selected.push_back(n);
    } else {
      std::cerr << "usage: acceptance [--criterion N]\n";
      return 2;
    }
  }
  if (selected.empty())
    for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) selected.push_back(n);

  bool all = true;
  for (int n : selected) {
    Outcome o;
    try {
      criteria[static_cast<std::size_t>(n - 1)](o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    std::cout << "criterion " << n << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail.str() << std::endl;
    all &= o.pass;
  }
  return all ? 0 : 1;
}
