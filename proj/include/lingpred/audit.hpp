#pragma once

// Benchmark coverage statistics: task growth per year, the reverse CDF of
// language counts, per-language task counts with resource class, and the
// language-family composition of each task.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "lingpred/datastore.hpp"
#include "lingpred/error.hpp"

namespace lingpred {

struct LanguageCoverage {
  int task_count = 0;
  std::optional<int> joshi_class;

  bool operator==(const LanguageCoverage&) const = default;
};

struct LanguageTaskCounts {
  std::map<std::string, LanguageCoverage> counts;
  std::vector<std::string> excluded_tasks;  // no language list
};

inline LanguageTaskCounts language_task_counts(const BenchmarkRegistry& reg, const ProfileMap& profiles,
                                               Warnings* warnings = nullptr) {
  LanguageTaskCounts out;
  for (const auto& t : reg.tasks) {
    if (!t.languages) {
      out.excluded_tasks.push_back(t.task_id);
      continue;
    }
    for (const auto& code : *t.languages) {
      auto& c = out.counts[code];
      ++c.task_count;
      if (auto it = profiles.find(code); it != profiles.end()) c.joshi_class = it->second.joshi_class;
    }
  }
  if (!out.excluded_tasks.empty())
    warn(warnings, "tasks without language lists excluded from per-language counts: " + join(out.excluded_tasks, ", "));
  return out;
}

struct CoverageSummary {
  std::size_t n_tasks = 0;
  double median_languages = 0;
  int max_languages = 0;
  int below_threshold_k = 20;
  std::size_t tasks_below_threshold = 0;
};

struct CoverageReport {
  std::map<int, std::size_t> yearwise_cumulative;
  std::map<int, std::size_t> langcount_rcdf;  // k -> tasks with >= k languages
  std::map<std::string, LanguageCoverage> per_language_task_count;
  std::map<std::string, std::map<std::string, double>> family_fractions;  // task -> family -> fraction
  CoverageSummary summary;
  // Data quality.
  std::vector<std::string> tasks_without_lists;
  std::vector<std::string> languages_without_family;
  std::vector<std::string> languages_without_class;
};

inline CoverageReport coverage_report(const BenchmarkRegistry& reg, const ProfileMap& profiles,
                                      int below_threshold_k = 20, Warnings* warnings = nullptr) {
  if (reg.tasks.empty()) throw DataError("coverage report: registry has no tasks");
  CoverageReport rep;

  std::map<int, std::size_t> per_year;
  for (const auto& t : reg.tasks) ++per_year[t.release_year];
  std::size_t running = 0;
  for (int y = per_year.begin()->first; y <= per_year.rbegin()->first; ++y) {
    if (auto it = per_year.find(y); it != per_year.end()) running += it->second;
    rep.yearwise_cumulative[y] = running;
  }

  std::vector<int> counts;
  for (const auto& t : reg.tasks) counts.push_back(t.n_languages);
  std::sort(counts.begin(), counts.end());
  const int max_k = counts.back();
  for (int k = 1; k <= max_k; ++k)
    rep.langcount_rcdf[k] = static_cast<std::size_t>(counts.end() - std::lower_bound(counts.begin(), counts.end(), k));

  const auto n = counts.size();
  rep.summary.n_tasks = n;
  rep.summary.median_languages =
      n % 2 ? counts[n / 2] : 0.5 * (static_cast<double>(counts[n / 2 - 1]) + static_cast<double>(counts[n / 2]));
  rep.summary.max_languages = max_k;
  rep.summary.below_threshold_k = below_threshold_k;
  rep.summary.tasks_below_threshold =
      static_cast<std::size_t>(std::lower_bound(counts.begin(), counts.end(), below_threshold_k) - counts.begin());

  auto lt = language_task_counts(reg, profiles, warnings);
  rep.per_language_task_count = std::move(lt.counts);
  rep.tasks_without_lists = std::move(lt.excluded_tasks);

  std::set<std::string> no_family, no_class;
  for (const auto& t : reg.tasks) {
    if (!t.languages) continue;
    std::map<std::string, double> frac;
    for (Family f : kAllFamilies) frac[std::string(family_name(f))] = 0;
    for (const auto& code : *t.languages) {
      Family fam = Family::Other;
      auto it = profiles.find(code);
      if (it != profiles.end() && it->second.family) fam = *it->second.family;
      else no_family.insert(code);
      if (it == profiles.end() || !it->second.joshi_class) no_class.insert(code);
      frac[std::string(family_name(fam))] += 1.0;
    }
    for (auto& [_, v] : frac) v /= static_cast<double>(t.languages->size());
    rep.family_fractions[t.task_id] = std::move(frac);
  }
  rep.languages_without_family.assign(no_family.begin(), no_family.end());
  rep.languages_without_class.assign(no_class.begin(), no_class.end());
  if (!no_family.empty())
    warn(warnings, "languages without a family in the profiles (counted as Other): " + join(rep.languages_without_family, ", "));
  return rep;
}

inline nlohmann::json coverage_to_json(const CoverageReport& r) {
  nlohmann::json j;
  auto& s = j["summary"];
  s["n_tasks"] = r.summary.n_tasks;
  s["median_languages_per_task"] = r.summary.median_languages;
  s["max_languages"] = r.summary.max_languages;
  s["below_threshold_k"] = r.summary.below_threshold_k;
  s["tasks_below_threshold"] = r.summary.tasks_below_threshold;
  auto& y = j["yearwise_cumulative"] = nlohmann::json::object();
  for (const auto& [year, c] : r.yearwise_cumulative) y[std::to_string(year)] = c;
  auto& k = j["langcount_rcdf"] = nlohmann::json::object();
  for (const auto& [kk, c] : r.langcount_rcdf) k[std::to_string(kk)] = c;
  auto& pl = j["per_language_task_count"] = nlohmann::json::object();
  for (const auto& [code, c] : r.per_language_task_count)
    pl[code] = {{"tasks", c.task_count},
                {"joshi_class", c.joshi_class ? nlohmann::json(*c.joshi_class) : nlohmann::json(nullptr)}};
  j["family_fractions"] = r.family_fractions;
  j["data_quality"] = {{"tasks_without_lists", r.tasks_without_lists},
                       {"languages_without_family", r.languages_without_family},
                       {"languages_without_class", r.languages_without_class}};
  return j;
}

inline void write_yearwise_csv(std::ostream& out, const CoverageReport& r) {
  write_row(out, {"year", "cumulative_tasks"});
  for (const auto& [y, c] : r.yearwise_cumulative) write_row(out, {std::to_string(y), std::to_string(c)});
}

inline void write_rcdf_csv(std::ostream& out, const CoverageReport& r) {
  write_row(out, {"k", "tasks_with_at_least_k"});
  for (const auto& [k, c] : r.langcount_rcdf) write_row(out, {std::to_string(k), std::to_string(c)});
}

inline void write_language_counts_csv(std::ostream& out, const CoverageReport& r) {
  write_row(out, {"language", "tasks", "joshi_class"});
  for (const auto& [code, c] : r.per_language_task_count)
    write_row(out, {code, std::to_string(c.task_count), c.joshi_class ? std::to_string(*c.joshi_class) : ""});
}

inline void write_family_fractions_csv(std::ostream& out, const CoverageReport& r) {
  write_row(out, {"task", "family", "fraction"});
  for (const auto& [task, fams] : r.family_fractions)
    for (const auto& [fam, f] : fams) write_row(out, {task, fam, format_double(f)});
}

}  // namespace lingpred
