#pragma once

// Ingestion, validation and serialization of every external input:
// performance tables, language profiles, subword vocabularies,
// typology pair matrices and benchmark registries.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lingpred/error.hpp"
#include "lingpred/table.hpp"

namespace lingpred {

using Warnings = std::vector<std::string>;

inline void warn(Warnings* sink, std::string msg) {
  if (sink) sink->push_back(std::move(msg));
}

// ---------------------------------------------------------------------------
// Language profiles

enum class Family {
  IndoEuropean,
  SinoTibetan,
  NigerCongo,
  AfroAsiatic,
  Austronesian,
  TransNewGuinea,
  Other,
};

inline constexpr std::string_view family_name(Family f) {
  switch (f) {
    case Family::IndoEuropean: return "Indo-European";
    case Family::SinoTibetan: return "Sino-Tibetan";
    case Family::NigerCongo: return "Niger-Congo";
    case Family::AfroAsiatic: return "Afro-Asiatic";
    case Family::Austronesian: return "Austronesian";
    case Family::TransNewGuinea: return "Trans-New-Guinea";
    case Family::Other: return "Other";
  }
  return "Other";
}

inline constexpr Family kAllFamilies[] = {Family::IndoEuropean, Family::SinoTibetan,  Family::NigerCongo,
                                          Family::AfroAsiatic,  Family::Austronesian, Family::TransNewGuinea,
                                          Family::Other};

inline std::optional<Family> parse_family(std::string_view s) {
  for (Family f : kAllFamilies)
    if (family_name(f) == s) return f;
  return std::nullopt;
}

// One typology dimension: known value or explicitly missing.
using TypologyValue = std::optional<double>;
using TypologyVector = std::vector<TypologyValue>;

struct LanguageProfile {
  std::string code;
  double pretrain_size = 0;  // unit is declared per dataset
  std::optional<int> joshi_class;
  std::optional<Family> family;
  std::map<std::string, TypologyVector> typology;
  std::optional<std::pair<double, double>> coords;  // (lat, lon) degrees

  bool operator==(const LanguageProfile&) const = default;
};

using ProfileMap = std::map<std::string, LanguageProfile>;

inline TypologyVector parse_typology_vector(std::string_view cell, std::string_view what) {
  TypologyVector v;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) return;
    if (tok == "?" || tok == "nan" || tok == "NA" || tok == "--")
      v.push_back(std::nullopt);
    else
      v.push_back(parse_double(tok, what));
    tok.clear();
  };
  for (char c : cell) {
    if (c == ' ') flush();
    else tok.push_back(c);
  }
  flush();
  return v;
}

inline std::string format_typology_vector(const TypologyVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += v[i] ? format_double(*v[i]) : "?";
  }
  return out;
}

// Columns: code, pretrain_size (required); joshi_class, family, lat, lon,
// typology:<facet> (optional). Empty optional cells mean "absent".
inline ProfileMap ingest_language_profiles(const Table& t, std::string_view what = "profiles") {
  const auto c_code = t.require_column("code", what);
  const auto c_size = t.require_column("pretrain_size", what);
  const auto c_joshi = t.column("joshi_class");
  const auto c_family = t.column("family");
  const auto c_lat = t.column("lat");
  const auto c_lon = t.column("lon");
  if (c_lat.has_value() != c_lon.has_value())
    throw DataError(std::string(what) + ": 'lat' and 'lon' columns must appear together");
  std::vector<std::pair<std::string, std::size_t>> facets;
  for (std::size_t i = 0; i < t.header.size(); ++i)
    if (t.header[i].rfind("typology:", 0) == 0) facets.emplace_back(t.header[i].substr(9), i);

  ProfileMap out;
  std::map<std::string, std::size_t> facet_dims;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(what) + " line " + std::to_string(t.lines[r]);
    LanguageProfile p;
    p.code = row[c_code];
    if (p.code.empty()) throw DataError(where + ": empty language code");
    p.pretrain_size = parse_double(row[c_size], where + " pretrain_size");
    if (!std::isfinite(p.pretrain_size) || p.pretrain_size < 0)
      throw DataError(where + ": negative or non-finite pretrain size for '" + p.code + "'");
    if (c_joshi && !row[*c_joshi].empty()) {
      auto j = parse_int(row[*c_joshi], where + " joshi_class");
      if (j < 0 || j > 5) throw DataError(where + ": joshi_class must be in 0..5");
      p.joshi_class = static_cast<int>(j);
    }
    if (c_family && !row[*c_family].empty()) {
      p.family = parse_family(row[*c_family]);
      if (!p.family) throw DataError(where + ": unknown family '" + row[*c_family] + "'");
    }
    if (c_lat && (!row[*c_lat].empty() || !row[*c_lon].empty())) {
      double lat = parse_double(row[*c_lat], where + " lat");
      double lon = parse_double(row[*c_lon], where + " lon");
      if (std::abs(lat) > 90 || std::abs(lon) > 180) throw DataError(where + ": coordinates out of range");
      p.coords = {lat, lon};
    }
    for (const auto& [facet, col] : facets) {
      if (row[col].empty()) continue;
      auto v = parse_typology_vector(row[col], where + " typology:" + facet);
      auto [it, fresh] = facet_dims.emplace(facet, v.size());
      if (!fresh && it->second != v.size())
        throw DataError(where + ": typology facet '" + facet + "' has dimension " + std::to_string(v.size()) +
                        ", expected " + std::to_string(it->second));
      p.typology.emplace(facet, std::move(v));
    }
    auto code = p.code;
    if (!out.emplace(code, std::move(p)).second) throw DataError(where + ": duplicate language code '" + code + "'");
  }
  return out;
}

inline void write_language_profiles(std::ostream& out, const ProfileMap& profiles) {
  std::set<std::string> facets;
  for (const auto& [_, p] : profiles)
    for (const auto& [f, __] : p.typology) facets.insert(f);
  std::vector<std::string> header{"code", "pretrain_size", "joshi_class", "family", "lat", "lon"};
  for (const auto& f : facets) header.push_back("typology:" + f);
  write_row(out, header);
  for (const auto& [code, p] : profiles) {
    std::vector<std::string> row{code, format_double(p.pretrain_size),
                                 p.joshi_class ? std::to_string(*p.joshi_class) : "",
                                 p.family ? std::string(family_name(*p.family)) : "",
                                 p.coords ? format_double(p.coords->first) : "",
                                 p.coords ? format_double(p.coords->second) : ""};
    for (const auto& f : facets) {
      auto it = p.typology.find(f);
      row.push_back(it == p.typology.end() ? "" : format_typology_vector(it->second));
    }
    write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// Performance records

struct PerformanceRecord {
  std::string model_id;
  std::string task_id;
  std::vector<std::string> pivots;  // sorted, deduplicated
  std::string target;
  std::string metric;
  double score = 0;  // fraction in [0,1]

  auto key() const { return std::tie(model_id, task_id, pivots, target, metric); }
  bool operator==(const PerformanceRecord&) const = default;
};

enum class ScoreScale { Auto, Percent, Fraction };

// Auto: values in (1,100] are percentages, values in [0,1] are fractions.
inline double normalize_score(double raw, ScoreScale scale = ScoreScale::Auto) {
  if (!std::isfinite(raw) || raw < 0 || raw > 100)
    throw DataError("score " + format_double(raw) + " outside [0,100]");
  switch (scale) {
    case ScoreScale::Percent: return raw / 100.0;
    case ScoreScale::Fraction:
      if (raw > 1) throw DataError("score " + format_double(raw) + " exceeds 1 under fraction scale");
      return raw;
    case ScoreScale::Auto: break;
  }
  return raw > 1.0 ? raw / 100.0 : raw;
}

struct PerformanceSchema {
  std::string model = "model";
  std::string task = "task";
  std::string pivots = "pivots";
  std::string target = "target";
  std::string metric = "metric";
  std::string score = "score";
  char pivot_separator = ';';
};

inline std::vector<PerformanceRecord> ingest_performance_table(const Table& t, const PerformanceSchema& schema = {},
                                                               ScoreScale scale = ScoreScale::Auto,
                                                               std::string_view what = "performance table") {
  const auto c_model = t.require_column(schema.model, what);
  const auto c_task = t.require_column(schema.task, what);
  const auto c_piv = t.require_column(schema.pivots, what);
  const auto c_target = t.require_column(schema.target, what);
  const auto c_metric = t.require_column(schema.metric, what);
  const auto c_score = t.require_column(schema.score, what);

  std::vector<PerformanceRecord> out;
  out.reserve(t.rows.size());
  std::map<decltype(std::declval<PerformanceRecord>().key()), std::size_t> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(what) + " row " + std::to_string(r + 1) + " (line " +
                              std::to_string(t.lines[r]) + ")";
    PerformanceRecord rec;
    rec.model_id = row[c_model];
    rec.task_id = row[c_task];
    rec.pivots = split_list(row[c_piv], schema.pivot_separator);
    std::sort(rec.pivots.begin(), rec.pivots.end());
    rec.pivots.erase(std::unique(rec.pivots.begin(), rec.pivots.end()), rec.pivots.end());
    rec.target = row[c_target];
    rec.metric = row[c_metric];
    if (rec.model_id.empty() || rec.task_id.empty()) throw DataError(where + ": empty model or task id");
    if (rec.pivots.empty()) throw DataError(where + ": empty pivot set");
    if (rec.target.empty()) throw DataError(where + ": empty target language");
    try {
      rec.score = normalize_score(parse_double(row[c_score], "score"), scale);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    out.push_back(std::move(rec));
    auto [it, fresh] = seen.emplace(out.back().key(), r);
    if (!fresh)
      throw DataError(std::string(what) + ": duplicate key in rows " + std::to_string(it->second + 1) + " (line " +
                      std::to_string(t.lines[it->second]) + ") and " + std::to_string(r + 1) + " (line " +
                      std::to_string(t.lines[r]) + ")");
  }
  return out;
}

inline void write_performance_table(std::ostream& out, const std::vector<PerformanceRecord>& records) {
  write_row(out, {"model", "task", "pivots", "target", "metric", "score"});
  for (const auto& r : records)
    write_row(out, {r.model_id, r.task_id, join(r.pivots), r.target, r.metric, format_double(r.score)});
}

// ---------------------------------------------------------------------------
// Subword vocabularies

struct Vocabulary {
  std::string code;
  std::set<std::string> subwords;

  bool operator==(const Vocabulary&) const = default;
};

using VocabularyMap = std::map<std::string, Vocabulary>;

// One subword per line; blank lines ignored; duplicates collapse.
inline Vocabulary ingest_vocabulary(std::istream& in, std::string code, Warnings* warnings = nullptr) {
  Vocabulary v{std::move(code), {}};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) v.subwords.insert(line);
  }
  if (v.subwords.empty()) warn(warnings, "vocabulary for '" + v.code + "' is empty");
  return v;
}

// Loads every <code>.txt file in a directory.
inline VocabularyMap ingest_vocabulary_dir(const std::filesystem::path& dir, Warnings* warnings = nullptr) {
  if (!std::filesystem::is_directory(dir)) throw DataError("vocabulary directory '" + dir.string() + "' not found");
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  VocabularyMap out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw DataError("cannot open '" + f.string() + "'");
    auto code = f.stem().string();
    out.emplace(code, ingest_vocabulary(in, code, warnings));
  }
  return out;
}

inline void write_vocabulary(std::ostream& out, const Vocabulary& v) {
  for (const auto& s : v.subwords) out << s << '\n';
}

// ---------------------------------------------------------------------------
// Typology pair matrices

enum class Facet { Syntactic, Phonological, Genetic, Geographic };

inline constexpr Facet kAllFacets[] = {Facet::Syntactic, Facet::Phonological, Facet::Genetic, Facet::Geographic};

inline constexpr std::string_view facet_name(Facet f) {
  switch (f) {
    case Facet::Syntactic: return "syntactic";
    case Facet::Phonological: return "phonological";
    case Facet::Genetic: return "genetic";
    case Facet::Geographic: return "geographic";
  }
  return "";
}

inline std::optional<Facet> parse_facet(std::string_view s) {
  for (Facet f : kAllFacets)
    if (facet_name(f) == s) return f;
  return std::nullopt;
}

// Geographic stores distances (>= 0); the other facets store similarities in [0,1].
inline constexpr bool is_similarity(Facet f) { return f != Facet::Geographic; }

class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  explicit DistanceMatrix(Facet facet) : facet_(facet) {}

  Facet facet() const { return facet_; }
  double diagonal() const { return is_similarity(facet_) ? 1.0 : 0.0; }

  // Symmetric lookup. Identical codes resolve to the diagonal only if the
  // language occurs in the matrix.
  std::optional<double> find(const std::string& a, const std::string& b) const {
    if (a == b) return languages_.count(a) ? std::optional<double>(diagonal()) : std::nullopt;
    auto it = entries_.find(ordered(a, b));
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  bool contains(const std::string& code) const { return languages_.count(code) > 0; }
  const std::set<std::string>& languages() const { return languages_; }

  // Off-diagonal entries keyed by (smaller code, larger code).
  const std::map<std::pair<std::string, std::string>, double>& entries() const { return entries_; }

  // Mean over stored off-diagonal pairs; nullopt when there are none.
  std::optional<double> mean() const {
    if (entries_.empty()) return std::nullopt;
    double s = 0;
    for (const auto& [_, v] : entries_) s += v;
    return s / static_cast<double>(entries_.size());
  }

  double max() const {
    double m = 0;
    for (const auto& [_, v] : entries_) m = std::max(m, v);
    return m;
  }

  // Adds a pair; conflicting re-definitions (|a-b| > 1e-9) are rejected.
  void set(const std::string& a, const std::string& b, double v, Warnings* warnings = nullptr) {
    if (!std::isfinite(v)) throw DataError("non-finite " + std::string(facet_name(facet_)) + " value");
    if (is_similarity(facet_) && (v < 0 || v > 1))
      throw DataError(std::string(facet_name(facet_)) + " similarity (" + a + "," + b + ")=" + format_double(v) +
                      " outside [0,1]");
    if (!is_similarity(facet_) && v < 0)
      throw DataError("negative geographic distance (" + a + "," + b + ")=" + format_double(v));
    languages_.insert(a);
    languages_.insert(b);
    if (a == b) {
      if (v != diagonal())
        warn(warnings, std::string(facet_name(facet_)) + " diagonal (" + a + "," + a + ")=" + format_double(v) +
                           " overridden to " + format_double(diagonal()));
      return;
    }
    auto key = ordered(a, b);
    auto [it, fresh] = entries_.emplace(key, v);
    if (!fresh && std::abs(it->second - v) > 1e-9)
      throw DataError(std::string(facet_name(facet_)) + " asymmetric conflicting entries for (" + a + "," + b +
                      "): " + format_double(it->second) + " vs " + format_double(v));
  }

  bool operator==(const DistanceMatrix&) const = default;

 private:
  static std::pair<std::string, std::string> ordered(const std::string& a, const std::string& b) {
    return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  Facet facet_ = Facet::Syntactic;
  std::set<std::string> languages_;
  std::map<std::pair<std::string, std::string>, double> entries_;
};

// Three-column pair listing `lang_a,lang_b,value` (square or triangular).
inline DistanceMatrix ingest_distance_matrix(const Table& t, Facet facet, Warnings* warnings = nullptr,
                                             std::string_view what = "distance matrix") {
  const auto ca = t.require_column("lang_a", what);
  const auto cb = t.require_column("lang_b", what);
  const auto cv = t.require_column("value", what);
  DistanceMatrix m(facet);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(what) + " line " + std::to_string(t.lines[r]);
    if (row[ca].empty() || row[cb].empty()) throw DataError(where + ": empty language code");
    try {
      m.set(row[ca], row[cb], parse_double(row[cv], "value"), warnings);
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
  }
  return m;
}

inline void write_distance_matrix(std::ostream& out, const DistanceMatrix& m) {
  write_row(out, {"lang_a", "lang_b", "value"});
  std::set<std::string> paired;
  for (const auto& [k, v] : m.entries()) {
    write_row(out, {k.first, k.second, format_double(v)});
    paired.insert(k.first);
    paired.insert(k.second);
  }
  // Languages known only through their diagonal.
  for (const auto& l : m.languages())
    if (!paired.count(l)) write_row(out, {l, l, format_double(m.diagonal())});
}

using MatrixSet = std::map<Facet, DistanceMatrix>;

// ---------------------------------------------------------------------------
// Benchmark registry

struct BenchmarkTask {
  std::string task_id;
  std::string type;
  int release_year = 0;
  int n_languages = 0;
  int n_families = 0;
  std::optional<std::vector<std::string>> languages;

  bool operator==(const BenchmarkTask&) const = default;
};

struct BenchmarkRegistry {
  std::vector<BenchmarkTask> tasks;

  bool operator==(const BenchmarkRegistry&) const = default;
};

// Columns: task_id,type,year,n_languages,n_families[,language_list].
inline BenchmarkRegistry ingest_benchmark_registry(const Table& t, std::string_view what = "registry") {
  const auto c_id = t.require_column("task_id", what);
  const auto c_type = t.require_column("type", what);
  const auto c_year = t.require_column("year", what);
  const auto c_nl = t.require_column("n_languages", what);
  const auto c_nf = t.require_column("n_families", what);
  const auto c_list = t.column("language_list");
  BenchmarkRegistry reg;
  std::set<std::string> ids;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(what) + " line " + std::to_string(t.lines[r]);
    BenchmarkTask task;
    task.task_id = row[c_id];
    task.type = row[c_type];
    if (task.task_id.empty()) throw DataError(where + ": empty task_id");
    if (!ids.insert(task.task_id).second) throw DataError(where + ": duplicate task_id '" + task.task_id + "'");
    auto year = parse_int(row[c_year], where + " year");
    if (year < 1990 || year > 9999) throw DataError(where + ": release year " + std::to_string(year) + " < 1990");
    task.release_year = static_cast<int>(year);
    auto nl = parse_int(row[c_nl], where + " n_languages");
    if (nl < 1) throw DataError(where + ": language count must be >= 1");
    task.n_languages = static_cast<int>(nl);
    auto nf = parse_int(row[c_nf], where + " n_families");
    if (nf < 0) throw DataError(where + ": negative family count");
    task.n_families = static_cast<int>(nf);
    if (c_list && !row[*c_list].empty()) {
      auto langs = split_list(row[*c_list]);
      std::set<std::string> uniq(langs.begin(), langs.end());
      if (uniq.size() != langs.size()) throw DataError(where + ": duplicate language in list");
      if (static_cast<int>(langs.size()) != task.n_languages)
        throw DataError(where + ": language list has " + std::to_string(langs.size()) +
                        " entries but n_languages is " + std::to_string(task.n_languages));
      task.languages = std::move(langs);
    }
    reg.tasks.push_back(std::move(task));
  }
  return reg;
}

inline void write_benchmark_registry(std::ostream& out, const BenchmarkRegistry& reg) {
  bool lists = std::any_of(reg.tasks.begin(), reg.tasks.end(), [](const auto& t) { return t.languages.has_value(); });
  std::vector<std::string> header{"task_id", "type", "year", "n_languages", "n_families"};
  if (lists) header.push_back("language_list");
  write_row(out, header);
  for (const auto& t : reg.tasks) {
    std::vector<std::string> row{t.task_id, t.type, std::to_string(t.release_year), std::to_string(t.n_languages),
                                 std::to_string(t.n_families)};
    if (lists) row.push_back(t.languages ? join(*t.languages) : "");
    write_row(out, row);
  }
}

// ---------------------------------------------------------------------------
// Auxiliary tables

// task -> language -> training-set size. Columns: task,code,size.
using TrainSizes = std::map<std::string, std::map<std::string, double>>;

inline TrainSizes ingest_train_sizes(const Table& t, std::string_view what = "train sizes") {
  const auto c_task = t.require_column("task", what);
  const auto c_code = t.require_column("code", what);
  const auto c_size = t.require_column("size", what);
  TrainSizes out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(what) + " line " + std::to_string(t.lines[r]);
    double v = parse_double(row[c_size], where + " size");
    if (!std::isfinite(v) || v < 0) throw DataError(where + ": negative or non-finite training size");
    if (!out[row[c_task]].emplace(row[c_code], v).second)
      throw DataError(where + ": duplicate (task, code) pair");
  }
  return out;
}

struct TokenizedWord {
  std::string word;
  int n_subwords = 1;
};

// Columns: code,word,n_subwords. Produces the per-language tokenization samples.
inline std::map<std::string, std::vector<TokenizedWord>> ingest_tokenizations(const Table& t,
                                                                              std::string_view what = "tokenizations") {
  const auto c_code = t.require_column("code", what);
  const auto c_word = t.require_column("word", what);
  const auto c_n = t.require_column("n_subwords", what);
  std::map<std::string, std::vector<TokenizedWord>> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    const std::string where = std::string(what) + " line " + std::to_string(t.lines[r]);
    auto n = parse_int(row[c_n], where + " n_subwords");
    if (n < 1) throw DataError(where + ": n_subwords must be >= 1");
    out[row[c_code]].push_back({row[c_word], static_cast<int>(n)});
  }
  return out;
}

}  // namespace lingpred
