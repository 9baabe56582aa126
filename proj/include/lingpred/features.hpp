#pragma once

// Feature families for one (pivot set, target) configuration and their
// assembly into fixed-order vectors.
//
// Canonical order (ids; emitted names depend on the transform settings):
//   pretrain_t       log10(1 + pre-training size of t)
//   fertility_t      average subwords per word for t
//   continued_t      fraction of words of t split into >= 2 subwords
//   pretrain_p       log10(1 + pre-training size of p), mean over pivots
//   subword_overlap  Jaccard overlap of V_p and V_t, mean over pivots
//   syntactic        URIEL syntactic similarity, mean over pivots
//   phonological     URIEL phonological similarity, mean over pivots
//   genetic          URIEL genetic similarity, mean over pivots
//   geographic       1 / (1 + d / d_max), mean over pivots (or raw km)
//   train_size       log10(1 + summed training-set size over pivots)

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lingpred/datastore.hpp"
#include "lingpred/error.hpp"

namespace lingpred {

enum class Imputation { Strict, Mean, Zero };
enum class SizeTransform { Log10p1, Raw };
enum class GeoMode { Similarity, RawDistance };
enum class Aggregation { Mean };

inline constexpr std::array<std::string_view, 10> kFeatureIds = {
    "pretrain_t", "fertility_t", "continued_t", "pretrain_p", "subword_overlap",
    "syntactic",  "phonological", "genetic",    "geographic", "train_size"};

inline std::optional<Imputation> parse_imputation(std::string_view s) {
  if (s == "strict") return Imputation::Strict;
  if (s == "mean") return Imputation::Mean;
  if (s == "zero") return Imputation::Zero;
  return std::nullopt;
}

inline std::string_view imputation_name(Imputation p) {
  switch (p) {
    case Imputation::Strict: return "strict";
    case Imputation::Mean: return "mean";
    case Imputation::Zero: return "zero";
  }
  return "";
}

struct FeatureConfig {
  std::vector<std::string> enabled{kFeatureIds.begin(), kFeatureIds.end()};
  Imputation imputation = Imputation::Mean;
  Aggregation aggregation = Aggregation::Mean;
  SizeTransform size_transform = SizeTransform::Log10p1;
  GeoMode geo_mode = GeoMode::Similarity;
  // Training size assumed for pivots without a training set; median of the
  // known sizes when unset.
  std::optional<double> default_train_size;

  bool is_enabled(std::string_view id) const {
    return std::find(enabled.begin(), enabled.end(), id) != enabled.end();
  }

  void validate() const {
    for (const auto& e : enabled)
      if (std::find(kFeatureIds.begin(), kFeatureIds.end(), e) == kFeatureIds.end())
        throw DataError("unknown feature '" + e + "'");
    if (enabled.empty()) throw DataError("feature configuration enables no features");
  }
};

inline std::string emitted_name(std::string_view id, const FeatureConfig& cfg) {
  const bool log = cfg.size_transform == SizeTransform::Log10p1;
  if (id == "pretrain_t") return log ? "log_pretrain_t" : "pretrain_t";
  if (id == "pretrain_p") return log ? "log_pretrain_p" : "pretrain_p";
  if (id == "train_size") return log ? "log_train_size" : "train_size";
  if (id == "fertility_t" || id == "continued_t" || id == "subword_overlap") return std::string(id);
  if (id == "geographic") return cfg.geo_mode == GeoMode::Similarity ? "sim_geographic" : "dist_geographic";
  return "sim_" + std::string(id);
}

// Emitted names in canonical order for a configuration.
inline std::vector<std::string> feature_names(const FeatureConfig& cfg) {
  std::vector<std::string> out;
  for (auto id : kFeatureIds)
    if (cfg.is_enabled(id)) out.push_back(emitted_name(id, cfg));
  return out;
}

struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;
  std::vector<std::string> pivots;
  std::string target;
  // Human-readable notes on every value that came from imputation.
  std::vector<std::string> imputed;

  bool operator==(const FeatureVector&) const = default;
};

// ---------------------------------------------------------------------------
// Individual features

inline double subword_overlap(const Vocabulary& vp, const Vocabulary& vt) {
  const auto& a = vp.subwords;
  const auto& b = vt.subwords;
  if (a.empty() && b.empty()) return 0.0;
  std::size_t shared = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) ++ia;
    else if (*ib < *ia) ++ib;
    else {
      ++shared;
      ++ia;
      ++ib;
    }
  }
  const auto uni = a.size() + b.size() - shared;
  return static_cast<double>(shared) / static_cast<double>(uni);
}

struct TokenizerQuality {
  double fertility = 1;
  double continued_pct = 0;

  bool operator==(const TokenizerQuality&) const = default;
};

inline TokenizerQuality tokenizer_quality(std::span<const TokenizedWord> words) {
  if (words.empty()) throw DataError("tokenizer quality needs at least one tokenized word");
  double total = 0;
  std::size_t continued = 0;
  for (const auto& w : words) {
    if (w.n_subwords < 1) throw DataError("word '" + w.word + "' has fewer than one subword");
    total += w.n_subwords;
    if (w.n_subwords >= 2) ++continued;
  }
  const auto n = static_cast<double>(words.size());
  return {total / n, static_cast<double>(continued) / n};
}

inline double transform_size(double n, SizeTransform t) {
  return t == SizeTransform::Log10p1 ? std::log10(1.0 + n) : n;
}

inline double geo_similarity(double d, double d_max) {
  if (d_max <= 0) return 1.0;
  return 1.0 / (1.0 + d / d_max);
}

// Relatedness of p and t for one facet. Similarity facets return the stored
// value; geographic distance is converted to a similarity unless raw mode is
// requested. Missing pairs resolve through the imputation policy (the mean is
// taken over raw stored pairs and then transformed).
inline double typological_similarity(const std::string& p, const std::string& t, const DistanceMatrix& matrix,
                                     Imputation policy, GeoMode geo_mode = GeoMode::Similarity,
                                     bool* imputed = nullptr) {
  const bool geo = matrix.facet() == Facet::Geographic;
  auto finish = [&](double raw) {
    if (!geo || geo_mode == GeoMode::RawDistance) return raw;
    return geo_similarity(raw, matrix.max());
  };
  if (imputed) *imputed = false;
  if (p == t) return finish(matrix.diagonal());
  if (auto v = matrix.find(p, t)) return finish(*v);
  if (imputed) *imputed = true;
  switch (policy) {
    case Imputation::Strict:
      throw DataError(std::string(facet_name(matrix.facet())) + " relatedness missing for (" + p + "," + t + ")");
    case Imputation::Zero:
      return 0.0;
    case Imputation::Mean:
      break;
  }
  auto m = matrix.mean();
  if (!m) throw DataError(std::string(facet_name(matrix.facet())) + " matrix is empty; cannot impute a mean");
  return finish(*m);
}

// ---------------------------------------------------------------------------
// Context: the immutable data features are computed from, plus the
// statistics imputation needs. Non-owning; the referenced stores must outlive it.

class FeatureContext {
 public:
  FeatureContext() = default;

  FeatureContext(const ProfileMap* profiles, const MatrixSet* matrices, const VocabularyMap* vocabularies,
                 const std::map<std::string, TokenizerQuality>* tokenizer,
                 const std::map<std::string, double>* train_sizes)
      : profiles_(profiles),
        matrices_(matrices),
        vocabularies_(vocabularies),
        tokenizer_(tokenizer),
        train_sizes_(train_sizes) {
    if (vocabularies_ && vocabularies_->size() >= 2) {
      double s = 0;
      std::size_t n = 0;
      for (auto i = vocabularies_->begin(); i != vocabularies_->end(); ++i)
        for (auto j = std::next(i); j != vocabularies_->end(); ++j, ++n) s += subword_overlap(i->second, j->second);
      overlap_mean_ = s / static_cast<double>(n);
    }
    if (tokenizer_ && !tokenizer_->empty()) {
      double f = 0, c = 0;
      for (const auto& [_, q] : *tokenizer_) {
        f += q.fertility;
        c += q.continued_pct;
      }
      fertility_mean_ = f / static_cast<double>(tokenizer_->size());
      continued_mean_ = c / static_cast<double>(tokenizer_->size());
    }
    if (train_sizes_ && !train_sizes_->empty()) {
      std::vector<double> v;
      for (const auto& [_, s] : *train_sizes_) v.push_back(s);
      std::sort(v.begin(), v.end());
      const auto n = v.size();
      train_median_ = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
  }

  const ProfileMap* profiles() const { return profiles_; }
  const DistanceMatrix* matrix(Facet f) const {
    if (!matrices_) return nullptr;
    auto it = matrices_->find(f);
    return it == matrices_->end() ? nullptr : &it->second;
  }
  const Vocabulary* vocabulary(const std::string& code) const {
    if (!vocabularies_) return nullptr;
    auto it = vocabularies_->find(code);
    return it == vocabularies_->end() ? nullptr : &it->second;
  }
  const TokenizerQuality* tokenizer(const std::string& code) const {
    if (!tokenizer_) return nullptr;
    auto it = tokenizer_->find(code);
    return it == tokenizer_->end() ? nullptr : &it->second;
  }
  std::optional<double> train_size(const std::string& code) const {
    if (!train_sizes_) return std::nullopt;
    auto it = train_sizes_->find(code);
    if (it == train_sizes_->end()) return std::nullopt;
    return it->second;
  }

  std::optional<double> overlap_mean() const { return overlap_mean_; }
  std::optional<double> fertility_mean() const { return fertility_mean_; }
  std::optional<double> continued_mean() const { return continued_mean_; }
  std::optional<double> train_size_median() const { return train_median_; }

  std::optional<double> transformed_pretrain_mean(SizeTransform t) const {
    if (!profiles_ || profiles_->empty()) return std::nullopt;
    double s = 0;
    for (const auto& [_, p] : *profiles_) s += transform_size(p.pretrain_size, t);
    return s / static_cast<double>(profiles_->size());
  }

 private:
  const ProfileMap* profiles_ = nullptr;
  const MatrixSet* matrices_ = nullptr;
  const VocabularyMap* vocabularies_ = nullptr;
  const std::map<std::string, TokenizerQuality>* tokenizer_ = nullptr;
  const std::map<std::string, double>* train_sizes_ = nullptr;
  std::optional<double> overlap_mean_;
  std::optional<double> fertility_mean_;
  std::optional<double> continued_mean_;
  std::optional<double> train_median_;
};

namespace detail {

// Resolves a missing value according to the policy.
inline double impute(Imputation policy, std::optional<double> mean, const std::string& what,
                     std::vector<std::string>& notes) {
  switch (policy) {
    case Imputation::Strict:
      throw DataError(what + " is missing (strict imputation)");
    case Imputation::Zero:
      notes.push_back(what + " -> 0");
      return 0.0;
    case Imputation::Mean:
      if (!mean) throw DataError(what + " is missing and no data is available to impute a mean");
      notes.push_back(what + " -> mean " + format_double(*mean));
      return *mean;
  }
  return 0.0;
}

}  // namespace detail

// Builds the feature vector for pivots -> target. Pure over its inputs.
inline FeatureVector assemble_features(const std::string& target, std::vector<std::string> pivots,
                                       const FeatureContext& ctx, const FeatureConfig& cfg) {
  if (pivots.empty()) throw DataError("empty pivot set for target '" + target + "'");
  std::sort(pivots.begin(), pivots.end());
  pivots.erase(std::unique(pivots.begin(), pivots.end()), pivots.end());

  FeatureVector fv;
  fv.target = target;
  fv.pivots = pivots;
  auto& notes = fv.imputed;

  auto pretrain = [&](const std::string& code) {
    const LanguageProfile* p = nullptr;
    if (ctx.profiles()) {
      auto it = ctx.profiles()->find(code);
      if (it != ctx.profiles()->end()) p = &it->second;
    }
    if (p) return transform_size(p->pretrain_size, cfg.size_transform);
    return detail::impute(cfg.imputation, ctx.transformed_pretrain_mean(cfg.size_transform),
                          "profile of '" + code + "'", notes);
  };
  auto mean_over_pivots = [&](auto&& fn) {
    double s = 0;
    for (const auto& p : pivots) s += fn(p);
    return s / static_cast<double>(pivots.size());
  };

  for (auto id : kFeatureIds) {
    if (!cfg.is_enabled(id)) continue;
    double v = 0;
    if (id == "pretrain_t") {
      v = pretrain(target);
    } else if (id == "fertility_t" || id == "continued_t") {
      const bool fert = id == "fertility_t";
      if (const auto* q = ctx.tokenizer(target)) v = fert ? q->fertility : q->continued_pct;
      else
        v = detail::impute(cfg.imputation, fert ? ctx.fertility_mean() : ctx.continued_mean(),
                           "tokenizer quality of '" + target + "'", notes);
    } else if (id == "pretrain_p") {
      v = mean_over_pivots(pretrain);
    } else if (id == "subword_overlap") {
      v = mean_over_pivots([&](const std::string& p) {
        const auto* vp = ctx.vocabulary(p);
        const auto* vt = ctx.vocabulary(target);
        if (vp && vt) return subword_overlap(*vp, *vt);
        if (p == target && vp) return vp->subwords.empty() ? 0.0 : 1.0;
        return detail::impute(cfg.imputation, ctx.overlap_mean(), "vocabulary for (" + p + "," + target + ")", notes);
      });
    } else if (id == "train_size") {
      double total = 0;
      for (const auto& p : pivots) {
        if (auto s = ctx.train_size(p)) {
          total += *s;
        } else if (cfg.default_train_size) {
          notes.push_back("training size of '" + p + "' -> default " + format_double(*cfg.default_train_size));
          total += *cfg.default_train_size;
        } else {
          total += detail::impute(cfg.imputation, ctx.train_size_median(), "training size of '" + p + "'", notes);
        }
      }
      v = transform_size(total, cfg.size_transform);
    } else {
      const Facet facet = *parse_facet(id);
      const auto* m = ctx.matrix(facet);
      v = mean_over_pivots([&](const std::string& p) {
        if (!m) {
          if (p == target)
            return (facet == Facet::Geographic && cfg.geo_mode == GeoMode::RawDistance) ? 0.0 : 1.0;
          // No matrix at all: only the zero policy has something to fall back on.
          const auto policy = cfg.imputation == Imputation::Zero ? Imputation::Zero : Imputation::Strict;
          return detail::impute(policy, std::nullopt, std::string(facet_name(facet)) + " matrix", notes);
        }
        bool was_imputed = false;
        double r = typological_similarity(p, target, *m, cfg.imputation, cfg.geo_mode, &was_imputed);
        if (was_imputed)
          notes.push_back(std::string(facet_name(facet)) + " (" + p + "," + target + ") -> " +
                          std::string(imputation_name(cfg.imputation)) + " " + format_double(r));
        return r;
      });
    }
    if (!std::isfinite(v)) throw DataError("non-finite feature " + std::string(id) + " for target '" + target + "'");
    fv.names.push_back(emitted_name(id, cfg));
    fv.values.push_back(v);
  }
  return fv;
}

}  // namespace lingpred
