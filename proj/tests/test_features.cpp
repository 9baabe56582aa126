#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "lingpred/features.hpp"
#include "lingpred/parallel.hpp"
#include "test_util.hpp"

using namespace lingpred;

namespace {

Vocabulary vocab(std::string code, std::initializer_list<const char*> words) {
  Vocabulary v{std::move(code), {}};
  for (const auto* w : words) v.subwords.insert(w);
  return v;
}

// Small, fully specified world: five languages, every facet, vocabularies,
// tokenizer statistics and training sizes.
struct World {
  ProfileMap profiles;
  MatrixSet matrices;
  VocabularyMap vocabs;
  std::map<std::string, TokenizerQuality> tok;
  std::map<std::string, double> train{{"en", 1000}, {"fi", 50}, {"ru", 30}};
  // (a, b, syntactic, phonological, genetic, geographic km)
  std::vector<std::tuple<std::string, std::string, double, double, double, double>> pairs{
      {"de", "en", 0.8, 0.7, 0.9, 900},  {"en", "fi", 0.5, 0.4, 0.1, 1800}, {"en", "ru", 0.6, 0.5, 0.6, 2500},
      {"en", "sw", 0.3, 0.35, 0.0, 6800}, {"fi", "sw", 0.25, 0.3, 0.0, 7200}, {"ru", "sw", 0.4, 0.45, 0.05, 6400},
      {"de", "fi", 0.55, 0.5, 0.1, 1300}, {"de", "ru", 0.62, 0.52, 0.6, 1600}, {"fi", "ru", 0.5, 0.6, 0.05, 900}};

  World() {
    for (auto [code, size] : std::vector<std::pair<std::string, double>>{
             {"en", 6e6}, {"de", 2.5e6}, {"fi", 5e5}, {"ru", 1.7e6}, {"sw", 6e4}})
      profiles[code] = LanguageProfile{code, size, 3, Family::IndoEuropean, {}, {}};
    for (Facet f : kAllFacets) matrices.emplace(f, DistanceMatrix(f));
    for (const auto& [a, b, syn, pho, gen, geo] : pairs) {
      matrices[Facet::Syntactic].set(a, b, syn);
      matrices[Facet::Phonological].set(a, b, pho);
      matrices[Facet::Genetic].set(a, b, gen);
      matrices[Facet::Geographic].set(a, b, geo);
    }
    vocabs["en"] = vocab("en", {"a", "b", "c"});
    vocabs["de"] = vocab("de", {"b", "c", "d"});
    vocabs["fi"] = vocab("fi", {"e", "f", "a"});
    vocabs["ru"] = vocab("ru", {"g", "h"});
    vocabs["sw"] = vocab("sw", {"a", "e", "g", "i"});
    tok["en"] = {1.2, 0.15};
    tok["de"] = {1.5, 0.3};
    tok["fi"] = {1.9, 0.5};
    tok["ru"] = {1.7, 0.4};
    tok["sw"] = {1.6, 0.35};
  }

  FeatureContext ctx() const { return FeatureContext(&profiles, &matrices, &vocabs, &tok, &train); }
};

std::size_t index_of(const FeatureVector& fv, const std::string& name) {
  auto it = std::find(fv.names.begin(), fv.names.end(), name);
  if (it == fv.names.end()) throw std::runtime_error("no feature " + name);
  return static_cast<std::size_t>(it - fv.names.begin());
}

double value(const FeatureVector& fv, const std::string& name) { return fv.values[index_of(fv, name)]; }

}  // namespace

// --- subword overlap ----------------------------------------------------------------

TEST(SubwordOverlap, Examples) {
  EXPECT_DOUBLE_EQ(subword_overlap(vocab("p", {"a", "b", "c"}), vocab("t", {"a", "b", "c"})), 1.0);
  EXPECT_DOUBLE_EQ(subword_overlap(vocab("p", {"a", "b", "c"}), vocab("t", {"b", "c", "d"})), 0.5);
  EXPECT_DOUBLE_EQ(subword_overlap(vocab("p", {}), vocab("t", {"a"})), 0.0);
  EXPECT_DOUBLE_EQ(subword_overlap(vocab("p", {}), vocab("t", {})), 0.0);
}

TEST(SubwordOverlap, FuzzSymmetryRangeIdentityAgainstOracle) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    Vocabulary a{"a", {}}, b{"b", {}};
    const int universe = 1 + static_cast<int>(rng() % 40);
    const int na = static_cast<int>(rng() % 30), nb = static_cast<int>(rng() % 30);
    for (int i = 0; i < na; ++i) a.subwords.insert("w" + std::to_string(rng() % universe));
    for (int i = 0; i < nb; ++i) b.subwords.insert("w" + std::to_string(rng() % universe));
    const double ab = subword_overlap(a, b);
    ASSERT_EQ(ab, subword_overlap(b, a));
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 1.0);
    if (!a.subwords.empty()) {
      ASSERT_EQ(subword_overlap(a, a), 1.0);
    }
    // Independent oracle: count by membership over the union.
    std::set<std::string> uni(a.subwords);
    uni.insert(b.subwords.begin(), b.subwords.end());
    std::size_t shared = 0;
    for (const auto& w : uni) shared += a.subwords.count(w) && b.subwords.count(w);
    const double expect = uni.empty() ? 0.0 : static_cast<double>(shared) / static_cast<double>(uni.size());
    ASSERT_DOUBLE_EQ(ab, expect);
  }
}

// --- tokenizer quality ----------------------------------------------------------------

TEST(TokenizerQuality, HandOracle) {
  std::vector<TokenizedWord> w1{{"cat", 1}, {"dog", 1}};
  EXPECT_EQ(tokenizer_quality(w1), (TokenizerQuality{1.0, 0.0}));
  std::vector<TokenizedWord> w2{{"unhappiness", 3}};
  EXPECT_EQ(tokenizer_quality(w2), (TokenizerQuality{3.0, 1.0}));
  std::vector<TokenizedWord> w3{{"a", 1}, {"bc", 2}, {"def", 3}};
  auto q = tokenizer_quality(w3);
  EXPECT_DOUBLE_EQ(q.fertility, 2.0);
  EXPECT_DOUBLE_EQ(q.continued_pct, 2.0 / 3.0);
}

TEST(TokenizerQuality, EmptyInputAndBadCounts) {
  EXPECT_THROW(tokenizer_quality({}), DataError);
  std::vector<TokenizedWord> bad{{"x", 0}};
  EXPECT_THROW(tokenizer_quality(bad), DataError);
}

TEST(TokenizerQuality, InvariantsOnRandomSamples) {
  std::mt19937 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<TokenizedWord> words;
    const int n = 1 + static_cast<int>(rng() % 50);
    long total = 0, cont = 0;
    for (int i = 0; i < n; ++i) {
      int k = 1 + static_cast<int>(rng() % 5);
      words.push_back({"w", k});
      total += k;
      cont += k >= 2;
    }
    auto q = tokenizer_quality(words);
    EXPECT_GE(q.fertility, 1.0);
    EXPECT_GE(q.continued_pct, 0.0);
    EXPECT_LE(q.continued_pct, 1.0);
    EXPECT_DOUBLE_EQ(q.fertility, static_cast<double>(total) / n);
    EXPECT_DOUBLE_EQ(q.continued_pct, static_cast<double>(cont) / n);
  }
}

// --- typological similarity -------------------------------------------------------------

TEST(TypologicalSimilarity, DiagonalLookupAndMeanImputation) {
  DistanceMatrix m(Facet::Syntactic);
  const std::vector<std::tuple<std::string, std::string, double>> pairs{
      {"en", "de", 0.8}, {"en", "fr", 0.5}, {"de", "fr", 0.5}, {"fr", "es", 0.9}};
  for (const auto& [a, b, v] : pairs) m.set(a, b, v);
  EXPECT_EQ(typological_similarity("en", "en", m, Imputation::Strict), 1.0);
  EXPECT_EQ(typological_similarity("en", "de", m, Imputation::Strict), 0.8);
  // Oracle mean straight from the listed pairs.
  double s = 0;
  for (const auto& p : pairs) s += std::get<2>(p);
  bool imputed = false;
  EXPECT_DOUBLE_EQ(typological_similarity("en", "zz", m, Imputation::Mean, GeoMode::Similarity, &imputed),
                   s / static_cast<double>(pairs.size()));
  EXPECT_TRUE(imputed);
  EXPECT_EQ(typological_similarity("en", "zz", m, Imputation::Zero), 0.0);
  EXPECT_THROW(typological_similarity("en", "zz", m, Imputation::Strict), DataError);
}

TEST(TypologicalSimilarity, MeanImputeOfTwoPairs) {
  DistanceMatrix m(Facet::Syntactic);
  m.set("en", "de", 0.8);
  m.set("en", "fr", 0.4);
  EXPECT_DOUBLE_EQ(typological_similarity("en", "zz", m, Imputation::Mean), 0.6);
}

TEST(TypologicalSimilarity, GeographicConversion) {
  DistanceMatrix g(Facet::Geographic);
  g.set("a", "b", 100);
  g.set("a", "c", 400);
  EXPECT_DOUBLE_EQ(typological_similarity("a", "b", g, Imputation::Strict), 1.0 / (1.0 + 100.0 / 400.0));
  EXPECT_DOUBLE_EQ(typological_similarity("a", "c", g, Imputation::Strict), 0.5);
  EXPECT_DOUBLE_EQ(typological_similarity("a", "a", g, Imputation::Strict), 1.0);
  EXPECT_DOUBLE_EQ(typological_similarity("a", "c", g, Imputation::Strict, GeoMode::RawDistance), 400.0);
  EXPECT_DOUBLE_EQ(typological_similarity("a", "a", g, Imputation::Strict, GeoMode::RawDistance), 0.0);
  // Mean of raw distances, then converted.
  EXPECT_DOUBLE_EQ(typological_similarity("b", "c", g, Imputation::Mean), 1.0 / (1.0 + 250.0 / 400.0));
}

// --- assembly ---------------------------------------------------------------------------

TEST(AssembleFeatures, SinglePivotShapeAndOrder) {
  World w;
  auto fv = assemble_features("de", {"en"}, w.ctx(), FeatureConfig{});
  const std::vector<std::string> expect{"log_pretrain_t", "fertility_t",  "continued_t",  "log_pretrain_p",
                                        "subword_overlap", "sim_syntactic", "sim_phonological", "sim_genetic",
                                        "sim_geographic",  "log_train_size"};
  EXPECT_EQ(fv.names, expect);
  ASSERT_EQ(fv.values.size(), 10u);
  EXPECT_TRUE(fv.imputed.empty());
  EXPECT_DOUBLE_EQ(fv.values[0], std::log10(1 + 2.5e6));
  EXPECT_DOUBLE_EQ(fv.values[1], 1.5);
  EXPECT_DOUBLE_EQ(fv.values[2], 0.3);
  EXPECT_DOUBLE_EQ(fv.values[3], std::log10(1 + 6e6));
  EXPECT_DOUBLE_EQ(fv.values[4], 0.5);
  EXPECT_DOUBLE_EQ(fv.values[5], 0.8);
  EXPECT_DOUBLE_EQ(fv.values[6], 0.7);
  EXPECT_DOUBLE_EQ(fv.values[7], 0.9);
  EXPECT_DOUBLE_EQ(fv.values[8], 1.0 / (1.0 + 900.0 / 7200.0));
  EXPECT_DOUBLE_EQ(fv.values[9], std::log10(1 + 1000.0));
  EXPECT_EQ(fv.names, feature_names(FeatureConfig{}));
}

TEST(AssembleFeatures, SelfTransfer) {
  World w;
  auto fv = assemble_features("en", {"en"}, w.ctx(), FeatureConfig{});
  EXPECT_EQ(value(fv, "subword_overlap"), 1.0);
  for (const char* n : {"sim_syntactic", "sim_phonological", "sim_genetic", "sim_geographic"})
    EXPECT_EQ(value(fv, n), 1.0) << n;
}

TEST(AssembleFeatures, MultiPivotIsMeanOfSinglePivotVectors) {
  World w;
  const auto ctx = w.ctx();
  const FeatureConfig cfg;
  auto fi = assemble_features("sw", {"fi"}, ctx, cfg);
  auto ru = assemble_features("sw", {"ru"}, ctx, cfg);
  auto both = assemble_features("sw", {"ru", "fi"}, ctx, cfg);
  EXPECT_EQ(both.pivots, (std::vector<std::string>{"fi", "ru"}));
  for (const char* n : {"log_pretrain_p", "subword_overlap", "sim_syntactic", "sim_phonological", "sim_genetic",
                        "sim_geographic"})
    EXPECT_DOUBLE_EQ(value(both, n), 0.5 * (value(fi, n) + value(ru, n))) << n;
  for (const char* n : {"log_pretrain_t", "fertility_t", "continued_t"}) EXPECT_EQ(value(both, n), value(fi, n)) << n;
  EXPECT_DOUBLE_EQ(value(both, "log_train_size"), std::log10(1 + 50.0 + 30.0));
  // Hand values for the pair features.
  EXPECT_DOUBLE_EQ(value(both, "sim_syntactic"), 0.5 * (0.25 + 0.4));
  EXPECT_DOUBLE_EQ(value(both, "subword_overlap"), 0.5 * (2.0 / 5.0 + 1.0 / 5.0));
}

TEST(AssembleFeatures, PivotOrderAndDuplicatesDoNotMatter) {
  World w;
  const auto ctx = w.ctx();
  EXPECT_EQ(assemble_features("sw", {"fi", "ru"}, ctx, {}), assemble_features("sw", {"ru", "fi", "ru"}, ctx, {}));
  EXPECT_THROW(assemble_features("sw", {}, ctx, {}), DataError);
}

TEST(AssembleFeatures, ImputationPolicies) {
  World w;
  const auto ctx = w.ctx();
  FeatureConfig strict;
  strict.imputation = Imputation::Strict;
  EXPECT_THROW(assemble_features("zz", {"en"}, ctx, strict), DataError);

  FeatureConfig zero;
  zero.imputation = Imputation::Zero;
  auto z = assemble_features("zz", {"en"}, ctx, zero);
  EXPECT_EQ(value(z, "log_pretrain_t"), 0.0);
  EXPECT_EQ(value(z, "fertility_t"), 0.0);
  EXPECT_EQ(value(z, "sim_syntactic"), 0.0);
  EXPECT_FALSE(z.imputed.empty());

  auto m = assemble_features("zz", {"en"}, ctx, FeatureConfig{});
  double pre = 0;
  for (const auto& [_, p] : w.profiles) pre += std::log10(1 + p.pretrain_size);
  EXPECT_DOUBLE_EQ(value(m, "log_pretrain_t"), pre / 5.0);
  EXPECT_DOUBLE_EQ(value(m, "fertility_t"), (1.2 + 1.5 + 1.9 + 1.7 + 1.6) / 5.0);
  double syn = 0;
  for (const auto& p : w.pairs) syn += std::get<2>(p);
  EXPECT_DOUBLE_EQ(value(m, "sim_syntactic"), syn / static_cast<double>(w.pairs.size()));
  // Mean Jaccard over all vocabulary pairs, computed independently.
  double ov = 0;
  int n = 0;
  for (auto i = w.vocabs.begin(); i != w.vocabs.end(); ++i)
    for (auto j = std::next(i); j != w.vocabs.end(); ++j, ++n) {
      std::set<std::string> uni(i->second.subwords), inter;
      uni.insert(j->second.subwords.begin(), j->second.subwords.end());
      for (const auto& s : i->second.subwords)
        if (j->second.subwords.count(s)) inter.insert(s);
      ov += static_cast<double>(inter.size()) / static_cast<double>(uni.size());
    }
  EXPECT_DOUBLE_EQ(value(m, "subword_overlap"), ov / n);
  for (const auto& v : m.values) EXPECT_TRUE(std::isfinite(v));
}

TEST(AssembleFeatures, MissingTrainingSize) {
  World w;
  const auto ctx = w.ctx();
  // Median of {1000, 50, 30}.
  auto fv = assemble_features("sw", {"de"}, ctx, FeatureConfig{});
  EXPECT_DOUBLE_EQ(value(fv, "log_train_size"), std::log10(1 + 50.0));
  EXPECT_FALSE(fv.imputed.empty());
  FeatureConfig cfg;
  cfg.default_train_size = 200;
  EXPECT_DOUBLE_EQ(value(assemble_features("sw", {"de"}, ctx, cfg), "log_train_size"), std::log10(1 + 200.0));
  cfg.imputation = Imputation::Strict;
  cfg.enabled = {"train_size"};
  EXPECT_NO_THROW(assemble_features("sw", {"de"}, ctx, cfg));
  cfg.default_train_size.reset();
  EXPECT_THROW(assemble_features("sw", {"de"}, ctx, cfg), DataError);
}

TEST(AssembleFeatures, NoMatrixSelfTransferStillOne) {
  ProfileMap profiles;
  profiles["en"] = LanguageProfile{"en", 10, {}, {}, {}, {}};
  FeatureConfig cfg;
  cfg.enabled = {"syntactic", "geographic"};
  FeatureContext ctx(&profiles, nullptr, nullptr, nullptr, nullptr);
  auto fv = assemble_features("en", {"en"}, ctx, cfg);
  EXPECT_EQ(fv.values, (std::vector<double>{1.0, 1.0}));
  EXPECT_THROW(assemble_features("de", {"en"}, ctx, cfg), DataError);
}

TEST(AssembleFeatures, SubsetsAndTransformsRespectCanonicalOrder) {
  World w;
  FeatureConfig cfg;
  cfg.enabled = {"train_size", "geographic", "pretrain_t"};
  cfg.size_transform = SizeTransform::Raw;
  cfg.geo_mode = GeoMode::RawDistance;
  auto fv = assemble_features("de", {"en"}, w.ctx(), cfg);
  EXPECT_EQ(fv.names, (std::vector<std::string>{"pretrain_t", "dist_geographic", "train_size"}));
  EXPECT_EQ(fv.values, (std::vector<double>{2.5e6, 900.0, 1000.0}));
  cfg.enabled = {"bogus"};
  EXPECT_THROW(cfg.validate(), DataError);
}

TEST(AssembleFeatures, PureAndHashStableAcrossRunsAndJobs) {
  World w;
  const auto ctx = w.ctx();
  std::vector<std::pair<std::string, std::vector<std::string>>> queries;
  const std::vector<std::string> langs{"en", "de", "fi", "ru", "sw", "zz"};
  for (const auto& t : langs)
    for (const auto& p : langs) {
      queries.push_back({t, {p}});
      queries.push_back({t, {p, "en"}});
    }
  auto run = [&](int jobs) {
    std::vector<FeatureVector> out(queries.size());
    parallel_for(queries.size(), jobs, [&](std::size_t i) {
      out[i] = assemble_features(queries[i].first, queries[i].second, ctx, FeatureConfig{});
    });
    // FNV-1a over the raw bytes of every value.
    std::uint64_t h = 1469598103934665603ull;
    for (const auto& fv : out)
      for (double v : fv.values) {
        unsigned char b[sizeof(double)];
        std::memcpy(b, &v, sizeof v);
        for (auto c : b) h = (h ^ c) * 1099511628211ull;
      }
    return std::make_pair(out, h);
  };
  const auto a = run(1);
  const auto b = run(1);
  const auto c = run(4);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_EQ(a.second, c.second);
}

TEST(AssembleFeatures, LogPretrainIsMonotone) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1e10);
  FeatureConfig cfg;
  cfg.enabled = {"pretrain_t"};
  for (int i = 0; i < 2000; ++i) {
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    ProfileMap pa{{"t", LanguageProfile{"t", a, {}, {}, {}, {}}}};
    ProfileMap pb{{"t", LanguageProfile{"t", b, {}, {}, {}, {}}}};
    FeatureContext ca(&pa, nullptr, nullptr, nullptr, nullptr), cb(&pb, nullptr, nullptr, nullptr, nullptr);
    EXPECT_LE(assemble_features("t", {"t"}, ca, cfg).values[0], assemble_features("t", {"t"}, cb, cfg).values[0]);
  }
}
