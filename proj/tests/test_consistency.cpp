#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "xaudit/consistency.hpp"
#include "xaudit/explainers.hpp"

using namespace xaudit;
using xaudit::testing::uniform_spec;

namespace {

ImportanceRanking ranking(std::vector<std::pair<std::string, double>> scores, std::string technique = "t",
                          std::string model = "m") {
    std::vector<std::string> names;
    std::vector<double> values;
    for (auto& [n, v] : scores) {
        names.push_back(n);
        values.push_back(v);
    }
    return ImportanceRanking::from_scores(names, values, std::move(technique), std::move(model));
}

/// Oracle: textbook formula 1 - 6 sum d^2 / (n (n^2 - 1)) for rankings without ties.
double spearman_formula(const std::vector<double>& ra, const std::vector<double>& rb) {
    double d2 = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
    const double n = static_cast<double>(ra.size());
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

DynamicResult dynamic_from(std::vector<std::pair<std::string, double>> scores, std::string model = "m",
                           std::vector<std::string> reversing = {}) {
    DynamicResult d;
    d.ranking = ranking(scores, "dynamic", model);
    for (auto& [name, score] : scores) {
        SensitivityScore s;
        s.feature = name;
        s.score = score;
        if (std::find(reversing.begin(), reversing.end(), name) != reversing.end()) {
            s.monotone = false;
            s.reversal_points = {1.2};
        }
        d.scores.push_back(s);
    }
    return d;
}

}  // namespace

TEST_CASE("spearman examples") {
    const auto a = ranking({{"f1", 3}, {"f2", 2}, {"f3", 1}});
    const auto b = ranking({{"f1", 1}, {"f2", 3}, {"f3", 2}});
    CHECK(spearman_rank_correlation(a, a) == doctest::Approx(1.0));
    CHECK(spearman_rank_correlation(a, ranking({{"f1", 1}, {"f2", 2}, {"f3", 3}})) == doctest::Approx(-1.0));
    CHECK(spearman_formula({1, 2, 3}, {3, 1, 2}) == doctest::Approx(-0.5));
    CHECK(spearman_rank_correlation(a, b) == doctest::Approx(-0.5));
    CHECK(spearman_rank_correlation(a, b) == spearman_rank_correlation(b, a));
}

TEST_CASE("spearman averages tied ranks and ignores unshared features") {
    // a ranks (1, 2.5, 2.5, 4); b ranks (1, 2, 3, 4). Pearson of those by hand:
    // centred a = (-1.5, 0, 0, 1.5), centred b = (-1.5, -0.5, 0.5, 1.5)
    // -> 4.5 / sqrt(4.5 * 5).
    const auto a = ranking({{"w", 4}, {"x", 2}, {"y", 2}, {"z", 1}, {"only_a", 9}});
    const auto b = ranking({{"w", 4}, {"x", 3}, {"y", 2}, {"z", 1}, {"only_b", 9}});
    CHECK(spearman_rank_correlation(a, b) == doctest::Approx(4.5 / std::sqrt(4.5 * 5.0)));
    const auto flat = ranking({{"w", 1}, {"x", 1}, {"y", 1}});
    CHECK(spearman_rank_correlation(flat, b) == 0.0);
    CHECK_THROWS_AS(spearman_rank_correlation(ranking({{"w", 1}, {"x", 2}}), b), DataError);
}

TEST_CASE("property: spearman agrees with the textbook formula on random permutations") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::uniform_int_distribution<int> size(3, 15);
        const int n = size(rng);
        std::vector<double> ra(n), rb(n);
        for (int i = 0; i < n; ++i) ra[i] = rb[i] = i + 1;
        std::shuffle(ra.begin(), ra.end(), rng);
        std::shuffle(rb.begin(), rb.end(), rng);
        std::vector<std::pair<std::string, double>> sa, sb;
        for (int i = 0; i < n; ++i) {
            sa.emplace_back("f" + std::to_string(i), n + 1 - ra[i]);
            sb.emplace_back("f" + std::to_string(i), 0.5 * (n + 1 - rb[i]));
        }
        REQUIRE(spearman_rank_correlation(ranking(sa), ranking(sb)) ==
                doctest::Approx(spearman_formula(ra, rb)).epsilon(1e-12));
    }
}

TEST_CASE("top-k overlap") {
    std::vector<std::pair<std::string, double>> sa, sb;
    for (int i = 0; i < 12; ++i) {
        sa.emplace_back("f" + std::to_string(i), 20 - i);
        // b swaps f9 (a's tenth) for f10.
        sb.emplace_back("f" + std::to_string(i), i == 9 ? 0.5 : 20 - i);
    }
    const auto a = ranking(sa), b = ranking(sb);
    CHECK(top_k_overlap(a, a, 10) == 1.0);
    CHECK(top_k_overlap(a, b, 10) == doctest::Approx(9.0 / 11.0));
    CHECK(top_k_overlap(a, b, 10) == top_k_overlap(b, a, 10));
    const auto c = ranking({{"p", 3}, {"q", 2}, {"r", 1}});
    CHECK(top_k_overlap(a, c, 3) == 0.0);
    CHECK_THROWS_AS(top_k_overlap(a, c, 4), ConfigError);
    CHECK_THROWS_AS(top_k_overlap(a, c, 0), ConfigError);
}

TEST_CASE("report with identical static and dynamic rankings") {
    const auto schema = FeatureSchema::build({"a", "b", "c", "d"}, {});
    const std::vector<std::pair<std::string, double>> s{{"a", 0.4}, {"b", 0.3}, {"c", 0.2}, {"d", 0.1}};
    const std::vector<ImportanceRanking> statics{ranking(s, "shap")};
    const std::vector<DynamicResult> dyn{dynamic_from(s)};
    const auto report = build_consistency_report(statics, dyn, schema);
    REQUIRE(report.blocks.size() == 1);
    const auto& block = report.blocks[0];
    CHECK(block.spearman == doctest::Approx(1.0));
    CHECK(block.top_k_overlap == 1.0);
    CHECK(block.k == 4);
    CHECK(block.flag_count() == 0);
    CHECK(block.verdict.rfind("consistent", 0) == 0);
    CHECK(block.verdict.find(", 0 flags)") != std::string::npos);
    CHECK(block.features.size() == 4);
    CHECK(consistency_markdown(report).find("## m / shap") != std::string::npos);
}

TEST_CASE("report flags static-important features that are flat or reverse") {
    const auto schema = FeatureSchema::build({"a", "b", "c", "d"}, {});
    const std::vector<ImportanceRanking> statics{
        ranking({{"a", 0.9}, {"b", 0.5}, {"c", 0.2}, {"d", 0.0}}, "shap")};
    const std::vector<DynamicResult> dyn{
        dynamic_from({{"a", 0.0}, {"b", 0.3}, {"c", 0.2}, {"d", 0.0}}, "m", {"b", "d"})};
    ConsistencyConfig cfg;
    cfg.k = 2;
    const auto report = build_consistency_report(statics, dyn, schema, cfg);
    const auto& rows = report.blocks[0].features;
    auto flags_of = [&](const std::string& f) {
        for (const auto& r : rows)
            if (r.feature == f) return r.flags;
        FAIL("missing feature " << f);
        return std::vector<std::string>{};
    };
    CHECK(flags_of("a") == std::vector<std::string>{kFlatFlag});
    CHECK(flags_of("b") == std::vector<std::string>{kReversalFlag});
    CHECK(flags_of("c").empty());  // outside the static top 2
    CHECK(flags_of("d").empty());
    CHECK(report.blocks[0].flag_count() == 2);
    CHECK(report.blocks[0].verdict.find(", 2 flags)") != std::string::npos);
    REQUIRE(report.verdicts.size() == 1);
    CHECK(report.verdicts[0].find("over 1 technique; 2 discontinuity flags") != std::string::npos);
}

TEST_CASE("property: report metrics and flags are scale invariant") {
    Rng rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto schema = FeatureSchema::build({"a", "b", "c", "d", "e"}, {});
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::pair<std::string, double>> s, d, scaled;
        for (const char* f : {"a", "b", "c", "d", "e"}) {
            s.emplace_back(f, u(rng));
            d.emplace_back(f, u(rng) * 0.05);
        }
        const double factor = 0.1 + 10 * u(rng);
        for (auto [f, v] : s) scaled.emplace_back(f, v * factor);
        ConsistencyConfig cfg;
        cfg.k = 3;
        const std::vector<DynamicResult> dyn{dynamic_from(d)};
        const std::vector<ImportanceRanking> one{ranking(s)}, two{ranking(scaled)};
        const auto r1 = build_consistency_report(one, dyn, schema, cfg);
        const auto r2 = build_consistency_report(two, dyn, schema, cfg);
        REQUIRE(r1.blocks[0].spearman == doctest::Approx(r2.blocks[0].spearman).epsilon(1e-12));
        REQUIRE(r1.blocks[0].top_k_overlap == r2.blocks[0].top_k_overlap);
        for (std::size_t k = 0; k < r1.blocks[0].features.size(); ++k)
            REQUIRE(r1.blocks[0].features[k].flags == r2.blocks[0].features[k].flags);
        // Completeness: every compared feature exactly once.
        std::vector<std::string> seen;
        for (const auto& f : r1.blocks[0].features) seen.push_back(f.feature);
        std::sort(seen.begin(), seen.end());
        REQUIRE(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
        REQUIRE(seen.size() == r1.blocks[0].compared.size());
    }
}

TEST_CASE("group-level static entries stand in for each perturbed level") {
    const auto schema = FeatureSchema::build({"rate", "income", "term"}, {{"grade", {"A", "B", "C"}}});
    const std::vector<ImportanceRanking> statics{
        ranking({{"rate", 0.5}, {"grade", 0.3}, {"income", 0.1}, {"term", 0.05}}, "shap")};
    const std::vector<DynamicResult> dyn{
        dynamic_from({{"rate", 0.4}, {"grade=A", 0.001}, {"grade=C", 0.002}, {"income", 0.1}})};
    ConsistencyConfig cfg;
    cfg.k = 3;
    const auto report = build_consistency_report(statics, dyn, schema, cfg);
    const auto& block = report.blocks[0];
    CHECK(block.compared.size() == 4);  // term was not perturbed
    std::size_t flat = 0;
    for (const auto& f : block.features) {
        if (f.feature.rfind("grade=", 0) == 0) {
            CHECK(f.static_score == 0.3);
            flat += f.flags.size();
        }
    }
    CHECK(flat == 2);
}

TEST_CASE("report bookkeeping") {
    const auto schema = FeatureSchema::build({"a", "b", "c"}, {});
    const std::vector<ImportanceRanking> statics{ranking({{"a", 1}, {"b", 2}, {"c", 3}}, "shap", "other"),
                                                 ranking({{"a", 1}, {"b", 2}}, "impurity", "m")};
    const std::vector<DynamicResult> dyn{dynamic_from({{"a", 1}, {"b", 2}, {"c", 3}})};
    CHECK_THROWS_AS(build_consistency_report(statics, dyn, schema), DataError);
    const std::vector<ImportanceRanking> none;
    CHECK_THROWS_AS(build_consistency_report(none, dyn, schema), ConfigError);
}

TEST_CASE("coefficient and dynamic rankings agree for a synthetic logistic model") {
    const auto data = generate_synthetic(uniform_spec(4000, {3.0, -2.0, 1.0, 0.5, 0.0}, -0.5), 12).data;
    const TrainedModel model(train_logistic(data), "h");
    const std::vector<std::string> features = data.schema().names();
    const auto dyn = dynamic_importance(model, data, features, {}, "logistic");
    const std::vector<ImportanceRanking> statics{logit_coefficient_importance(model, data.schema())};
    const std::vector<DynamicResult> dyns{dyn};
    const auto report = build_consistency_report(statics, dyns, data.schema());
    MESSAGE("spearman " << report.blocks[0].spearman);
    CHECK(report.blocks[0].spearman >= 0.8);
}
