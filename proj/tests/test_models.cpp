#include <doctest.h>

#include <cmath>
#include <numeric>

#include "support.hpp"
#include "xaudit/models.hpp"
#include "xaudit/tree.hpp"

using namespace xaudit;
using xaudit::testing::literal_dataset;
using xaudit::testing::mixed_spec;
using xaudit::testing::uniform_spec;

namespace {

/// y = 1[x > 0.5] on x = 0, 0.05, ..., 0.95.
Dataset threshold_data() {
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 20; ++i) {
        const double x = i * 0.05;
        rows.push_back({x});
        labels.push_back(x > 0.5 ? 1 : 0);
    }
    return literal_dataset(rows, labels);
}

/// Exhaustive oracle: the gini-optimal midpoint threshold on 1-D data.
double best_gini_threshold(const std::vector<double>& x, const std::vector<int>& y) {
    std::vector<double> values = x;
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    double best = -1.0, best_threshold = 0.0;
    auto gini = [](double pos, double n) { return n == 0 ? 0.0 : 2.0 * (pos / n) * (1.0 - pos / n); };
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double t = 0.5 * (values[k] + values[k + 1]);
        double nl = 0, pl = 0, nr = 0, pr = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] <= t) {
                ++nl;
                pl += y[i];
            } else {
                ++nr;
                pr += y[i];
            }
        }
        const double n = nl + nr;
        const double gain = n * gini(pl + pr, n) - nl * gini(pl, nl) - nr * gini(pr, nr);
        if (gain > best + 1e-12) {
            best = gain;
            best_threshold = t;
        }
    }
    return best_threshold;
}

LogisticModel zero_logistic(std::size_t d) {
    LogisticModel m;
    m.standardizer.means.assign(d, 0.0);
    m.standardizer.inv_scales.assign(d, 1.0);
    m.weights.assign(d, 0.0);
    return m;
}

MlpParams small_mlp(std::uint64_t seed) {
    MlpParams p;
    p.widths = {8, 6, 5, 4};
    p.epochs = 3;
    p.batch_size = 16;
    p.seed = seed;
    return p;
}

}  // namespace

TEST_CASE("logistic recovers generating weights") {
    const auto data = generate_synthetic(uniform_spec(10000, {2.0, -1.0}), 21).data;
    const auto model = train_logistic(data);
    CHECK(model.converged);
    const double sd = 1.0 / std::sqrt(12.0);  // Uniform(0, 1)
    CHECK(model.weights[0] == doctest::Approx(2.0 * sd).epsilon(0.10));
    CHECK(model.weights[1] == doctest::Approx(-1.0 * sd).epsilon(0.10));
}

TEST_CASE("logistic with weights (3, 0, 0) keeps the null weights near zero") {
    const auto data = generate_synthetic(uniform_spec(10000, {3.0, 0.0, 0.0}), 22).data;
    const auto model = train_logistic(data);
    CHECK(model.weights[0] > 0.0);
    CHECK(std::abs(model.weights[1]) < 0.1 * model.weights[0]);
    CHECK(std::abs(model.weights[2]) < 0.1 * model.weights[0]);
}

TEST_CASE("overlapping classes are not reported as separated") {
    const auto model = train_logistic(generate_synthetic(mixed_spec(400), 5).data);
    CHECK_FALSE(model.separated);
    CHECK_FALSE(model.separation_capped);
}

TEST_CASE("logistic optimizer sanity and errors") {
    const auto data = generate_synthetic(mixed_spec(800), 2).data;
    const auto model = train_logistic(data);
    std::vector<double> p, half(data.size(), 0.5);
    for (std::size_t i = 0; i < data.size(); ++i) p.push_back(model.predict_proba(data.rows().row(i)));
    CHECK(log_loss(p, data.labels()) < log_loss(half, data.labels()));

    const auto single = literal_dataset({{1.0}, {2.0}, {3.0}}, {1, 1, 1});
    try {
        train_logistic(single);
        FAIL("expected single class error");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("single class") != std::string::npos);
    }
}

TEST_CASE("logistic flags perfect separation and keeps the weight norm bounded") {
    LogisticParams params;
    params.l2 = 0.0;
    const auto model = train_logistic(threshold_data(), params);
    CHECK(model.separated);
    double norm = 0.0;
    for (double w : model.weights) norm += w * w;
    CHECK(std::sqrt(norm) <= params.max_weight_norm * (1 + 1e-9));
}

TEST_CASE("predict_proba basics") {
    const TrainedModel zero(zero_logistic(3), "h");
    const auto p = zero.predict_proba(Matrix::from_rows({{1, 2, 3}, {-5, 0, 9}}));
    CHECK(p == std::vector<double>{0.5, 0.5});
    CHECK_THROWS_AS(zero.predict_proba(Matrix(1, 2)), DataError);

    ForestModel forest;
    forest.n_features = 2;
    DecisionTree leaf;
    leaf.nodes.push_back(TreeNode{});
    leaf.nodes[0].value = 0.7;
    forest.trees.assign(3, leaf);
    const TrainedModel f(forest, "h");
    CHECK(f.predict_one(std::vector<double>{4.0, -1.0}) == doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("property: logistic output never decreases as a positively weighted feature grows") {
    Rng rng(5);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
        LogisticModel m = zero_logistic(3);
        for (double& w : m.weights) w = u(rng) - 1.5;
        m.weights[0] = u(rng) + 0.01;
        m.intercept = u(rng) - 1.5;
        std::vector<double> row{u(rng), u(rng), u(rng)};
        double prev = m.predict_proba(row);
        for (int step = 0; step < 20; ++step) {
            row[0] += 0.1;
            const double now = m.predict_proba(row);
            REQUIRE(now >= prev);
            prev = now;
        }
    }
}

TEST_CASE("outputs stay finite and inside (0, 1) for extreme inputs") {
    const auto data = generate_synthetic(mixed_spec(400), 3).data;
    std::vector<TrainedModel> models;
    models.emplace_back(train_logistic(data), "h");
    ForestParams fp;
    fp.n_trees = 10;
    models.emplace_back(train_random_forest(data, fp), "h");
    BoostingParams bp;
    bp.n_stages = 20;
    models.emplace_back(train_gradient_boosting(data, bp), "h");
    models.emplace_back(train_mlp(data, small_mlp(1)), "h");
    const Matrix extreme = Matrix::from_rows(
        {{1e12, -1e12, 1, 0, 0}, {-1e12, 1e12, 0, 1, 0}, {0, 0, 0, 0, 1}, {1e300, 1e300, 1, 0, 0}});
    for (const auto& m : models) {
        for (double p : m.predict_proba(extreme)) {
            CHECK(std::isfinite(p));
            CHECK(p > 0.0);
            CHECK(p < 1.0);
        }
    }
}

TEST_CASE("single gini stump finds the threshold") {
    const auto data = threshold_data();
    const auto oracle = best_gini_threshold(data.rows().column(0), data.labels());
    CHECK(oracle == doctest::Approx(0.525));

    ForestParams fp;
    fp.n_trees = 1;
    fp.max_depth = 1;
    fp.seed = 4;
    const auto forest = train_random_forest(data, fp);
    const auto& root = forest.trees[0].nodes[0];
    REQUIRE_FALSE(root.is_leaf());
    CHECK(std::abs(root.threshold - 0.5) <= 0.05 + 1e-12);

    // Without resampling the grower must agree with the exhaustive oracle.
    std::vector<double> target(data.labels().begin(), data.labels().end());
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng(1);
    const auto tree = grow_tree(data.rows(), target, all, {1, 1, 0}, SplitCriterion::Gini, rng);
    CHECK(tree.nodes[0].threshold == oracle);
}

TEST_CASE("one boosting stage with lr 1 and depth 1 splits where the gini stump does") {
    const auto data = threshold_data();
    BoostingParams bp;
    bp.n_stages = 1;
    bp.learning_rate = 1.0;
    bp.max_depth = 1;
    const auto boosted = train_gradient_boosting(data, bp);
    const double oracle = best_gini_threshold(data.rows().column(0), data.labels());
    REQUIRE_FALSE(boosted.stages[0].nodes[0].is_leaf());
    CHECK(boosted.stages[0].nodes[0].threshold == oracle);
}

TEST_CASE("random forest prediction is the mean of its trees") {
    const auto data = generate_synthetic(mixed_spec(300), 8).data;
    ForestParams fp;
    fp.n_trees = 15;
    fp.seed = 3;
    const auto forest = train_random_forest(data, fp);
    for (std::size_t i = 0; i < 10; ++i) {
        const auto row = data.rows().row(i * 7);
        double total = 0.0;
        for (const auto& t : forest.trees) total += t.predict(row);
        CHECK(forest.predict_proba(row) == doctest::Approx(total / 15.0).epsilon(1e-14));
    }
    for (const auto& t : forest.trees)
        for (const auto& node : t.nodes)
            if (!node.is_leaf()) CHECK(node.impurity_decrease > 0.0);

    fp.max_depth = 0;
    CHECK_THROWS_AS(train_random_forest(data, fp), ConfigError);
}

TEST_CASE("training is bit-identical for identical seeds") {
    const auto data = generate_synthetic(mixed_spec(300), 8).data;
    ForestParams fp;
    fp.n_trees = 8;
    fp.seed = 11;
    const TrainedModel a(train_random_forest(data, fp), "h"), b(train_random_forest(data, fp), "h");
    CHECK(a.predict_proba(data.rows()) == b.predict_proba(data.rows()));
    const TrainedModel m1(train_mlp(data, small_mlp(6)), "h"), m2(train_mlp(data, small_mlp(6)), "h");
    CHECK(m1.predict_proba(data.rows()) == m2.predict_proba(data.rows()));
    const TrainedModel g1(train_gradient_boosting(data), "h"), g2(train_gradient_boosting(data), "h");
    CHECK(g1.predict_proba(data.rows()) == g2.predict_proba(data.rows()));
}

TEST_CASE("ensembles hold their own against logistic on synthetic data") {
    const auto all = generate_synthetic(mixed_spec(3000), 12).data;
    const auto split = train_holdout_split(all, 0.2, 1);
    const double logit = evaluate_accuracy(TrainedModel(train_logistic(split.train), "h"), split.holdout).accuracy;
    ForestParams fp;
    fp.seed = 2;
    fp.n_trees = 200;
    const double rf = evaluate_accuracy(TrainedModel(train_random_forest(split.train, fp), "h"), split.holdout).accuracy;
    BoostingParams bp;
    bp.n_stages = 50;
    const auto boosted = train_gradient_boosting(split.train, bp);
    const double gb = evaluate_accuracy(TrainedModel(boosted, "h"), split.holdout).accuracy;
    MESSAGE("holdout accuracy logit " << logit << " rf " << rf << " gb " << gb);
    CHECK(rf >= logit - 0.05);
    CHECK(gb >= rf - 0.05);
    CHECK(boosted.training_loss.back() < boosted.training_loss.front());
}

TEST_CASE("evaluate_accuracy") {
    const auto data = literal_dataset({{0}, {1}, {0}, {1}, {0}, {1}, {0}, {1}, {0}, {1}},
                                      {0, 1, 0, 1, 0, 1, 0, 1, 0, 1});
    const FunctionModel perfect(1, [](std::span<const double> r) { return r[0] > 0.5 ? 0.9 : 0.1; });
    const auto c = evaluate_accuracy(perfect, data);
    CHECK(c.accuracy == 1.0);
    CHECK(c.false_good == 0);
    CHECK(c.false_bad == 0);
    CHECK(c.true_good == 5);

    const FunctionModel coin(1, [](std::span<const double>) { return 0.5; });
    const auto half = evaluate_accuracy(coin, data);
    CHECK(half.accuracy == 0.5);
    CHECK(half.true_good == 5);  // ties go to the positive class
    CHECK(half.false_good == 5);
}

TEST_CASE("MLP analytic gradients match central differences") {
    const auto data = generate_synthetic(mixed_spec(64), 31).data;
    MlpParams p = small_mlp(9);
    p.epochs = 2;
    const MlpModel trained = train_mlp(data, p);
    const Matrix z = trained.standardizer.apply(data.rows());

    for (NormMode mode : {NormMode::Running, NormMode::Batch}) {
        std::vector<double> grad;
        mlp_loss(trained, z, data.labels(), mode, &grad);
        REQUIRE(grad.size() == trained.params.size());
        Rng rng(mode == NormMode::Running ? 1 : 2);
        std::uniform_int_distribution<std::size_t> pick(0, grad.size() - 1);
        double worst = 0.0;
        for (int k = 0; k < 50; ++k) {
            const std::size_t i = pick(rng);
            MlpModel plus = trained, minus = trained;
            const double h = 1e-5 * std::max(1.0, std::abs(trained.params[i]));
            plus.params[i] += h;
            minus.params[i] -= h;
            const double numeric = (mlp_loss(plus, z, data.labels(), mode, nullptr) -
                                    mlp_loss(minus, z, data.labels(), mode, nullptr)) /
                                   (2.0 * h);
            const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
            worst = std::max(worst, std::abs(numeric - grad[i]) / scale);
        }
        MESSAGE("worst relative gradient error " << worst);
        CHECK(worst < 1e-4);
    }
}

TEST_CASE("untrained MLP predicts inside (0, 1)") {
    const auto data = generate_synthetic(mixed_spec(50), 1).data;
    MlpParams p;
    p.epochs = 0;
    const TrainedModel m(train_mlp(data, p), "h");
    for (double v : m.predict_proba(data.rows())) {
        CHECK(v > 0.05);
        CHECK(v < 0.95);
    }
    p.widths = {4, 4, 4};
    CHECK_THROWS_AS(train_mlp(data, p), ConfigError);
    p.widths = {4, 4, 4, 4};
    p.dropout_rate = 1.0;
    CHECK_THROWS_AS(train_mlp(data, p), ConfigError);
}

TEST_CASE("MLP learns XOR, which a linear model cannot") {
    Rng rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    for (int i = 0; i < 1000; ++i) {
        const double a = u(rng), b = u(rng);
        rows.push_back({a, b});
        labels.push_back((a > 0) != (b > 0) ? 1 : 0);
    }
    const auto data = literal_dataset(rows, labels);
    MlpParams p;
    p.widths = {32, 16, 8, 8};
    p.epochs = 60;
    p.batch_size = 32;
    p.learning_rate = 1e-2;
    p.dropout_rate = 0.0;
    p.seed = 4;
    const double mlp = evaluate_accuracy(TrainedModel(train_mlp(data, p), "h"), data).accuracy;
    const double logit = evaluate_accuracy(TrainedModel(train_logistic(data), "h"), data).accuracy;
    MESSAGE("xor train accuracy mlp " << mlp << " logit " << logit);
    CHECK(mlp >= 0.95);
    CHECK(logit < 0.6);
}

TEST_CASE("model kind names") {
    for (ModelKind k : kAllModelKinds) CHECK(parse_model_kind(to_string(k)) == k);
    CHECK(parse_model_kind("rf") == ModelKind::RandomForest);
    CHECK_THROWS_AS(parse_model_kind("svm"), ConfigError);
}

TEST_CASE("batch prediction of tree ensembles matches the per-row path bit for bit") {
    const auto data = generate_synthetic(mixed_spec(400), 17).data;
    ForestParams fp;
    fp.n_trees = 12;
    fp.seed = 5;
    const auto forest = train_random_forest(data, fp);
    BoostingParams bp;
    bp.n_stages = 15;
    const auto boosted = train_gradient_boosting(data, bp);
    const TrainedModel f(forest, "h"), g(boosted, "h");
    const auto pf = f.predict_proba(data.rows());
    const auto pg = g.predict_proba(data.rows());
    for (std::size_t i = 0; i < data.size(); ++i) {
        REQUIRE(pf[i] == forest.predict_proba(data.rows().row(i)));
        REQUIRE(pg[i] == boosted.predict_proba(data.rows().row(i)));
    }
}
