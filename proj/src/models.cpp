#include "xaudit/models.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaudit/parallel.hpp"

namespace xaudit {

double ProbabilityModel::predict_one(std::span<const double> row) const {
    Matrix m(1, row.size());
    std::copy(row.begin(), row.end(), m.row(0).begin());
    return predict_proba(m)[0];
}

void ProbabilityModel::check_width(const Matrix& rows) const {
    if (rows.rows() > 0 && rows.cols() != n_features())
        throw DataError("row width " + std::to_string(rows.cols()) + " does not match model width " +
                        std::to_string(n_features()));
}

std::vector<double> FunctionModel::predict_proba(const Matrix& rows) const {
    check_width(rows);
    std::vector<double> out(rows.rows());
    for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = fn_(rows.row(i));
    return out;
}

// ---------------------------------------------------------------------------

Standardizer Standardizer::fit(const Matrix& rows) {
    Standardizer s;
    const std::size_t d = rows.cols();
    s.means.assign(d, 0.0);
    s.inv_scales.assign(d, 0.0);
    const double n = static_cast<double>(rows.rows());
    if (rows.rows() == 0) return s;
    for (std::size_t i = 0; i < rows.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) s.means[j] += rows(i, j);
    for (double& m : s.means) m /= n;
    std::vector<double> var(d, 0.0);
    for (std::size_t i = 0; i < rows.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double c = rows(i, j) - s.means[j];
            var[j] += c * c;
        }
    for (std::size_t j = 0; j < d; ++j) {
        const double sd = std::sqrt(var[j] / n);
        s.inv_scales[j] = sd > 1e-12 * std::max(1.0, std::abs(s.means[j])) ? 1.0 / sd : 0.0;
    }
    return s;
}

void Standardizer::apply(std::span<const double> row, std::span<double> out) const {
    for (std::size_t j = 0; j < means.size(); ++j) out[j] = (row[j] - means[j]) * inv_scales[j];
}

Matrix Standardizer::apply(const Matrix& rows) const {
    Matrix out(rows.rows(), rows.cols());
    for (std::size_t i = 0; i < rows.rows(); ++i) apply(rows.row(i), out.row(i));
    return out;
}

// ---------------------------------------------------------------------------
// Logistic regression: damped Newton on the L2-penalized mean log-likelihood.

double LogisticModel::decision(std::span<const double> row) const {
    double z = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j)
        z += weights[j] * ((row[j] - standardizer.means[j]) * standardizer.inv_scales[j]);
    return z;
}

double log_loss(std::span<const double> probabilities, std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double p = std::clamp(probabilities[i], 1e-15, 1.0 - 1e-15);
        total -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
    }
    return labels.empty() ? 0.0 : total / static_cast<double>(labels.size());
}

namespace {

void require_two_classes(const Dataset& train) {
    if (train.size() == 0) throw DataError("training set is empty");
    const auto counts = train.class_counts();
    if (counts[0] == 0 || counts[1] == 0) throw DataError("single class in training labels");
}

// Mean log-loss from logits, numerically stable.
double logit_loss(const Eigen::VectorXd& z, const Eigen::VectorXd& y) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double zi = z[i];
        const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
        total += softplus - y[i] * zi;
    }
    return total / static_cast<double>(z.size());
}

}  // namespace

LogisticModel train_logistic(const Dataset& train, const LogisticParams& params) {
    require_two_classes(train);
    if (params.l2 < 0) throw ConfigError("logistic: l2 must be >= 0");

    LogisticModel model;
    model.standardizer = Standardizer::fit(train.rows());
    const Matrix z = model.standardizer.apply(train.rows());
    const auto n = static_cast<Eigen::Index>(z.rows());
    const auto d = static_cast<Eigen::Index>(z.cols());

    // Design matrix with the intercept as the last column.
    Eigen::MatrixXd a(n, d + 1);
    Eigen::VectorXd y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) a(i, j) = z(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        a(i, d) = 1.0;
        y[i] = train.labels()[static_cast<std::size_t>(i)];
    }
    Eigen::VectorXd penalty = Eigen::VectorXd::Constant(d + 1, params.l2);
    penalty[d] = 0.0;

    auto objective = [&](const Eigen::VectorXd& beta) {
        return logit_loss(a * beta, y) + 0.5 * (penalty.array() * beta.array().square()).sum();
    };

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(d + 1);
    double current = objective(beta);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (model.iterations = 0; model.iterations < params.max_iters; ++model.iterations) {
        const Eigen::VectorXd eta = a * beta;
        Eigen::VectorXd p(n), h(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            p[i] = sigmoid(eta[i]);
            h[i] = p[i] * (1.0 - p[i]);
        }
        const Eigen::VectorXd grad =
            inv_n * (a.transpose() * (p - y)) + (penalty.array() * beta.array()).matrix();
        model.gradient_norm = grad.norm();
        if (model.gradient_norm < params.tol) {
            model.converged = true;
            break;
        }
        Eigen::MatrixXd hess = inv_n * (a.transpose() * h.asDiagonal() * a);
        hess.diagonal() += penalty;
        hess.diagonal().array() += 1e-10;
        const Eigen::VectorXd step = hess.ldlt().solve(grad);
        if (!step.allFinite()) throw NumericError("logistic: Newton step is not finite");

        double t = 1.0;
        Eigen::VectorXd candidate = beta - step;
        double next = objective(candidate);
        while (!(next <= current) && t > 1e-10) {
            t *= 0.5;
            candidate = beta - t * step;
            next = objective(candidate);
        }
        if (!(next <= current)) {
            model.converged = true;  // no further descent possible at double precision
            break;
        }
        beta = candidate;
        current = next;

        const double wnorm = beta.head(d).norm();
        if (wnorm > params.max_weight_norm) {
            // Perfectly separable data: the unpenalized optimum is at infinity.
            beta.head(d) *= params.max_weight_norm / wnorm;
            model.separation_capped = true;
            break;
        }
    }
    if (!std::isfinite(current)) throw NumericError("logistic: non-finite loss");

    // Every training row strictly on its own side: the data are separable.
    const Eigen::VectorXd eta = a * beta;
    model.separated = beta.head(d).norm() > 0.0;
    for (Eigen::Index i = 0; i < n && model.separated; ++i)
        if ((y[i] > 0.5 ? eta[i] : -eta[i]) <= 0.0) model.separated = false;

    model.weights.assign(beta.data(), beta.data() + d);
    model.intercept = beta[d];
    return model;
}

// ---------------------------------------------------------------------------
// Random forest

double ForestModel::predict_proba(std::span<const double> row) const {
    double total = 0.0;
    for (const auto& t : trees) total += t.predict(row);
    return std::clamp(total / static_cast<double>(trees.size()), 1e-15, 1.0 - 1e-15);
}

ForestModel train_random_forest(const Dataset& train, const ForestParams& params) {
    require_two_classes(train);
    if (params.n_trees == 0) throw ConfigError("random forest: n_trees must be >= 1");
    if (params.max_depth == 0) throw ConfigError("random forest: max_depth must be >= 1");

    ForestModel model;
    model.n_features = train.n_features();
    model.params = params;
    const std::size_t per_split =
        params.features_per_split > 0
            ? params.features_per_split
            : std::max<std::size_t>(
                  1, static_cast<std::size_t>(std::sqrt(static_cast<double>(model.n_features))));
    const TreeParams tree_params{params.max_depth, params.min_samples_leaf, per_split};

    std::vector<double> target(train.labels().begin(), train.labels().end());
    const std::size_t n = train.size();
    model.trees.resize(params.n_trees);
    model.tree_seeds.resize(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t)
        model.tree_seeds[t] = derive_seed(params.seed, static_cast<std::uint64_t>(t));

    parallel_for(params.n_trees, [&](std::size_t t) {
        Rng rng(model.tree_seeds[t]);
        std::uniform_int_distribution<std::size_t> draw(0, n - 1);
        std::vector<std::size_t> bootstrap(n);
        for (auto& i : bootstrap) i = draw(rng);
        model.trees[t] =
            grow_tree(train.rows(), target, std::move(bootstrap), tree_params, SplitCriterion::Gini, rng);
    });
    return model;
}

// ---------------------------------------------------------------------------
// Gradient boosting on log-loss

double BoostedModel::score(std::span<const double> row) const {
    double total = 0.0;
    for (const auto& t : stages) total += t.predict(row);
    return initial_score + learning_rate * total;
}

BoostedModel train_gradient_boosting(const Dataset& train, const BoostingParams& params) {
    require_two_classes(train);
    if (params.n_stages == 0) throw ConfigError("gradient boosting: n_stages must be >= 1");
    if (!(params.learning_rate > 0.0 && params.learning_rate <= 1.0))
        throw ConfigError("gradient boosting: learning_rate must lie in (0, 1]");
    if (params.max_depth == 0) throw ConfigError("gradient boosting: max_depth must be >= 1");

    const std::size_t n = train.size();
    const auto& labels = train.labels();
    const double base_rate =
        static_cast<double>(train.class_counts()[1]) / static_cast<double>(n);

    BoostedModel model;
    model.n_features = train.n_features();
    model.learning_rate = params.learning_rate;
    model.initial_score = std::log(base_rate / (1.0 - base_rate));

    std::vector<double> score(n, model.initial_score);
    std::vector<double> prob(n), residual(n), hessian(n);
    auto refresh = [&] {
        for (std::size_t i = 0; i < n; ++i) {
            prob[i] = sigmoid(score[i]);
            residual[i] = labels[i] - prob[i];
            hessian[i] = prob[i] * (1.0 - prob[i]);
        }
        return log_loss(prob, labels);
    };
    model.training_loss.push_back(refresh());

    const TreeParams tree_params{params.max_depth, params.min_samples_leaf, 0};
    const LeafValueFn newton_leaf = [&](std::span<const std::size_t> samples) {
        double g = 0.0, h = 0.0;
        for (std::size_t i : samples) {
            g += residual[i];
            h += hessian[i];
        }
        return g / (h + params.leaf_ridge);
    };
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    Rng rng(params.seed);

    for (std::size_t stage = 0; stage < params.n_stages; ++stage) {
        DecisionTree tree =
            grow_tree(train.rows(), residual, all, tree_params, SplitCriterion::Mse, rng, newton_leaf);
        for (std::size_t i = 0; i < n; ++i)
            score[i] += params.learning_rate * tree.predict(train.rows().row(i));
        model.stages.push_back(std::move(tree));
        const double loss = refresh();
        if (!std::isfinite(loss))
            throw NumericError("gradient boosting: non-finite loss at stage " + std::to_string(stage + 1));
        model.training_loss.push_back(loss);
    }
    return model;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::Logistic: return "logistic";
        case ModelKind::RandomForest: return "random_forest";
        case ModelKind::GradientBoosting: return "gradient_boosting";
        case ModelKind::Mlp: return "mlp";
    }
    return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
    for (ModelKind k : kAllModelKinds)
        if (to_string(k) == name) return k;
    if (name == "logit") return ModelKind::Logistic;
    if (name == "rf") return ModelKind::RandomForest;
    if (name == "gbc" || name == "gbm") return ModelKind::GradientBoosting;
    throw ConfigError("unknown model kind: " + std::string(name));
}

TrainedModel::TrainedModel(Variant model, std::string schema_hash)
    : model_(std::move(model)), schema_hash_(std::move(schema_hash)) {
    const std::vector<DecisionTree>* trees = nullptr;
    if (const auto* rf = as<ForestModel>()) trees = &rf->trees;
    if (const auto* gb = as<BoostedModel>()) trees = &gb->stages;
    if (trees)
        for (const auto& t : *trees) compact_.emplace_back(t);
}

ModelKind TrainedModel::kind() const {
    return static_cast<ModelKind>(model_.index());
}

std::size_t TrainedModel::n_features() const {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) return m.standardizer.size();
            else if constexpr (std::is_same_v<T, MlpModel>) return m.n_inputs();
            else return m.n_features;
        },
        model_);
}

std::vector<double> TrainedModel::predict_proba(const Matrix& rows) const {
    check_width(rows);
    if (const auto* mlp = as<MlpModel>()) return mlp->predict_proba(rows);
    const std::size_t n = rows.rows();
    if (const auto* lr = as<LogisticModel>()) {
        std::vector<double> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = lr->predict_proba(rows.row(i));
        return out;
    }
    // Tree ensembles: tree-major traversal keeps one tree hot in cache. Each
    // row still accumulates trees in index order, matching the per-row path.
    std::vector<double> total(n, 0.0);
    for (const auto& t : compact_)
        for (std::size_t i = 0; i < n; ++i) total[i] += t.predict(rows.row(i));
    if (const auto* rf = as<ForestModel>()) {
        const double count = static_cast<double>(rf->trees.size());
        for (double& v : total) v = std::clamp(v / count, 1e-15, 1.0 - 1e-15);
    } else {
        const auto& gb = std::get<BoostedModel>(model_);
        for (double& v : total) v = sigmoid(gb.initial_score + gb.learning_rate * v);
    }
    return total;
}

Confusion evaluate_accuracy(const ProbabilityModel& model, const Dataset& holdout) {
    if (holdout.size() == 0) throw DataError("evaluate_accuracy: empty holdout");
    const auto p = model.predict_proba(holdout.rows());
    Confusion c;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool predicted_good = p[i] >= 0.5;
        const bool good = holdout.labels()[i] == 1;
        if (predicted_good && good) ++c.true_good;
        else if (!predicted_good && !good) ++c.true_bad;
        else if (predicted_good) ++c.false_good;
        else ++c.false_bad;
    }
    c.accuracy = static_cast<double>(c.true_good + c.true_bad) / static_cast<double>(p.size());
    return c;
}

}  // namespace xaudit
