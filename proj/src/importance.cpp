#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaudit/explainers.hpp"

namespace xaudit {

std::vector<double> impurity_scores(std::span<const DecisionTree> trees, std::size_t n_features) {
    std::vector<double> total(n_features, 0.0);
    if (trees.empty()) return total;
    for (const auto& tree : trees) {
        const double root = tree.nodes.empty() ? 0.0 : tree.nodes[0].n_samples;
        if (root <= 0.0) continue;
        for (const auto& node : tree.nodes)
            if (!node.is_leaf())
                total.at(static_cast<std::size_t>(node.feature)) += node.impurity_decrease / root;
    }
    for (double& v : total) v /= static_cast<double>(trees.size());
    const double sum = std::accumulate(total.begin(), total.end(), 0.0);
    if (sum > 0.0)
        for (double& v : total) v /= sum;
    return total;
}

ImportanceRanking impurity_importance(const TrainedModel& model, const FeatureSchema& schema) {
    std::vector<double> scores;
    if (const auto* forest = model.as<ForestModel>())
        scores = impurity_scores(forest->trees, schema.n_features());
    else if (const auto* boosted = model.as<BoostedModel>())
        scores = impurity_scores(boosted->stages, schema.n_features());
    else
        throw ConfigError("impurity importance requires trees");
    const auto names = schema.names();
    return ImportanceRanking::from_scores(names, scores, "impurity", std::string(to_string(model.kind())));
}

namespace {

double accuracy_of(const ProbabilityModel& model, const Matrix& rows, std::span<const int> labels) {
    const auto p = model.predict_proba(rows);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.size(); ++i) correct += (p[i] >= 0.5 ? 1 : 0) == labels[i];
    return static_cast<double>(correct) / static_cast<double>(p.size());
}

}  // namespace

ImportanceRanking permutation_importance(const ProbabilityModel& model, const Dataset& data,
                                         std::size_t repeats, std::uint64_t seed,
                                         std::string model_name) {
    if (repeats == 0) throw ConfigError("permutation importance: repeats must be >= 1");
    if (data.size() == 0) throw DataError("permutation importance: empty dataset");
    const auto players = data.schema().players();
    const Matrix& rows = data.rows();
    const double baseline = accuracy_of(model, rows, data.labels());

    std::vector<std::size_t> identity(data.size());
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    std::vector<std::string> names;
    std::vector<double> scores;
    for (std::size_t p = 0; p < players.size(); ++p) {
        double drop = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            Rng rng(derive_seed(seed, p, r));
            const auto perm = sample_without_replacement(identity, identity.size(), rng);
            Matrix shuffled = rows;
            for (std::size_t i = 0; i < rows.rows(); ++i)
                for (std::size_t c : players[p].columns) shuffled(i, c) = rows(perm[i], c);
            drop += baseline - accuracy_of(model, shuffled, data.labels());
        }
        names.push_back(players[p].name);
        scores.push_back(drop / static_cast<double>(repeats));
    }
    return ImportanceRanking::from_scores(names, scores, "permutation", std::move(model_name));
}

ImportanceRanking global_importance_from_attributions(std::span<const Attribution> attributions,
                                                      std::string technique,
                                                      std::string model_name) {
    if (attributions.empty()) throw DataError("global importance: no attributions");
    const auto& names = attributions.front().names;
    std::vector<double> scores(names.size(), 0.0);
    for (const auto& a : attributions) {
        if (a.values.size() != names.size() || a.names != names)
            throw DataError("global importance: attributions have heterogeneous feature spaces");
        for (std::size_t j = 0; j < names.size(); ++j) scores[j] += std::abs(a.values[j]);
    }
    return ImportanceRanking::from_scores(names, scores, std::move(technique), std::move(model_name));
}

ImportanceRanking logit_coefficient_importance(const TrainedModel& model,
                                               const FeatureSchema& schema) {
    const auto* logit = model.as<LogisticModel>();
    if (!logit) throw ConfigError("coefficient importance requires a logistic model");
    if (logit->weights.size() != schema.n_features())
        throw DataError("coefficient importance: schema width does not match model");
    std::vector<double> scores(logit->weights.size());
    for (std::size_t j = 0; j < scores.size(); ++j) scores[j] = std::abs(logit->weights[j]);
    const auto names = schema.names();
    return ImportanceRanking::from_scores(names, scores, "logit_coefficient", "logistic");
}

}  // namespace xaudit
