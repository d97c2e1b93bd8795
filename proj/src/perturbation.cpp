#include "xaudit/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "xaudit/parallel.hpp"

namespace xaudit {

namespace {

void check_grid(std::span<const double> grid, const char* what) {
    if (grid.empty()) throw ConfigError(std::string(what) + ": grid is empty");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!std::isfinite(grid[i])) throw ConfigError(std::string(what) + ": grid is not finite");
        if (i > 0 && !(grid[i] > grid[i - 1]))
            throw ConfigError(std::string(what) + ": grid must be strictly increasing");
    }
}

double mean_of(std::span<const double> v) {
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
}

}  // namespace

std::vector<double> default_continuous_grid() {
    // Multiples of 0.1 built as i / 10 so 1.0 is exact.
    std::vector<double> out;
    for (int i = 5; i <= 15; ++i) out.push_back(static_cast<double>(i) / 10.0);
    return out;
}

std::vector<double> default_categorical_grid() {
    std::vector<double> out;
    for (int i = 1; i <= 20; ++i) out.push_back(static_cast<double>(i) / 20.0);
    return out;
}

PerturbationCurve sweep_continuous(const ProbabilityModel& model, const Dataset& holdout,
                                   std::string_view feature, std::span<const double> multipliers,
                                   std::string model_name) {
    const auto& schema = holdout.schema();
    const std::size_t j = schema.require_index(feature);
    if (schema.feature(j).kind != FeatureKind::Continuous)
        throw ConfigError(std::string(feature) + " is categorical: use flip_categorical");
    check_grid(multipliers, "sweep_continuous");
    if (holdout.size() == 0) throw DataError("sweep_continuous: empty holdout");

    auto evaluate = [&](double m) {
        Matrix x = holdout.rows();
        for (std::size_t i = 0; i < x.rows(); ++i) x(i, j) *= m;
        return mean_of(model.predict_proba(x));
    };

    PerturbationCurve curve;
    curve.feature = std::string(feature);
    curve.grid.assign(multipliers.begin(), multipliers.end());
    curve.model = std::move(model_name);
    curve.base_value = evaluate(1.0);
    curve.values.resize(curve.grid.size());
    parallel_for(curve.grid.size(), [&](std::size_t g) { curve.values[g] = evaluate(curve.grid[g]); });
    return curve;
}

void apply_flip(Matrix& x, const CategoricalGroup& group, std::size_t level_index,
                std::span<const std::size_t> rows) {
    if (level_index >= group.columns.size())
        throw std::out_of_range("apply_flip: level index out of range");
    for (std::size_t i : rows) {
        for (std::size_t c : group.columns) x(i, c) = 0.0;
        x(i, group.columns[level_index]) = 1.0;
    }
}

PerturbationCurve flip_categorical(const ProbabilityModel& model, const Dataset& holdout,
                                   std::string_view group_name, std::string_view level,
                                   std::span<const double> proportions, std::size_t repeats,
                                   std::uint64_t seed, std::string model_name) {
    const auto& schema = holdout.schema();
    if (!schema.has_group(group_name))
        throw ConfigError("flip_categorical: unknown group " + std::string(group_name));
    const CategoricalGroup& group = schema.group(group_name);
    const auto level_it = std::find(group.levels.begin(), group.levels.end(), level);
    if (level_it == group.levels.end())
        throw ConfigError("flip_categorical: " + std::string(level) + " is not a level of " +
                          group.name);
    const auto level_index = static_cast<std::size_t>(level_it - group.levels.begin());
    const std::size_t column = group.columns[level_index];
    check_grid(proportions, "flip_categorical");
    if (proportions.front() < 0.0 || proportions.back() > 1.0)
        throw ConfigError("flip_categorical: proportions must lie in [0, 1]");
    if (repeats == 0) throw ConfigError("flip_categorical: repeats must be >= 1");

    const Matrix& x = holdout.rows();
    std::vector<std::size_t> zero_rows;
    std::size_t n1 = 0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (x(i, column) == 1.0)
            ++n1;
        else
            zero_rows.push_back(i);
    }
    if (n1 == 0)
        throw DataError("level absent from holdout: " + level_column_name(group.name, level));

    // Predictions are row-wise, so each draw is a mixture of the unperturbed
    // and the fully flipped prediction of every row.
    const std::vector<double> base = model.predict_proba(x);
    Matrix flipped_x = x;
    apply_flip(flipped_x, group, level_index, zero_rows);
    const std::vector<double> flipped = model.predict_proba(flipped_x);
    const double n = static_cast<double>(x.rows());
    const double base_total = std::accumulate(base.begin(), base.end(), 0.0);

    PerturbationCurve curve;
    curve.feature = level_column_name(group.name, level);
    curve.group = group.name;
    curve.level = std::string(level);
    curve.categorical = true;
    curve.grid.assign(proportions.begin(), proportions.end());
    curve.model = std::move(model_name);
    curve.base_value = base_total / n;
    curve.values.resize(curve.grid.size());

    std::vector<std::size_t> counts(curve.grid.size());
    for (std::size_t g = 0; g < curve.grid.size(); ++g) {
        const double wanted = std::ceil(curve.grid[g] * static_cast<double>(n1) - 1e-9);
        counts[g] = static_cast<std::size_t>(std::max(0.0, wanted));
        if (counts[g] > zero_rows.size()) {
            curve.warnings.push_back("proportion " + std::to_string(curve.grid[g]) + " needs " +
                                     std::to_string(counts[g]) + " rows but only " +
                                     std::to_string(zero_rows.size()) + " are available; clamped");
            counts[g] = zero_rows.size();
        }
    }

    parallel_for(curve.grid.size(), [&](std::size_t g) {
        if (counts[g] == 0) {
            curve.values[g] = curve.base_value;
            return;
        }
        double total = 0.0;
        for (std::size_t r = 0; r < repeats; ++r) {
            Rng rng(derive_seed(seed, g, r));
            const auto picked = sample_without_replacement(zero_rows, counts[g], rng);
            double shift = 0.0;
            for (std::size_t i : picked) shift += flipped[i] - base[i];
            total += (base_total + shift) / n;
        }
        curve.values[g] = total / static_cast<double>(repeats);
    });
    return curve;
}

SensitivityScore sensitivity_score(const PerturbationCurve& curve, double tolerance) {
    if (curve.values.size() != curve.grid.size())
        throw DataError("sensitivity_score: grid and values differ in length");
    SensitivityScore out;
    out.feature = curve.feature;
    if (curve.values.empty()) return out;
    const auto [lo, hi] = std::minmax_element(curve.values.begin(), curve.values.end());
    out.score = *hi - *lo;
    int direction = 0;
    for (std::size_t i = 0; i + 1 < curve.values.size(); ++i) {
        const double step = curve.values[i + 1] - curve.values[i];
        if (std::abs(step) <= tolerance) continue;
        const int now = step > 0.0 ? 1 : -1;
        if (direction != 0 && now != direction) {
            out.monotone = false;
            out.reversal_points.push_back(curve.grid[i + 1]);
        }
        direction = now;
    }
    return out;
}

DynamicResult dynamic_importance(const ProbabilityModel& model, const Dataset& holdout,
                                 std::span<const std::string> features,
                                 const PerturbationConfig& config, std::string model_name) {
    if (features.empty()) throw ConfigError("dynamic importance: no features to perturb");
    const auto& schema = holdout.schema();
    DynamicResult result;
    std::vector<std::string> names;
    std::vector<double> scores;
    for (std::size_t f = 0; f < features.size(); ++f) {
        const FeatureSpec& spec = schema.feature(schema.require_index(features[f]));
        PerturbationCurve curve =
            spec.kind == FeatureKind::Continuous
                ? sweep_continuous(model, holdout, spec.name, config.continuous_grid, model_name)
                : flip_categorical(model, holdout, spec.group, spec.level, config.categorical_grid,
                                   config.repeats, derive_seed(config.seed, spec.name), model_name);
        SensitivityScore score = sensitivity_score(curve, config.reversal_tolerance);
        names.push_back(spec.name);
        scores.push_back(score.score);
        result.curves.push_back(std::move(curve));
        result.scores.push_back(std::move(score));
    }
    result.ranking = ImportanceRanking::from_scores(names, scores, "dynamic", std::move(model_name));
    return result;
}

}  // namespace xaudit
