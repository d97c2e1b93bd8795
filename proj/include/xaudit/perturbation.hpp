#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/models.hpp"
#include "xaudit/ranking.hpp"

namespace xaudit {

/// Mean P(good) over a holdout as one feature is perturbed.
struct PerturbationCurve {
    std::string feature;  // continuous column, or the level column "group=level"
    std::string group;    // empty for continuous
    std::string level;
    bool categorical = false;
    std::vector<double> grid;    // multipliers, or flip proportions
    std::vector<double> values;  // parallel to grid
    double base_value = 0.0;
    std::string model;
    std::vector<std::string> warnings;

    bool operator==(const PerturbationCurve&) const = default;
};

struct SensitivityScore {
    std::string feature;
    double score = 0.0;  // max(values) - min(values)
    bool monotone = true;
    std::vector<double> reversal_points;

    bool operator==(const SensitivityScore&) const = default;
};

inline constexpr double kDefaultReversalTolerance = 0.005;
inline constexpr std::size_t kDefaultFlipRepeats = 25;

/// 0.5, 0.6, ..., 1.5
std::vector<double> default_continuous_grid();
/// 0.05, 0.10, ..., 1.0
std::vector<double> default_categorical_grid();

/// Scales the feature by each multiplier on a copy of the holdout. The base
/// is evaluated through the same path, so a multiplier of 1 reproduces it.
PerturbationCurve sweep_continuous(const ProbabilityModel& model, const Dataset& holdout,
                                   std::string_view feature, std::span<const double> multipliers,
                                   std::string model_name = {});

/// Sets `level` on `rows` and clears the group's other columns.
void apply_flip(Matrix& x, const CategoricalGroup& group, std::size_t level_index,
                std::span<const std::size_t> rows);

/// For proportion p, ceil(p * n1) rows currently off `level` are switched
/// onto it (n1 = rows already on it), averaged over `repeats` random draws.
/// Draw (p index, repeat) uses its own stream derived from `seed`.
PerturbationCurve flip_categorical(const ProbabilityModel& model, const Dataset& holdout,
                                   std::string_view group, std::string_view level,
                                   std::span<const double> proportions, std::size_t repeats,
                                   std::uint64_t seed, std::string model_name = {});

SensitivityScore sensitivity_score(const PerturbationCurve& curve,
                                   double tolerance = kDefaultReversalTolerance);

struct PerturbationConfig {
    std::vector<double> continuous_grid = default_continuous_grid();
    std::vector<double> categorical_grid = default_categorical_grid();
    std::size_t repeats = kDefaultFlipRepeats;
    double reversal_tolerance = kDefaultReversalTolerance;
    std::uint64_t seed = 0;
};

struct DynamicResult {
    ImportanceRanking ranking;  // technique "dynamic"
    std::vector<PerturbationCurve> curves;
    std::vector<SensitivityScore> scores;
};

/// `features` are column names: continuous columns are swept, level columns
/// ("group=level") are flipped. Ranked by sensitivity score.
DynamicResult dynamic_importance(const ProbabilityModel& model, const Dataset& holdout,
                                 std::span<const std::string> features,
                                 const PerturbationConfig& config, std::string model_name = {});

}  // namespace xaudit
