#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/models.hpp"
#include "xaudit/ranking.hpp"

namespace xaudit {

/// Signed per-feature (or per-player) contributions for one instance.
struct Attribution {
    std::string instance_id;
    std::vector<std::string> names;
    std::vector<double> values;
    double base_value = 0.0;
    double prediction = 0.0;  // model output at the instance
    std::string technique;
};

// ---------------------------------------------------------------------------
// Tree impurity (mean decrease in impurity)

/// Per column: sum over split nodes of impurity decrease / root sample
/// count, averaged over trees, then normalized to sum 1 (all zeros when the
/// model never splits).
std::vector<double> impurity_scores(std::span<const DecisionTree> trees, std::size_t n_features);

ImportanceRanking impurity_importance(const TrainedModel& model, const FeatureSchema& schema);

// ---------------------------------------------------------------------------
// Permutation (mean decrease accuracy)

/// One score per player: baseline accuracy minus mean accuracy with that
/// player's columns permuted across rows. One-hot groups move as a block.
ImportanceRanking permutation_importance(const ProbabilityModel& model, const Dataset& data,
                                         std::size_t repeats, std::uint64_t seed,
                                         std::string model_name = {});

// ---------------------------------------------------------------------------
// LIME

struct LimeStats {
    std::vector<double> means;
    std::vector<double> sds;  // population sd; 0 for constant columns
    std::vector<std::vector<double>> level_frequencies;  // per schema group

    static LimeStats fit(const Dataset& train);
};

struct LimeParams {
    std::size_t n_samples = 2000;
    double kernel_width = 0.0;  // 0: 0.75 * sqrt(n_features)
    double ridge = 1e-3;
    std::uint64_t seed = 0;
};

/// Local weighted ridge surrogate. values[j] is the coefficient of
/// standardized column j; base_value is the kernel-weighted mean output.
Attribution lime_explain(const ProbabilityModel& model, const FeatureSchema& schema,
                         std::span<const double> instance, const LimeStats& stats,
                         const LimeParams& params, std::string instance_id = {});

// ---------------------------------------------------------------------------
// Shapley values. The game: v(S) = mean over background rows of the model
// output with players in S taken from the instance and the rest from the
// background row.

inline constexpr std::size_t kMaxExactPlayers = 12;

Attribution exact_shapley(const ProbabilityModel& model, const FeatureSchema& schema,
                          std::span<const double> instance, const Matrix& background,
                          std::string instance_id = {});

struct KernelShapParams {
    std::size_t n_coalitions = 2048;  // 0: enumerate every coalition
    std::uint64_t seed = 0;
};

/// Shapley-kernel weighted least squares with the efficiency constraint
/// sum(values) = f(x) - v(empty) imposed exactly.
Attribution kernel_shap(const ProbabilityModel& model, const FeatureSchema& schema,
                        std::span<const double> instance, const Matrix& background,
                        const KernelShapParams& params, std::string instance_id = {});

/// score_j = sum over attributions of |value_j|.
ImportanceRanking global_importance_from_attributions(std::span<const Attribution> attributions,
                                                      std::string technique = "shap",
                                                      std::string model_name = {});

/// |standardized weight| per column; one-hot levels reported per level.
ImportanceRanking logit_coefficient_importance(const TrainedModel& model,
                                               const FeatureSchema& schema);

// ---------------------------------------------------------------------------
// Global attribution mapping (GAM)

enum class GamMode { Unsupervised, LabelForced };

struct GamCluster {
    std::vector<double> medoid;  // normalized attribution of the medoid
    std::string medoid_id;
    double proportion = 0.0;
    std::vector<std::string> members;
};

struct GamResult {
    std::vector<std::string> names;
    std::vector<GamCluster> clusters;
    std::size_t k = 0;
    GamMode mode = GamMode::Unsupervised;
    std::vector<double> objective_history;  // total within-cluster distance after each assignment
};

/// |phi_j| / sum |phi|; uniform when every contribution is zero.
std::vector<double> normalize_attribution(std::span<const double> values);

/// Rank-weighted distance between two normalized attributions:
///   d(a, b) = sum_j max(a_j, b_j) * (rank_a(j) - rank_b(j))^2
/// where rank is the 0-based position in descending order (ties by index).
double gam_distance(std::span<const double> a, std::span<const double> b);

/// K-medoids over normalized attributions: farthest-first initialization
/// from the most central point, then alternating assignment and
/// first-improvement medoid swaps (candidate order drawn from `seed`).
GamResult gam_cluster(std::span<const Attribution> attributions, std::size_t k,
                      std::size_t max_iters = 100, std::uint64_t seed = 0);

struct LabelGam {
    ImportanceRanking good;  // GoodLoan subpopulation (label 1)
    ImportanceRanking bad;   // BadLoan subpopulation (label 0)
    GamResult result;        // mode LabelForced, clusters = [good, bad]
};

/// Per class mean normalized attribution. subsample_per_class = 0 keeps all.
LabelGam gam_by_label(std::span<const Attribution> attributions, std::span<const int> labels,
                      std::size_t subsample_per_class = 0, std::uint64_t seed = 0,
                      std::string model_name = {});

}  // namespace xaudit
