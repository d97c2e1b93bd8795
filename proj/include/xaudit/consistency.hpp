#pragma once

#include <span>
#include <string>
#include <vector>

#include "xaudit/dataset.hpp"
#include "xaudit/perturbation.hpp"
#include "xaudit/ranking.hpp"

namespace xaudit {

/// Spearman rho over the features both rankings contain. Tied scores get
/// their average rank; if either side has no rank variance the result is 0.
double spearman_rank_correlation(const ImportanceRanking& a, const ImportanceRanking& b);

/// Jaccard index of the two top-k feature sets.
double top_k_overlap(const ImportanceRanking& a, const ImportanceRanking& b, std::size_t k);

inline constexpr const char* kFlatFlag = "static-important, dynamically flat";
inline constexpr const char* kReversalFlag = "static-important, sign reversal";

struct ConsistencyConfig {
    std::size_t k = 10;
    double flatness_threshold = 0.01;
    double consistent_rho = 0.8;  // verdict thresholds
    double partial_rho = 0.4;
};

struct FeatureComparison {
    std::string feature;
    std::size_t static_rank = 0;  // 1-based, within the compared set
    std::size_t dynamic_rank = 0;
    double static_score = 0.0;
    double sensitivity = 0.0;
    bool monotone = true;
    std::vector<double> reversal_points;
    std::vector<std::string> flags;
};

/// One (model, static technique) comparison against that model's dynamic
/// ranking.
struct ConsistencyBlock {
    std::string model;
    std::string technique;
    std::vector<std::string> compared;  // dynamic order
    double spearman = 0.0;
    std::size_t k = 0;  // effective: min(config k, compared size)
    double top_k_overlap = 0.0;
    std::vector<FeatureComparison> features;
    std::string verdict;
    std::size_t flag_count() const;
};

struct ConsistencyReport {
    ConsistencyConfig config;
    std::vector<ConsistencyBlock> blocks;
    std::vector<std::string> skipped;  // comparisons with < 3 shared features
    std::vector<std::string> verdicts;  // one line per model
};

/// Static rankings are matched to the dynamic result of the same model.
/// Player-level entries (a whole one-hot group) stand in for every level of
/// that group that was perturbed. Each static ranking is then restricted to
/// the perturbed feature set before any metric is computed.
ConsistencyReport build_consistency_report(std::span<const ImportanceRanking> static_rankings,
                                           std::span<const DynamicResult> dynamic,
                                           const FeatureSchema& schema,
                                           const ConsistencyConfig& config = {});

std::string consistency_markdown(const ConsistencyReport& report);

}  // namespace xaudit
