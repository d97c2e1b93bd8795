#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xaudit {

struct RankingEntry {
    std::string feature;
    double score = 0.0;  // nonnegative, used for ordering
    double raw = 0.0;    // technique output before flooring (equal to score for most)

    bool operator==(const RankingEntry&) const = default;
};

/// Features ordered by descending score; equal scores fall back to
/// lexicographic feature name so the order is fully deterministic.
struct ImportanceRanking {
    std::vector<RankingEntry> entries;
    std::string technique;
    std::string model;

    /// Scores below zero are floored for ordering; the raw value is kept.
    static ImportanceRanking from_scores(std::span<const std::string> names,
                                         std::span<const double> raw_scores,
                                         std::string technique, std::string model);

    std::size_t size() const { return entries.size(); }
    std::vector<std::string> features() const;
    std::optional<double> score_of(std::string_view feature) const;
    /// 0-based position, if present.
    std::optional<std::size_t> position_of(std::string_view feature) const;
    /// Keeps only `features` (order re-derived from scores).
    ImportanceRanking restricted_to(std::span<const std::string> features) const;

    bool operator==(const ImportanceRanking&) const = default;
};

}  // namespace xaudit
