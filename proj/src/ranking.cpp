#include "xaudit/ranking.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace xaudit {

namespace {

void sort_entries(std::vector<RankingEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankingEntry& a, const RankingEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.feature < b.feature;
    });
}

}  // namespace

ImportanceRanking ImportanceRanking::from_scores(std::span<const std::string> names,
                                                 std::span<const double> raw_scores,
                                                 std::string technique, std::string model) {
    if (names.size() != raw_scores.size())
        throw std::invalid_argument("ranking: names and scores differ in length");
    ImportanceRanking r;
    r.technique = std::move(technique);
    r.model = std::move(model);
    std::set<std::string_view> seen;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (!seen.insert(names[j]).second)
            throw std::invalid_argument("ranking: duplicate feature " + names[j]);
        r.entries.push_back({names[j], std::max(0.0, raw_scores[j]), raw_scores[j]});
    }
    sort_entries(r.entries);
    return r;
}

std::vector<std::string> ImportanceRanking::features() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.feature);
    return out;
}

std::optional<double> ImportanceRanking::score_of(std::string_view feature) const {
    for (const auto& e : entries)
        if (e.feature == feature) return e.score;
    return std::nullopt;
}

std::optional<std::size_t> ImportanceRanking::position_of(std::string_view feature) const {
    for (std::size_t k = 0; k < entries.size(); ++k)
        if (entries[k].feature == feature) return k;
    return std::nullopt;
}

ImportanceRanking ImportanceRanking::restricted_to(std::span<const std::string> features) const {
    ImportanceRanking r;
    r.technique = technique;
    r.model = model;
    const std::set<std::string_view> keep(features.begin(), features.end());
    for (const auto& e : entries)
        if (keep.count(e.feature)) r.entries.push_back(e);
    sort_entries(r.entries);
    return r;
}

}  // namespace xaudit
