#include "xaudit/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace xaudit {

namespace {

// Average 1-based ranks by descending score.
std::vector<double> average_ranks(std::span<const double> scores) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string count_of(std::size_t n, const std::string& noun) {
    return std::to_string(n) + " " + noun + (n == 1 ? "" : "s");
}

std::string fixed(double v, int digits = 3) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(digits);
    out << v;
    return out.str();
}

/// Replaces group-level entries by the perturbed levels of that group, then
/// keeps only the perturbed features.
ImportanceRanking align_to(const ImportanceRanking& ranking, const std::vector<std::string>& wanted,
                           const FeatureSchema& schema) {
    const std::set<std::string> keep(wanted.begin(), wanted.end());
    std::vector<std::string> names;
    std::vector<double> scores;
    std::set<std::string> taken;
    auto push = [&](const std::string& name, double score) {
        if (keep.count(name) && taken.insert(name).second) {
            names.push_back(name);
            scores.push_back(score);
        }
    };
    for (const auto& e : ranking.entries) {
        if (schema.has_group(e.feature)) {
            for (const auto& level : schema.group(e.feature).levels)
                push(level_column_name(e.feature, level), e.score);
        } else {
            push(e.feature, e.score);
        }
    }
    return ImportanceRanking::from_scores(names, scores, ranking.technique, ranking.model);
}

}  // namespace

double spearman_rank_correlation(const ImportanceRanking& a, const ImportanceRanking& b) {
    std::vector<double> sa, sb;
    for (const auto& e : a.entries) {
        if (const auto other = b.score_of(e.feature)) {
            sa.push_back(e.score);
            sb.push_back(*other);
        }
    }
    if (sa.size() < 3)
        throw DataError("spearman: rankings share " + std::to_string(sa.size()) +
                        " features, need at least 3");
    const auto ra = average_ranks(sa);
    const auto rb = average_ranks(sb);
    return pearson(ra, rb);
}

double top_k_overlap(const ImportanceRanking& a, const ImportanceRanking& b, std::size_t k) {
    if (k == 0) throw ConfigError("top-k overlap: k must be >= 1");
    if (k > a.size() || k > b.size())
        throw ConfigError("top-k overlap: k = " + std::to_string(k) + " exceeds a ranking's size");
    std::set<std::string> ta, tb;
    for (std::size_t i = 0; i < k; ++i) {
        ta.insert(a.entries[i].feature);
        tb.insert(b.entries[i].feature);
    }
    std::size_t shared = 0;
    for (const auto& f : ta) shared += tb.count(f);
    return static_cast<double>(shared) / static_cast<double>(ta.size() + tb.size() - shared);
}

std::size_t ConsistencyBlock::flag_count() const {
    std::size_t n = 0;
    for (const auto& f : features) n += f.flags.size();
    return n;
}

ConsistencyReport build_consistency_report(std::span<const ImportanceRanking> static_rankings,
                                           std::span<const DynamicResult> dynamic,
                                           const FeatureSchema& schema,
                                           const ConsistencyConfig& config) {
    if (config.k == 0) throw ConfigError("consistency: k must be >= 1");
    if (!(config.flatness_threshold >= 0.0))
        throw ConfigError("consistency: flatness threshold must be >= 0");
    if (static_rankings.empty()) throw ConfigError("consistency: no static rankings");

    std::map<std::string, const DynamicResult*> by_model;
    for (const auto& d : dynamic) by_model[d.ranking.model] = &d;

    ConsistencyReport report;
    report.config = config;
    for (const auto& ranking : static_rankings) {
        const std::string label = ranking.model + "/" + ranking.technique;
        const auto it = by_model.find(ranking.model);
        if (it == by_model.end()) {
            report.skipped.push_back(label + ": no dynamic ranking for this model");
            continue;
        }
        const DynamicResult& dyn = *it->second;
        const auto perturbed = dyn.ranking.features();
        const ImportanceRanking aligned = align_to(ranking, perturbed, schema);
        if (aligned.size() < 3) {
            report.skipped.push_back(label + ": " + std::to_string(aligned.size()) +
                                     " shared features, need at least 3");
            continue;
        }
        const ImportanceRanking dyn_ranking = dyn.ranking.restricted_to(aligned.features());

        ConsistencyBlock block;
        block.model = ranking.model;
        block.technique = ranking.technique;
        block.compared = dyn_ranking.features();
        block.spearman = spearman_rank_correlation(aligned, dyn_ranking);
        block.k = std::min(config.k, aligned.size());
        block.top_k_overlap = top_k_overlap(aligned, dyn_ranking, block.k);

        for (const auto& feature : block.compared) {
            FeatureComparison row;
            row.feature = feature;
            row.static_rank = *aligned.position_of(feature) + 1;
            row.dynamic_rank = *dyn_ranking.position_of(feature) + 1;
            row.static_score = *aligned.score_of(feature);
            for (const auto& s : dyn.scores)
                if (s.feature == feature) {
                    row.sensitivity = s.score;
                    row.monotone = s.monotone;
                    row.reversal_points = s.reversal_points;
                }
            const bool important = row.static_rank <= block.k && row.static_score > 0.0;
            if (important && row.sensitivity < config.flatness_threshold)
                row.flags.emplace_back(kFlatFlag);
            if (important && !row.monotone) row.flags.emplace_back(kReversalFlag);
            block.features.push_back(std::move(row));
        }

        std::string level = block.spearman >= config.consistent_rho ? "consistent"
                            : block.spearman >= config.partial_rho ? "partially consistent"
                                                                   : "inconsistent";
        block.verdict = level + " (spearman " + fixed(block.spearman) + ", top-" +
                        std::to_string(block.k) + " overlap " + fixed(block.top_k_overlap) + ", " +
                        count_of(block.flag_count(), "flag") + ")";
        report.blocks.push_back(std::move(block));
    }
    if (report.blocks.empty())
        throw DataError("consistency: no static ranking shares at least 3 features with a dynamic ranking");

    std::map<std::string, std::vector<const ConsistencyBlock*>> per_model;
    for (const auto& b : report.blocks) per_model[b.model].push_back(&b);
    for (const auto& [model, blocks] : per_model) {
        double mean_rho = 0.0;
        std::size_t flags = 0;
        for (const auto* b : blocks) {
            mean_rho += b->spearman;
            flags += b->flag_count();
        }
        mean_rho /= static_cast<double>(blocks.size());
        std::string line = model + ": mean spearman " + fixed(mean_rho) + " over " +
                           count_of(blocks.size(), "technique") + "; ";
        line += flags == 0 ? "no discontinuity flags"
                           : count_of(flags, "discontinuity flag");
        report.verdicts.push_back(std::move(line));
    }
    return report;
}

std::string consistency_markdown(const ConsistencyReport& report) {
    std::ostringstream md;
    md << "# Static vs dynamic feature importance\n\n";
    md << "Flatness threshold " << fixed(report.config.flatness_threshold, 4) << ", k = "
       << report.config.k << ".\n\n## Verdicts\n\n";
    for (const auto& v : report.verdicts) md << "- " << v << "\n";
    for (const auto& b : report.blocks) {
        md << "\n## " << b.model << " / " << b.technique << "\n\n" << b.verdict << "\n\n";
        md << "| feature | static rank | dynamic rank | static score | sensitivity | monotone | flags |\n";
        md << "|---|---|---|---|---|---|---|\n";
        for (const auto& f : b.features) {
            std::string flags;
            for (const auto& flag : f.flags) flags += (flags.empty() ? "" : "; ") + flag;
            md << "| " << f.feature << " | " << f.static_rank << " | " << f.dynamic_rank << " | "
               << fixed(f.static_score, 4) << " | " << fixed(f.sensitivity, 4) << " | "
               << (f.monotone ? "yes" : "no") << " | " << flags << " |\n";
        }
    }
    if (!report.skipped.empty()) {
        md << "\n## Skipped\n\n";
        for (const auto& s : report.skipped) md << "- " << s << "\n";
    }
    return md.str();
}

}  // namespace xaudit
