#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "xaudit/explainers.hpp"

namespace xaudit {

std::vector<double> normalize_attribution(std::span<const double> values) {
    std::vector<double> out(values.size());
    double total = 0.0;
    for (double v : values) total += std::abs(v);
    if (!(total > 0.0)) {
        std::fill(out.begin(), out.end(), values.empty() ? 0.0 : 1.0 / static_cast<double>(values.size()));
        return out;
    }
    for (std::size_t j = 0; j < values.size(); ++j) out[j] = std::abs(values[j]) / total;
    return out;
}

namespace {

std::vector<std::size_t> rank_positions(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    std::vector<std::size_t> rank(v.size());
    for (std::size_t pos = 0; pos < order.size(); ++pos) rank[order[pos]] = pos;
    return rank;
}

double ranked_distance(std::span<const double> a, std::span<const std::size_t> ra,
                       std::span<const double> b, std::span<const std::size_t> rb) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = static_cast<double>(ra[j]) - static_cast<double>(rb[j]);
        d += std::max(a[j], b[j]) * diff * diff;
    }
    return d;
}

void check_homogeneous(std::span<const Attribution> attributions) {
    for (const auto& a : attributions)
        if (a.values.size() != attributions.front().values.size())
            throw DataError("gam: attributions have heterogeneous lengths");
}

}  // namespace

double gam_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("gam_distance: length mismatch");
    const auto ra = rank_positions(a);
    const auto rb = rank_positions(b);
    return ranked_distance(a, ra, b, rb);
}

GamResult gam_cluster(std::span<const Attribution> attributions, std::size_t k,
                      std::size_t max_iters, std::uint64_t seed) {
    if (k == 0) throw ConfigError("gam: K must be >= 1");
    if (attributions.size() < k) throw DataError("gam: fewer attributions than clusters");
    check_homogeneous(attributions);
    const std::size_t n = attributions.size();

    std::vector<std::vector<double>> points;
    std::vector<std::vector<std::size_t>> ranks;
    for (const auto& a : attributions) {
        points.push_back(normalize_attribution(a.values));
        ranks.push_back(rank_positions(points.back()));
    }
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            dist[i * n + j] = dist[j * n + i] = ranked_distance(points[i], ranks[i], points[j], ranks[j]);
    auto d = [&](std::size_t i, std::size_t j) { return dist[i * n + j]; };

    // Initialization: the most central point, then farthest-first.
    std::vector<std::size_t> medoids;
    {
        std::size_t best = 0;
        double best_total = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            double total = 0.0;
            for (std::size_t j = 0; j < n; ++j) total += d(i, j);
            if (total < best_total) {
                best_total = total;
                best = i;
            }
        }
        medoids.push_back(best);
    }
    std::vector<char> is_medoid(n, 0);
    is_medoid[medoids[0]] = 1;
    while (medoids.size() < k) {
        std::size_t best = n;
        double best_gap = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (is_medoid[i]) continue;
            double gap = std::numeric_limits<double>::infinity();
            for (std::size_t m : medoids) gap = std::min(gap, d(i, m));
            if (gap > best_gap) {
                best_gap = gap;
                best = i;
            }
        }
        medoids.push_back(best);
        is_medoid[best] = 1;
    }

    std::vector<std::size_t> assignment(n);
    auto assign = [&](const std::vector<std::size_t>& meds, std::vector<std::size_t>* out) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t slot = 0;
            double best = d(i, meds[0]);
            for (std::size_t c = 1; c < meds.size(); ++c)
                if (d(i, meds[c]) < best) {
                    best = d(i, meds[c]);
                    slot = c;
                }
            if (out) (*out)[i] = slot;
            total += best;
        }
        return total;
    };

    GamResult result;
    result.k = k;
    result.mode = GamMode::Unsupervised;
    result.names = attributions.front().names;
    Rng rng(seed);
    std::vector<std::pair<std::size_t, std::size_t>> swaps;
    for (std::size_t iter = 0; iter < std::max<std::size_t>(1, max_iters); ++iter) {
        const double cost = assign(medoids, &assignment);
        result.objective_history.push_back(cost);
        if (iter + 1 == max_iters) break;

        swaps.clear();
        for (std::size_t slot = 0; slot < k; ++slot)
            for (std::size_t o = 0; o < n; ++o)
                if (!is_medoid[o]) swaps.emplace_back(slot, o);
        std::shuffle(swaps.begin(), swaps.end(), rng);
        bool improved = false;
        std::vector<std::size_t> trial = medoids;
        for (const auto& [slot, o] : swaps) {
            trial[slot] = o;
            if (assign(trial, nullptr) < cost - 1e-12) {
                is_medoid[medoids[slot]] = 0;
                is_medoid[o] = 1;
                medoids = trial;
                improved = true;
                break;
            }
            trial[slot] = medoids[slot];
        }
        if (!improved) break;
    }

    for (std::size_t c = 0; c < k; ++c) {
        GamCluster cluster;
        cluster.medoid = points[medoids[c]];
        cluster.medoid_id = attributions[medoids[c]].instance_id;
        for (std::size_t i = 0; i < n; ++i)
            if (assignment[i] == c) cluster.members.push_back(attributions[i].instance_id);
        cluster.proportion = static_cast<double>(cluster.members.size()) / static_cast<double>(n);
        result.clusters.push_back(std::move(cluster));
    }
    return result;
}

LabelGam gam_by_label(std::span<const Attribution> attributions, std::span<const int> labels,
                      std::size_t subsample_per_class, std::uint64_t seed, std::string model_name) {
    if (attributions.size() != labels.size())
        throw DataError("gam: labels are not aligned with attributions");
    if (attributions.empty()) throw DataError("gam: no attributions");
    check_homogeneous(attributions);

    std::array<std::vector<std::size_t>, 2> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members.at(static_cast<std::size_t>(labels[i])).push_back(i);
    static constexpr const char* kClass[2] = {"BadLoan", "GoodLoan"};
    for (std::size_t c = 0; c < 2; ++c) {
        if (members[c].empty()) throw DataError(std::string("class ") + kClass[c] + " has no members");
        if (subsample_per_class > 0 && members[c].size() > subsample_per_class) {
            Rng rng(derive_seed(seed, c));
            members[c] = sample_without_replacement(members[c], subsample_per_class, rng);
            std::sort(members[c].begin(), members[c].end());
        }
    }

    const auto& names = attributions.front().names;
    const std::size_t d = attributions.front().values.size();
    LabelGam out;
    out.result.names = names;
    out.result.k = 2;
    out.result.mode = GamMode::LabelForced;
    const double total = static_cast<double>(members[0].size() + members[1].size());
    for (std::size_t c : {std::size_t{1}, std::size_t{0}}) {
        std::vector<double> centre(d, 0.0);
        GamCluster cluster;
        for (std::size_t i : members[c]) {
            const auto v = normalize_attribution(attributions[i].values);
            for (std::size_t j = 0; j < d; ++j) centre[j] += v[j];
            cluster.members.push_back(attributions[i].instance_id);
        }
        for (double& x : centre) x /= static_cast<double>(members[c].size());
        cluster.medoid = centre;
        cluster.proportion = static_cast<double>(members[c].size()) / total;
        auto ranking = ImportanceRanking::from_scores(
            names, centre, c == 1 ? "gam_good" : "gam_bad", model_name);
        (c == 1 ? out.good : out.bad) = std::move(ranking);
        out.result.clusters.push_back(std::move(cluster));
    }
    return out;
}

}  // namespace xaudit
