#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "xaudit/explainers.hpp"

namespace xaudit {

namespace {

using Mask = std::uint64_t;

/// Interventional coalition game over the schema's players.
class CoalitionGame {
public:
    CoalitionGame(const ProbabilityModel& model, std::vector<Player> players,
                  std::span<const double> instance, const Matrix& background)
        : model_(model), players_(std::move(players)), instance_(instance), background_(background) {
        if (background.rows() == 0) throw DataError("shapley: background set is empty");
        if (background.cols() != instance.size() || instance.size() != model.n_features())
            throw DataError("shapley: instance/background width does not match model");
    }

    std::size_t n_players() const { return players_.size(); }
    const std::vector<Player>& players() const { return players_; }

    std::vector<double> values(std::span<const Mask> masks) const {
        const std::size_t nb = background_.rows();
        const std::size_t per_chunk = std::max<std::size_t>(1, kRowsPerBatch / nb);
        std::vector<double> out(masks.size());
        for (std::size_t start = 0; start < masks.size(); start += per_chunk) {
            const std::size_t end = std::min(masks.size(), start + per_chunk);
            Matrix rows((end - start) * nb, instance_.size());
            for (std::size_t s = start; s < end; ++s)
                for (std::size_t b = 0; b < nb; ++b) {
                    auto r = rows.row((s - start) * nb + b);
                    auto src = background_.row(b);
                    std::copy(src.begin(), src.end(), r.begin());
                    for (std::size_t p = 0; p < players_.size(); ++p)
                        if (masks[s] >> p & 1u)
                            for (std::size_t c : players_[p].columns) r[c] = instance_[c];
                }
            const auto pred = model_.predict_proba(rows);
            for (std::size_t s = start; s < end; ++s) {
                double total = 0.0;
                for (std::size_t b = 0; b < nb; ++b) total += pred[(s - start) * nb + b];
                out[s] = total / static_cast<double>(nb);
            }
        }
        return out;
    }

    double value(Mask mask) const { return values(std::span<const Mask>(&mask, 1))[0]; }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& p : players_) out.push_back(p.name);
        return out;
    }

private:
    static constexpr std::size_t kRowsPerBatch = 1 << 16;

    const ProbabilityModel& model_;
    std::vector<Player> players_;
    std::span<const double> instance_;
    const Matrix& background_;
};

double binomial(std::size_t n, std::size_t k) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i)
        r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return r;
}

// Next mask with the same popcount (Gosper's hack).
Mask next_combination(Mask v) {
    const Mask t = v | (v - 1);
    return (t + 1) | (((~t & -~t) - 1) >> (std::countr_zero(v) + 1));
}

Attribution make_attribution(const CoalitionGame& game, std::vector<double> values, double base,
                             double prediction, std::string technique, std::string id) {
    Attribution a;
    a.instance_id = std::move(id);
    a.names = game.names();
    a.values = std::move(values);
    a.base_value = base;
    a.prediction = prediction;
    a.technique = std::move(technique);
    return a;
}

}  // namespace

Attribution exact_shapley(const ProbabilityModel& model, const FeatureSchema& schema,
                          std::span<const double> instance, const Matrix& background,
                          std::string instance_id) {
    CoalitionGame game(model, schema.players(), instance, background);
    const std::size_t m = game.n_players();
    if (m > kMaxExactPlayers)
        throw ConfigError("exact shapley supports at most " + std::to_string(kMaxExactPlayers) +
                          " players; use kernel_shap");
    const Mask full = (Mask{1} << m) - 1;
    std::vector<Mask> masks(full + 1);
    for (Mask s = 0; s <= full; ++s) masks[s] = s;
    const std::vector<double> v = game.values(masks);

    // weight[s] = s! (m - s - 1)! / m!
    std::vector<double> weight(m, 0.0);
    for (std::size_t s = 0; s < m; ++s)
        weight[s] = 1.0 / (static_cast<double>(m) * binomial(m - 1, s));

    std::vector<double> phi(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const Mask bit = Mask{1} << j;
        double total = 0.0;
        for (Mask s = 0; s <= full; ++s)
            if (!(s & bit)) total += weight[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
        phi[j] = total;
    }
    return make_attribution(game, std::move(phi), v[0], model.predict_one(instance),
                            "shapley_exact", std::move(instance_id));
}

Attribution kernel_shap(const ProbabilityModel& model, const FeatureSchema& schema,
                        std::span<const double> instance, const Matrix& background,
                        const KernelShapParams& params, std::string instance_id) {
    CoalitionGame game(model, schema.players(), instance, background);
    const std::size_t m = game.n_players();
    if (m == 0) throw DataError("kernel shap: no players");
    if (m > 62) throw ConfigError("kernel shap supports at most 62 players");
    const Mask full = (Mask{1} << m) - 1;
    const double v0 = game.value(0);
    const double fx = game.value(full);
    const double prediction = model.predict_one(instance);
    const std::string tag = "kernel_shap";
    if (m == 1)
        return make_attribution(game, {fx - v0}, v0, prediction, tag, std::move(instance_id));

    const double total_coalitions = std::ldexp(1.0, static_cast<int>(m)) - 2.0;
    bool enumerate_all = params.n_coalitions == 0;
    if (!enumerate_all) {
        if (params.n_coalitions < m + 1)
            throw ConfigError("kernel shap: fewer sampled coalitions than players + 1");
        enumerate_all = static_cast<double>(params.n_coalitions) >= total_coalitions;
    } else if (m > 24) {
        throw ConfigError("kernel shap: exact enumeration is limited to 24 players");
    }
    const std::size_t budget = enumerate_all ? static_cast<std::size_t>(total_coalitions)
                                             : params.n_coalitions;

    std::vector<Mask> masks;
    std::vector<double> weights;
    std::map<Mask, std::size_t> seen;
    auto add = [&](Mask s, double w) {
        auto [it, inserted] = seen.emplace(s, masks.size());
        if (inserted) {
            masks.push_back(s);
            weights.push_back(w);
        } else {
            weights[it->second] += w;
        }
        return inserted;
    };

    // Shapley kernel mass per coalition size, pairing size s with m - s.
    const std::size_t n_sizes = m / 2;         // ceil((m - 1) / 2)
    const std::size_t n_paired = (m - 1) / 2;  // floor((m - 1) / 2)
    std::vector<double> size_weight(n_sizes);
    for (std::size_t s = 1; s <= n_sizes; ++s)
        size_weight[s - 1] = static_cast<double>(m - 1) / static_cast<double>(s * (m - s)) *
                             (s <= n_paired ? 2.0 : 1.0);
    double mass = 0.0;
    for (double w : size_weight) mass += w;
    for (double& w : size_weight) w /= mass;

    std::size_t full_sizes = 0;
    double left = static_cast<double>(budget);
    std::vector<double> remaining = size_weight;
    for (std::size_t s = 1; s <= n_sizes; ++s) {
        double count = binomial(m, s);
        if (s <= n_paired) count *= 2.0;
        if (left * remaining[s - 1] / count < 1.0 - 1e-8) break;
        ++full_sizes;
        left -= count;
        if (remaining[s - 1] < 1.0) {
            const double rest = 1.0 - remaining[s - 1];
            for (double& w : remaining) w /= rest;
        }
        double w = size_weight[s - 1] / binomial(m, s);
        if (s <= n_paired) w /= 2.0;
        for (Mask c = (Mask{1} << s) - 1; c <= full; c = next_combination(c)) {
            add(c, w);
            if (s <= n_paired) add(full & ~c, w);
            if (c == full) break;
        }
    }

    const std::size_t fixed = masks.size();
    if (full_sizes != n_sizes && budget > fixed) {
        std::vector<double> probs(size_weight.begin() + static_cast<std::ptrdiff_t>(full_sizes),
                                  size_weight.end());
        Rng rng(params.seed);
        std::discrete_distribution<std::size_t> pick_size(probs.begin(), probs.end());
        std::size_t samples_left = budget - fixed;
        std::vector<std::size_t> order(m);
        for (std::size_t draws = 4 * samples_left; samples_left > 0 && draws > 0; --draws) {
            const std::size_t size = pick_size(rng) + full_sizes + 1;
            for (std::size_t k = 0; k < m; ++k) order[k] = k;
            Mask c = 0;
            for (std::size_t k = 0; k < size; ++k) {
                std::uniform_int_distribution<std::size_t> at(k, m - 1);
                std::swap(order[k], order[at(rng)]);
                c |= Mask{1} << order[k];
            }
            const bool fresh = add(c, 1.0);
            if (fresh) --samples_left;
            if (samples_left > 0 && size <= n_paired) {
                if (add(full & ~c, 1.0) && fresh) --samples_left;
            }
        }
        double sampled = 0.0;
        for (std::size_t k = fixed; k < weights.size(); ++k) sampled += weights[k];
        double weight_left = 0.0;
        for (std::size_t k = full_sizes; k < size_weight.size(); ++k) weight_left += size_weight[k];
        for (std::size_t k = fixed; k < weights.size(); ++k) weights[k] *= weight_left / sampled;
    }

    // Weighted least squares with the last player eliminated through the
    // efficiency constraint.
    const std::vector<double> v = game.values(masks);
    const double delta = fx - v0;
    const auto rows = static_cast<Eigen::Index>(masks.size());
    const auto free = static_cast<Eigen::Index>(m - 1);
    Eigen::MatrixXd design(rows, free);
    Eigen::VectorXd target(rows);
    Eigen::VectorXd w(rows);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Mask s = masks[static_cast<std::size_t>(r)];
        const double last = static_cast<double>(s >> (m - 1) & 1u);
        for (Eigen::Index j = 0; j < free; ++j)
            design(r, j) = static_cast<double>(s >> j & 1u) - last;
        target[r] = v[static_cast<std::size_t>(r)] - v0 - last * delta;
        w[r] = weights[static_cast<std::size_t>(r)];
    }
    const Eigen::MatrixXd normal = design.transpose() * w.asDiagonal() * design;
    const Eigen::VectorXd rhs = design.transpose() * (w.asDiagonal() * target);
    const Eigen::VectorXd solved = normal.ldlt().solve(rhs);
    if (!solved.allFinite()) throw NumericError("kernel shap: weighted least squares failed");

    std::vector<double> phi(m);
    double assigned = 0.0;
    for (std::size_t j = 0; j + 1 < m; ++j) {
        phi[j] = solved[static_cast<Eigen::Index>(j)];
        assigned += phi[j];
    }
    phi[m - 1] = delta - assigned;
    return make_attribution(game, std::move(phi), v0, prediction, tag, std::move(instance_id));
}

}  // namespace xaudit
