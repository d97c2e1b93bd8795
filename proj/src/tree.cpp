#include "xaudit/tree.hpp"

#include <algorithm>
#include <numeric>

namespace xaudit {

CompactTree::CompactTree(const DecisionTree& tree) {
    if (tree.nodes.empty()) throw DataError("tree has no nodes");
    // Breadth-first renumbering: children of each split are emitted as a pair.
    std::vector<int> order{0};
    nodes_.push_back({0.0, -1, -1});
    for (std::size_t k = 0; k < order.size(); ++k) {
        const TreeNode& src = tree.nodes[static_cast<std::size_t>(order[k])];
        if (src.is_leaf()) {
            nodes_[k] = {src.value, -1, -1};
            continue;
        }
        nodes_[k] = {src.threshold, src.feature, static_cast<std::int32_t>(order.size())};
        order.push_back(src.left);
        order.push_back(src.right);
        nodes_.push_back({0.0, -1, -1});
        nodes_.push_back({0.0, -1, -1});
    }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> row) const {
    const TreeNode* node = &nodes[0];
    while (!node->is_leaf())
        node = &nodes[static_cast<std::size_t>(
            row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                             : node->right)];
    return *node;
}

std::size_t DecisionTree::depth() const {
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t deepest = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        deepest = std::max(deepest, d[i]);
        if (!nodes[i].is_leaf()) {
            d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
            d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        }
    }
    return deepest;
}

namespace {

// Impurity from sufficient statistics. For 0/1 targets sum == sum of squares.
double impurity(SplitCriterion c, double n, double sum, double sumsq) {
    if (n <= 0) return 0.0;
    const double m = sum / n;
    if (c == SplitCriterion::Gini) return 2.0 * m * (1.0 - m);
    return std::max(0.0, sumsq / n - m * m);
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

class Grower {
public:
    Grower(const Matrix& x, std::span<const double> target, const TreeParams& params,
           SplitCriterion criterion, Rng& rng, const LeafValueFn& leaf_value)
        : x_(x), y_(target), params_(params), criterion_(criterion), rng_(rng),
          leaf_value_(leaf_value) {
        all_features_.resize(x.cols());
        std::iota(all_features_.begin(), all_features_.end(), std::size_t{0});
    }

    DecisionTree run(std::vector<std::size_t> samples) {
        grow(std::move(samples), 0);
        return std::move(tree_);
    }

private:
    int grow(std::vector<std::size_t> samples, std::size_t depth) {
        const int id = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();

        double sum = 0.0, sumsq = 0.0;
        for (std::size_t i : samples) {
            sum += y_[i];
            sumsq += y_[i] * y_[i];
        }
        const double n = static_cast<double>(samples.size());
        {
            TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
            node.n_samples = n;
            node.impurity = impurity(criterion_, n, sum, sumsq);
            node.positives = criterion_ == SplitCriterion::Gini ? sum : 0.0;
        }

        SplitChoice best;
        if (depth < params_.max_depth && samples.size() >= 2 * params_.min_samples_leaf)
            best = find_split(samples, n, sum, sumsq);

        if (best.feature < 0) {
            tree_.nodes[static_cast<std::size_t>(id)].value =
                leaf_value_ ? leaf_value_(samples) : sum / n;
            return id;
        }

        std::vector<std::size_t> left, right;
        for (std::size_t i : samples)
            (x_(i, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right)
                .push_back(i);
        samples.clear();
        samples.shrink_to_fit();

        {
            TreeNode& node = tree_.nodes[static_cast<std::size_t>(id)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.impurity_decrease = best.gain;
            node.value = sum / n;
        }
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        tree_.nodes[static_cast<std::size_t>(id)].left = l;
        tree_.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    SplitChoice find_split(const std::vector<std::size_t>& samples, double n, double sum,
                           double sumsq) {
        std::vector<std::size_t> candidates = all_features_;
        if (params_.features_per_split > 0 && params_.features_per_split < candidates.size()) {
            candidates = sample_without_replacement(std::move(candidates),
                                                    params_.features_per_split, rng_);
            std::sort(candidates.begin(), candidates.end());
        }

        const double parent = n * impurity(criterion_, n, sum, sumsq);
        const std::size_t min_leaf = std::max<std::size_t>(1, params_.min_samples_leaf);
        SplitChoice best;
        std::vector<std::pair<double, double>> column(samples.size());
        for (std::size_t f : candidates) {
            for (std::size_t k = 0; k < samples.size(); ++k)
                column[k] = {x_(samples[k], f), y_[samples[k]]};
            std::sort(column.begin(), column.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            if (column.front().first == column.back().first) continue;

            double ls = 0.0, lss = 0.0;
            for (std::size_t k = 1; k < column.size(); ++k) {
                ls += column[k - 1].second;
                lss += column[k - 1].second * column[k - 1].second;
                if (column[k - 1].first == column[k].first) continue;
                if (k < min_leaf || column.size() - k < min_leaf) continue;
                const double nl = static_cast<double>(k);
                const double nr = n - nl;
                const double children = nl * impurity(criterion_, nl, ls, lss) +
                                        nr * impurity(criterion_, nr, sum - ls, sumsq - lss);
                const double gain = parent - children;
                if (gain > best.gain + kMinGain) {
                    const double lo = column[k - 1].first;
                    const double hi = column[k].first;
                    double mid = lo + (hi - lo) / 2.0;
                    if (!(mid < hi)) mid = lo;
                    best = {static_cast<int>(f), mid, gain};
                }
            }
        }
        return best;
    }

    static constexpr double kMinGain = 1e-12;

    const Matrix& x_;
    std::span<const double> y_;
    const TreeParams& params_;
    SplitCriterion criterion_;
    Rng& rng_;
    const LeafValueFn& leaf_value_;
    std::vector<std::size_t> all_features_;
    DecisionTree tree_;
};

}  // namespace

DecisionTree grow_tree(const Matrix& x, std::span<const double> target,
                       std::vector<std::size_t> samples, const TreeParams& params,
                       SplitCriterion criterion, Rng& rng, const LeafValueFn& leaf_value) {
    if (samples.empty()) throw std::invalid_argument("grow_tree: no samples");
    return Grower(x, target, params, criterion, rng, leaf_value).run(std::move(samples));
}

}  // namespace xaudit
