#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "xaudit/common.hpp"

namespace xaudit {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;  // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf output: probability (gini) or stage score (mse)
    double n_samples = 0.0;
    double impurity = 0.0;
    double impurity_decrease = 0.0;  // n*I - n_l*I_l - n_r*I_r, in sample units
    double positives = 0.0;          // class-1 count (gini trees)

    bool is_leaf() const { return feature < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(std::span<const double> row) const;
    double predict(std::span<const double> row) const { return leaf_for(row).value; }
    std::size_t depth() const;
};

/// Inference-only copy of a tree: 16-byte nodes laid out so that a split's
/// children are adjacent (right = left + 1). Leaves store their value in
/// `threshold` and have feature -1.
class CompactTree {
public:
    CompactTree() = default;
    explicit CompactTree(const DecisionTree& tree);

    double predict(std::span<const double> row) const {
        const Node* n = nodes_.data();
        while (n->feature >= 0)
            n = &nodes_[static_cast<std::size_t>(n->left) +
                        (row[static_cast<std::size_t>(n->feature)] <= n->threshold ? 0u : 1u)];
        return n->threshold;
    }

private:
    struct Node {
        double threshold;
        std::int32_t feature;
        std::int32_t left;
    };
    std::vector<Node> nodes_;
};

enum class SplitCriterion { Gini, Mse };

struct TreeParams {
    std::size_t max_depth = 12;
    std::size_t min_samples_leaf = 1;
    std::size_t features_per_split = 0;  // 0: all features
};

using LeafValueFn = std::function<double(std::span<const std::size_t> samples)>;

/// Greedy CART growth over `samples` (duplicates allowed, e.g. a bootstrap).
/// Candidate thresholds are midpoints between consecutive distinct values;
/// a split is accepted only with strictly positive impurity decrease.
/// Without `leaf_value`, leaves hold the mean target.
DecisionTree grow_tree(const Matrix& x, std::span<const double> target,
                       std::vector<std::size_t> samples, const TreeParams& params,
                       SplitCriterion criterion, Rng& rng, const LeafValueFn& leaf_value = {});

}  // namespace xaudit
