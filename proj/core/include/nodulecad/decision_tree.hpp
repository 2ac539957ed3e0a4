#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nodulecad/labeled_set.hpp"
#include "nodulecad/rng.hpp"

namespace nodulecad::classifiers {

/// Node of a binary tree stored in a flat array. Internal nodes route
/// x[feature] <= threshold to `left`. Every node keeps the weighted-majority
/// label and positive-weight fraction of the samples that reached it.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = kMalignant;
    double positive_fraction = 0.0;

    bool is_leaf() const { return feature < 0; }
    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes);

    const TreeNode& leaf_for(std::span<const double> x) const;
    int predict(std::span<const double> x) const { return leaf_for(x).label; }
    double positive_fraction(std::span<const double> x) const {
        return leaf_for(x).positive_fraction;
    }

    const std::vector<TreeNode>& nodes() const { return nodes_; }
    const TreeNode& root() const { return nodes_.front(); }
    int depth() const;

    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

private:
    std::vector<TreeNode> nodes_;
};

/// Greedy weighted-Gini tree over axis-aligned midpoint thresholds.
///
/// Samples with zero weight are ignored. Growth stops at `max_depth`, at a
/// pure node, or when no split strictly lowers weighted impurity. Gain ties
/// go to the lowest feature index, then the lowest threshold.
///
/// `feature_subset_size` of 0 (or >= d) evaluates every feature at each
/// split; otherwise a fresh random subset of that size is drawn from `rng`
/// per split.
DecisionTree fit_decision_tree(const LabeledSet& data, int max_depth,
                               std::span<const double> weights,
                               std::size_t feature_subset_size = 0, Rng* rng = nullptr);

}  // namespace nodulecad::classifiers
