#include "nodulecad/decision_tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace nodulecad::classifiers {

std::size_t LabeledSet::positives() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kMalignant));
}

void LabeledSet::validate(bool require_both_classes) const {
    if (features.rows() != labels.size())
        throw ContractError("labeled set: row count and label count differ");
    if (labels.empty()) throw ContractError("labeled set is empty");
    for (int y : labels)
        if (!is_valid_label(y)) throw ContractError("labeled set: labels must be -1 or +1");
    for (double v : features.data())
        if (!std::isfinite(v)) throw ContractError("labeled set contains a non-finite feature");
    if (require_both_classes && (positives() == 0 || negatives() == 0))
        throw ContractError("labeled set must contain both classes");
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
    LabeledSet out;
    out.features = Matrix(indices.size(), features.cols());
    out.labels.reserve(indices.size());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto src = features.row(indices[k]);
        std::copy(src.begin(), src.end(), out.features.row(k).begin());
        out.labels.push_back(labels[indices[k]]);
    }
    return out;
}

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw ContractError("decision tree has no nodes");
    for (const auto& n : nodes_) {
        if (n.is_leaf()) continue;
        const auto count = static_cast<int>(nodes_.size());
        if (n.left <= 0 || n.right <= 0 || n.left >= count || n.right >= count)
            throw ContractError("decision tree has a dangling child index");
    }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> x) const {
    const TreeNode* node = &nodes_.front();
    while (!node->is_leaf()) {
        node = &nodes_[static_cast<std::size_t>(
            x[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left
                                                                          : node->right)];
    }
    return *node;
}

int DecisionTree::depth() const {
    // Children are always stored after their parent.
    std::vector<int> level(nodes_.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const auto& n = nodes_[i];
        deepest = std::max(deepest, level[i]);
        if (n.is_leaf()) continue;
        level[static_cast<std::size_t>(n.left)] = level[i] + 1;
        level[static_cast<std::size_t>(n.right)] = level[i] + 1;
    }
    return deepest;
}

namespace {

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

// Weighted Gini impurity times total weight: W * (1 - p^2 - q^2).
double weighted_gini(double pos, double neg) {
    const double total = pos + neg;
    return total > 0.0 ? 2.0 * pos * neg / total : 0.0;
}

class TreeBuilder {
public:
    TreeBuilder(const LabeledSet& data, std::span<const double> weights, int max_depth,
                std::size_t subset, Rng* rng)
        : data_(data), weights_(weights), max_depth_(max_depth), subset_(subset), rng_(rng) {
        features_.resize(data.dimension());
        std::iota(features_.begin(), features_.end(), 0);
    }

    std::vector<TreeNode> build(std::vector<std::size_t> root) {
        grow(std::move(root), 0);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<std::size_t> idx, int depth) {
        double pos = 0.0;
        double neg = 0.0;
        for (std::size_t i : idx) (data_.labels[i] == kMalignant ? pos : neg) += weights_[i];

        const int id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{});
        nodes_[id].label = pos >= neg ? kMalignant : kBenign;
        nodes_[id].positive_fraction = pos / (pos + neg);

        if (depth >= max_depth_ || pos == 0.0 || neg == 0.0) return id;

        const SplitChoice best = best_split(idx, pos, neg);
        if (best.feature < 0) return id;

        std::vector<std::size_t> left;
        std::vector<std::size_t> right;
        for (std::size_t i : idx)
            (data_.features(i, static_cast<std::size_t>(best.feature)) <= best.threshold ? left
                                                                                         : right)
                .push_back(i);
        idx.clear();
        idx.shrink_to_fit();

        nodes_[id].feature = best.feature;
        nodes_[id].threshold = best.threshold;
        const int l = grow(std::move(left), depth + 1);
        const int r = grow(std::move(right), depth + 1);
        nodes_[id].left = l;
        nodes_[id].right = r;
        return id;
    }

    std::vector<std::size_t> candidate_features() {
        const std::size_t d = features_.size();
        if (subset_ == 0 || subset_ >= d) return features_;
        std::vector<std::size_t> pool = features_;
        for (std::size_t k = 0; k < subset_; ++k) std::swap(pool[k], pool[k + rng_->below(d - k)]);
        pool.resize(subset_);
        std::sort(pool.begin(), pool.end());
        return pool;
    }

    SplitChoice best_split(const std::vector<std::size_t>& idx, double pos, double neg) {
        const double total = pos + neg;
        const double parent = weighted_gini(pos, neg);
        const double tol = 1e-12 * total;
        SplitChoice best;

        std::vector<std::size_t> order(idx);
        for (std::size_t f : candidate_features()) {
            auto value = [&](std::size_t i) { return data_.features(i, f); };
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return value(a) != value(b) ? value(a) < value(b) : a < b;
            });
            double lpos = 0.0;
            double lneg = 0.0;
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const std::size_t i = order[k];
                (data_.labels[i] == kMalignant ? lpos : lneg) += weights_[i];
                const double lo = value(i);
                const double hi = value(order[k + 1]);
                if (lo == hi) continue;
                const double child = weighted_gini(lpos, lneg) + weighted_gini(pos - lpos, neg - lneg);
                const double gain = parent - child;
                if (gain > best.gain + tol) {
                    double thr = lo + (hi - lo) / 2.0;
                    if (!(thr < hi)) thr = lo;
                    best = SplitChoice{static_cast<int>(f), thr, gain};
                }
            }
        }
        return best;
    }

    const LabeledSet& data_;
    std::span<const double> weights_;
    int max_depth_;
    std::size_t subset_;
    Rng* rng_;
    std::vector<std::size_t> features_;
    std::vector<TreeNode> nodes_;
};

}  // namespace

DecisionTree fit_decision_tree(const LabeledSet& data, int max_depth,
                               std::span<const double> weights, std::size_t feature_subset_size,
                               Rng* rng) {
    data.validate(/*require_both_classes=*/false);
    if (max_depth < 0) throw ContractError("fit_decision_tree: max_depth must be >= 0");
    if (weights.size() != data.size())
        throw ContractError("fit_decision_tree: one weight per sample required");
    if (feature_subset_size != 0 && feature_subset_size < data.dimension() && rng == nullptr)
        throw ContractError("fit_decision_tree: feature subsampling needs a random source");

    std::vector<std::size_t> root;
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0) || !std::isfinite(weights[i]))
            throw ContractError("fit_decision_tree: weights must be finite and non-negative");
        if (weights[i] > 0.0) root.push_back(i);
        sum += weights[i];
    }
    if (!(sum > 0.0)) throw ContractError("fit_decision_tree: all sample weights are zero");

    TreeBuilder builder(data, weights, max_depth, feature_subset_size, rng);
    return DecisionTree(builder.build(std::move(root)));
}

}  // namespace nodulecad::classifiers
