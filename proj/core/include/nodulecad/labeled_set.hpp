#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nodulecad/matrix.hpp"

namespace nodulecad::classifiers {

/// n x d feature matrix with labels in {-1, +1}.
struct LabeledSet {
    Matrix features;
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    std::size_t dimension() const { return features.cols(); }
    std::span<const double> row(std::size_t i) const { return features.row(i); }

    std::size_t positives() const;
    std::size_t negatives() const { return size() - positives(); }

    /// Checks shape, label values and finiteness; with `require_both_classes`
    /// also that each class has at least one sample. Throws ContractError.
    void validate(bool require_both_classes = true) const;

    /// Rows picked by index, in the given order.
    LabeledSet subset(std::span<const std::size_t> indices) const;
};

}  // namespace nodulecad::classifiers
