#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "nodulecad/common.hpp"

namespace nodulecad::eval {

struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;

    std::size_t positives() const { return tp + fn; }
    std::size_t negatives() const { return tn + fp; }
    std::size_t total() const { return tp + fn + tn + fp; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// Sensitivity, specificity, accuracy and the Se/Sp harmonic mean.
struct Metrics {
    double sensitivity = 0.0;
    double specificity = 0.0;
    double accuracy = 0.0;
    double f_measure = 0.0;
};

struct RocPoint {
    double fpr = 0.0;  // 1 - specificity
    double tpr = 0.0;  // sensitivity
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

/// Points ordered by increasing false-positive rate, from (0, 0) to (1, 1).
/// thresholds[i] is the score cutoff (predict positive when score >= cutoff)
/// producing points[i]; the first cutoff is +inf.
struct RocCurve {
    std::vector<RocPoint> points;
    std::vector<double> thresholds;
};

/// Throws ContractError on length mismatch or labels outside {-1, +1}.
ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted);

/// Throws ContractError when either class is absent.
Metrics metrics(const ConfusionCounts& c);

/// 2 Se Sp / (Se + Sp), or 0 when both are 0.
double f_measure(double sensitivity, double specificity);

/// One point per distinct score; tied scores move together. Throws
/// ContractError on single-class input or non-finite scores.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> truth);

/// Trapezoidal area under the curve.
double auc(const RocCurve& roc);

}  // namespace nodulecad::eval
