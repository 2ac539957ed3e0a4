#include "nodulecad/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace nodulecad::eval {

ConfusionCounts confusion(std::span<const int> truth, std::span<const int> predicted) {
    if (truth.size() != predicted.size())
        throw ContractError("confusion: truth and prediction lengths differ");
    if (truth.empty()) throw ContractError("confusion: no samples");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!is_valid_label(truth[i]) || !is_valid_label(predicted[i]))
            throw ContractError("confusion: label at index " + std::to_string(i) +
                                " is not -1 or +1");
        if (truth[i] == kMalignant)
            ++(predicted[i] == kMalignant ? c.tp : c.fn);
        else
            ++(predicted[i] == kBenign ? c.tn : c.fp);
    }
    return c;
}

double f_measure(double sensitivity, double specificity) {
    const double sum = sensitivity + specificity;
    return sum > 0.0 ? 2.0 * sensitivity * specificity / sum : 0.0;
}

Metrics metrics(const ConfusionCounts& c) {
    if (c.positives() == 0 || c.negatives() == 0)
        throw ContractError("metrics undefined: both classes must be present (positives=" +
                            std::to_string(c.positives()) +
                            ", negatives=" + std::to_string(c.negatives()) + ")");
    Metrics m;
    m.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
    m.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
    m.accuracy = static_cast<double>(c.tn + c.tp) / static_cast<double>(c.total());
    m.f_measure = f_measure(m.sensitivity, m.specificity);
    return m;
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size()) throw ContractError("roc_curve: length mismatch");
    std::size_t pos = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!is_valid_label(truth[i])) throw ContractError("roc_curve: invalid label");
        if (!std::isfinite(scores[i])) throw ContractError("roc_curve: non-finite score");
        if (truth[i] == kMalignant) ++pos;
    }
    const std::size_t neg = truth.size() - pos;
    if (pos == 0 || neg == 0) throw ContractError("roc_curve: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    roc.thresholds.push_back(std::numeric_limits<double>::infinity());
    std::size_t tp = 0;
    std::size_t fp = 0;
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        for (; k < order.size() && scores[order[k]] == s; ++k)
            ++(truth[order[k]] == kMalignant ? tp : fp);
        roc.points.push_back(
            {static_cast<double>(fp) / static_cast<double>(neg),
             static_cast<double>(tp) / static_cast<double>(pos)});
        roc.thresholds.push_back(s);
    }
    return roc;
}

double auc(const RocCurve& roc) {
    double area = 0.0;
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
        const auto& a = roc.points[i - 1];
        const auto& b = roc.points[i];
        area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
    }
    return area;
}

}  // namespace nodulecad::eval
