#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "nodulecad/classifiers.hpp"
#include "nodulecad/eval.hpp"

namespace nodulecad::modelsel {

/// Per-sample validation fold assignment.
struct FoldPlan {
    int k = 5;
    std::vector<int> assignments;
    std::uint64_t seed = 0;
    bool stratified = true;

    std::vector<std::size_t> validation_indices(int fold) const;
    std::vector<std::size_t> training_indices(int fold) const;
};

/// Stratified split: each class is shuffled with `seed` and dealt round-robin
/// into folds, the dealing position carrying over from one class to the next
/// so total fold sizes also differ by at most one. Throws ContractError when
/// k < 2 or a class has fewer than k members.
FoldPlan kfold_split(std::span<const int> labels, int k, std::uint64_t seed);

/// Threshold maximizing the F-measure of (score >= theta) over the candidate
/// set {-inf, midpoints of consecutive distinct scores, +inf}; ties resolved
/// toward the smallest theta. Throws ContractError on single-class input.
double tune_threshold(std::span<const double> scores, std::span<const int> truth);

/// One row of the cross-validation table.
struct CandidateResult {
    classifiers::ClassifierConfig config;
    double mean_f = 0.0;    // mean over folds of the F-measure at the pooled theta
    double std_f = 0.0;     // population std over folds
    double pooled_f = 0.0;  // F-measure of the pooled out-of-fold predictions
    double pooled_auc = 0.0;
    double theta = 0.0;
};

struct SearchResult {
    classifiers::ClassifierConfig best;
    double best_theta = 0.0;
    std::size_t best_index = 0;
    std::vector<CandidateResult> table;  // in grid order
};

/// Observation hook called once per (candidate, fold) with the standardizer
/// fitted for that fold and the fold's training indices. Invoked from worker
/// threads; it must be thread-safe.
using FoldObserver = std::function<void(std::size_t candidate, int fold,
                                        const features::Standardizer& standardizer,
                                        std::span<const std::size_t> training_indices)>;

struct SearchOptions {
    int folds = 5;
    std::uint64_t seed = 0;
    /// 0 uses std::thread::hardware_concurrency().
    unsigned threads = 0;
    FoldObserver observer;
};

/// Cross-validated grid search. For every candidate and fold, a standardizer
/// and model are fit on the fold's training part and the validation part is
/// scored; theta is tuned on the pooled out-of-fold scores. The candidate with
/// the highest mean F wins, first in grid order on ties. Results do not depend
/// on the thread count.
SearchResult grid_search(std::span<const classifiers::ClassifierConfig> grid,
                         const classifiers::LabeledSet& train, const SearchOptions& opts = {});

/// Standardizer fitted on all of `train`, model fitted on the standardized
/// data, theta attached.
classifiers::TrainedClassifier train_final(const classifiers::ClassifierConfig& config,
                                           double theta, const classifiers::LabeledSet& train);

/// Default search grid for a family; always contains ClassifierConfig::defaults.
std::vector<classifiers::ClassifierConfig> default_grid(classifiers::Family family,
                                                        std::uint64_t seed = 0);

}  // namespace nodulecad::modelsel
