#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nodulecad/decision_tree.hpp"
#include "nodulecad/features.hpp"
#include "nodulecad/labeled_set.hpp"

namespace nodulecad::classifiers {

enum class Family { logreg, linsvm, knn, adaboost, rforest };

std::string_view to_string(Family f);
/// Accepts the names produced by to_string. Throws InputError otherwise.
Family parse_family(std::string_view name);
bool is_linear(Family f);

/// Family plus hyperparameters. Only the fields used by the family matter:
/// C (logreg, linsvm), K (knn), D (adaboost, rforest), N (rforest trees,
/// adaboost rounds).
struct ClassifierConfig {
    Family family = Family::adaboost;
    double C = 1.0;
    int K = 5;
    int D = 5;
    int N = 100;
    std::uint64_t seed = 0;

    /// Default hyperparameters of a family; also the values every default grid contains.
    static ClassifierConfig defaults(Family family);

    /// Throws ContractError if a hyperparameter used by the family is invalid.
    void validate() const;
    /// Compact human-readable form, e.g. "rforest(D=25,N=40)".
    std::string describe() const;

    friend bool operator==(const ClassifierConfig&, const ClassifierConfig&) = default;
};

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;
    friend bool operator==(const LinearModel&, const LinearModel&) = default;
};

struct KnnModel {
    Matrix points;
    std::vector<int> labels;
    int k = 1;
    friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

struct BoostedModel {
    std::vector<DecisionTree> trees;
    std::vector<double> alphas;
    friend bool operator==(const BoostedModel&, const BoostedModel&) = default;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    friend bool operator==(const ForestModel&, const ForestModel&) = default;
};

using ModelParams = std::variant<LinearModel, KnnModel, BoostedModel, ForestModel>;

/// A fitted model: score function h, threshold theta, and the standardizer
/// its inputs must pass through. Immutable; the with_* helpers return copies.
class TrainedClassifier {
public:
    TrainedClassifier(ClassifierConfig config, ModelParams params, double threshold,
                      features::Standardizer standardizer);

    const ClassifierConfig& config() const { return config_; }
    Family family() const { return config_.family; }
    const ModelParams& params() const { return params_; }
    double threshold() const { return threshold_; }
    const features::Standardizer& standardizer() const { return standardizer_; }
    std::size_t dimension() const { return standardizer_.dimension(); }

    TrainedClassifier with_threshold(double theta) const;
    TrainedClassifier with_standardizer(features::Standardizer s) const;

    friend bool operator==(const TrainedClassifier&, const TrainedClassifier&) = default;

private:
    ClassifierConfig config_;
    ModelParams params_;
    double threshold_;
    features::Standardizer standardizer_;
};

/// Continuous score h(x) of an already-standardized input.
double score(const TrainedClassifier& model, std::span<const double> x);

/// +1 iff score(x) >= theta.
int predict(const TrainedClassifier& model, std::span<const double> x);

/// Applies the model's standardizer to raw features, then scores.
double score_raw(const TrainedClassifier& model, std::span<const double> raw);
int predict_raw(const TrainedClassifier& model, std::span<const double> raw);

// --- logistic regression -------------------------------------------------

/// (1/n) sum log(1 + exp(-y (w.x + b))) + ||w||^2 / (2 C n)
double logistic_objective(const LabeledSet& data, double C, std::span<const double> w, double b);

struct LinearGradient {
    std::vector<double> weights;
    double bias = 0.0;
};

LinearGradient logistic_gradient(const LabeledSet& data, double C, std::span<const double> w,
                                 double b);

struct LogisticOptions {
    double gradient_tolerance = 1e-6;
    int max_iterations = 10000;
};

/// Full-batch gradient descent with Armijo backtracking from w = 0, b = 0.
/// Throws ContractError if the loss becomes non-finite.
TrainedClassifier fit_logistic(const LabeledSet& data, double C, const LogisticOptions& opts = {});

// --- linear SVM ------------------------------------------------------------

/// (1/2)||w||^2 + C sum max(0, 1 - y (w.x + b))
double svm_objective(const LabeledSet& data, double C, std::span<const double> w, double b);

struct SvmOptions {
    int epochs = 2000;
};

/// Primal objective of the averaged iterate after each epoch.
struct SvmTrace {
    std::vector<double> objective;
};

/// Bias minimizing the hinge term for fixed weights (midpoint of the
/// minimizing interval when it is not unique).
double svm_optimal_bias(const LabeledSet& data, std::span<const double> w);

/// Stochastic subgradient descent on the weights (step 1/t, seeded per-epoch
/// shuffles, projection onto the ball that contains the optimum) returning the
/// mean of the iterates after the first epoch. The bias is solved exactly
/// for the current weights at the start of every epoch and for the final
/// averaged weights.
TrainedClassifier fit_linear_svm(const LabeledSet& data, double C, std::uint64_t seed = 0,
                                 const SvmOptions& opts = {}, SvmTrace* trace = nullptr);

// --- K nearest neighbours --------------------------------------------------

/// Score is the positive fraction among the K nearest training points
/// (Euclidean; equal distances resolved by lower training index).
TrainedClassifier fit_knn(const LabeledSet& data, int K);

// --- AdaBoost --------------------------------------------------------------

struct AdaBoostRound {
    double error = 0.0;              // weighted error of this round's tree
    double alpha = 0.0;
    double training_error = 0.0;     // ensemble error after this round (score <= 0 counts)
    double error_bound = 0.0;        // prod_t 2 sqrt(eps_t (1 - eps_t))
    double post_update_error = 0.0;  // this tree's error under the updated weights
    double weight_sum = 0.0;         // after renormalization
};

struct AdaBoostTrace {
    std::vector<AdaBoostRound> rounds;
    bool stopped_early = false;
};

/// Discrete AdaBoost over depth-D weighted trees.
TrainedClassifier fit_adaboost(const LabeledSet& data, int D, int rounds = 100,
                               AdaBoostTrace* trace = nullptr);

// --- random forest ---------------------------------------------------------

struct ForestOptions {
    bool bootstrap = true;
    /// 0 selects ceil(sqrt(d)).
    std::size_t feature_subset_size = 0;
};

/// Seed of tree t's random stream; used for the bootstrap and for per-split
/// feature sampling.
std::uint64_t forest_tree_seed(std::uint64_t seed, int tree);

/// Score is the mean positive-weight fraction of the reached leaves.
TrainedClassifier fit_random_forest(const LabeledSet& data, int N, int D, std::uint64_t seed,
                                    const ForestOptions& opts = {});

/// Dispatches on config.family.
TrainedClassifier fit(const ClassifierConfig& config, const LabeledSet& data);

}  // namespace nodulecad::classifiers
