#include "nodulecad/classifiers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace nodulecad::classifiers {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s;
}

// log(1 + exp(-m)) without overflow.
double log1p_exp_neg(double m) { return std::log1p(std::exp(-std::abs(m))) + std::max(-m, 0.0); }

// 1 / (1 + exp(m)), the derivative magnitude of log1p_exp_neg.
double sigmoid_neg(double m) {
    if (m >= 0.0) {
        const double e = std::exp(-m);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(m));
}

TrainedClassifier make(Family family, ClassifierConfig cfg, ModelParams params, double theta,
                       std::size_t dim) {
    cfg.family = family;
    return TrainedClassifier(cfg, std::move(params), theta, features::Standardizer::identity(dim));
}

double infinity_norm(const LinearGradient& g) {
    double m = std::abs(g.bias);
    for (double v : g.weights) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace

std::string_view to_string(Family f) {
    switch (f) {
        case Family::logreg: return "logreg";
        case Family::linsvm: return "linsvm";
        case Family::knn: return "knn";
        case Family::adaboost: return "adaboost";
        case Family::rforest: return "rforest";
    }
    return "unknown";
}

Family parse_family(std::string_view name) {
    for (Family f : {Family::logreg, Family::linsvm, Family::knn, Family::adaboost, Family::rforest})
        if (name == to_string(f)) return f;
    throw InputError("unknown classifier family '" + std::string(name) +
                     "' (expected logreg, linsvm, knn, adaboost or rforest)");
}

bool is_linear(Family f) { return f == Family::logreg || f == Family::linsvm; }

ClassifierConfig ClassifierConfig::defaults(Family family) {
    ClassifierConfig c;
    c.family = family;
    switch (family) {
        case Family::logreg: c.C = 2.0; break;
        case Family::linsvm: c.C = 0.25; break;
        case Family::knn: c.K = 5; break;
        case Family::adaboost: c.D = 5; c.N = 100; break;
        case Family::rforest: c.D = 25; c.N = 40; break;
    }
    return c;
}

void ClassifierConfig::validate() const {
    switch (family) {
        case Family::logreg:
        case Family::linsvm:
            if (!(C > 0.0) || !std::isfinite(C)) throw ContractError("C must be a positive real");
            break;
        case Family::knn:
            if (K < 1) throw ContractError("K must be a positive integer");
            break;
        case Family::adaboost:
        case Family::rforest:
            if (D < 1) throw ContractError("tree depth D must be a positive integer");
            if (N < 1) throw ContractError("N must be a positive integer");
            break;
    }
}

std::string ClassifierConfig::describe() const {
    std::string s(to_string(family));
    auto num = [](double v) {
        std::string t = std::to_string(v);
        t.erase(t.find_last_not_of('0') + 1);
        if (t.back() == '.') t.pop_back();
        return t;
    };
    switch (family) {
        case Family::logreg:
        case Family::linsvm: return s + "(C=" + num(C) + ")";
        case Family::knn: return s + "(K=" + std::to_string(K) + ")";
        case Family::adaboost: return s + "(D=" + std::to_string(D) + ",N=" + std::to_string(N) + ")";
        case Family::rforest: return s + "(D=" + std::to_string(D) + ",N=" + std::to_string(N) + ")";
    }
    return s;
}

TrainedClassifier::TrainedClassifier(ClassifierConfig config, ModelParams params, double threshold,
                                     features::Standardizer standardizer)
    : config_(config),
      params_(std::move(params)),
      threshold_(threshold),
      standardizer_(std::move(standardizer)) {
    if (std::isnan(threshold_)) throw ContractError("classifier threshold is NaN");
    if (standardizer_.means.size() != standardizer_.stds.size())
        throw ContractError("standardizer means and stds differ in length");
}

TrainedClassifier TrainedClassifier::with_threshold(double theta) const {
    return TrainedClassifier(config_, params_, theta, standardizer_);
}

TrainedClassifier TrainedClassifier::with_standardizer(features::Standardizer s) const {
    return TrainedClassifier(config_, params_, threshold_, std::move(s));
}

double score(const TrainedClassifier& model, std::span<const double> x) {
    if (x.size() != model.dimension())
        throw ContractError("score: expected " + std::to_string(model.dimension()) +
                            " features, got " + std::to_string(x.size()));
    return std::visit(
        [&](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return dot(p.weights, x) + p.bias;
            } else if constexpr (std::is_same_v<T, KnnModel>) {
                std::vector<std::pair<double, std::size_t>> dist(p.points.rows());
                for (std::size_t i = 0; i < p.points.rows(); ++i) {
                    const auto row = p.points.row(i);
                    double s = 0.0;
                    for (std::size_t j = 0; j < x.size(); ++j) {
                        const double d = row[j] - x[j];
                        s += d * d;
                    }
                    dist[i] = {s, i};
                }
                const auto k = static_cast<std::size_t>(p.k);
                std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                                  dist.end());
                int positive = 0;
                for (std::size_t i = 0; i < k; ++i)
                    positive += p.labels[dist[i].second] == kMalignant ? 1 : 0;
                return static_cast<double>(positive) / static_cast<double>(p.k);
            } else if constexpr (std::is_same_v<T, BoostedModel>) {
                double s = 0.0;
                for (std::size_t t = 0; t < p.trees.size(); ++t)
                    s += p.alphas[t] * p.trees[t].predict(x);
                return s;
            } else {
                double s = 0.0;
                for (const auto& tree : p.trees) s += tree.positive_fraction(x);
                return s / static_cast<double>(p.trees.size());
            }
        },
        model.params());
}

int predict(const TrainedClassifier& model, std::span<const double> x) {
    return score(model, x) >= model.threshold() ? kMalignant : kBenign;
}

double score_raw(const TrainedClassifier& model, std::span<const double> raw) {
    return score(model, model.standardizer().transform(raw));
}

int predict_raw(const TrainedClassifier& model, std::span<const double> raw) {
    return score_raw(model, raw) >= model.threshold() ? kMalignant : kBenign;
}

// --- logistic regression -------------------------------------------------

double logistic_objective(const LabeledSet& data, double C, std::span<const double> w, double b) {
    const auto n = static_cast<double>(data.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        loss += log1p_exp_neg(data.labels[i] * (dot(w, data.row(i)) + b));
    return loss / n + dot(w, w) / (2.0 * C * n);
}

LinearGradient logistic_gradient(const LabeledSet& data, double C, std::span<const double> w,
                                 double b) {
    const auto n = static_cast<double>(data.size());
    LinearGradient g{std::vector<double>(w.size(), 0.0), 0.0};
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto x = data.row(i);
        const double y = data.labels[i];
        const double coef = -y * sigmoid_neg(y * (dot(w, x) + b));
        for (std::size_t j = 0; j < w.size(); ++j) g.weights[j] += coef * x[j];
        g.bias += coef;
    }
    for (std::size_t j = 0; j < w.size(); ++j) g.weights[j] = g.weights[j] / n + w[j] / (C * n);
    g.bias /= n;
    return g;
}

TrainedClassifier fit_logistic(const LabeledSet& data, double C, const LogisticOptions& opts) {
    data.validate();
    if (!(C > 0.0)) throw ContractError("fit_logistic: C must be positive");
    const std::size_t d = data.dimension();

    std::vector<double> w(d, 0.0);
    double b = 0.0;
    double f = logistic_objective(data, C, w, b);
    double step = 1.0;
    std::vector<double> w_try(d);

    for (int it = 0; it < opts.max_iterations; ++it) {
        const LinearGradient g = logistic_gradient(data, C, w, b);
        if (infinity_norm(g) < opts.gradient_tolerance) break;
        const double g_sq = dot(g.weights, g.weights) + g.bias * g.bias;

        double t = std::min(step * 2.0, 1e6);
        double f_try = f;
        double b_try = b;
        for (;;) {
            for (std::size_t j = 0; j < d; ++j) w_try[j] = w[j] - t * g.weights[j];
            b_try = b - t * g.bias;
            f_try = logistic_objective(data, C, w_try, b_try);
            if (!std::isfinite(f_try))
                throw ContractError("fit_logistic: loss became non-finite (unscaled input?)");
            if (f_try <= f - 0.5 * t * g_sq || t < 1e-16) break;
            t *= 0.5;
        }
        if (f_try > f) break;  // no descent possible at machine precision
        std::swap(w, w_try);
        b = b_try;
        f = f_try;
        step = t;
    }
    if (!std::isfinite(f)) throw ContractError("fit_logistic: loss is non-finite");

    ClassifierConfig cfg;
    cfg.C = C;
    return make(Family::logreg, cfg, LinearModel{std::move(w), b}, 0.0, d);
}

// --- linear SVM ------------------------------------------------------------

double svm_objective(const LabeledSet& data, double C, std::span<const double> w, double b) {
    double hinge = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        hinge += std::max(0.0, 1.0 - data.labels[i] * (dot(w, data.row(i)) + b));
    return 0.5 * dot(w, w) + C * hinge;
}

double svm_optimal_bias(const LabeledSet& data, std::span<const double> w) {
    // sum_i max(0, 1 - y_i (s_i + b)) is convex and piecewise linear in b with
    // one breakpoint per sample; its slope starts at -(#positives) and rises
    // by one at every breakpoint. Return the midpoint of the minimizing interval.
    const std::size_t n = data.size();
    std::vector<double> knots(n);
    double slope = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double s = dot(w, data.row(i));
        knots[i] = data.labels[i] == kMalignant ? 1.0 - s : -1.0 - s;
        if (data.labels[i] == kMalignant) slope -= 1.0;
    }
    std::sort(knots.begin(), knots.end());
    std::size_t k = 0;
    while (k < n && slope + 1.0 < 0.0) {
        slope += 1.0;
        ++k;
    }
    if (k == n) return knots.back();
    const double lo = knots[k];
    slope += 1.0;
    if (slope > 0.0 || k + 1 == n) return lo;
    return lo + (knots[k + 1] - lo) / 2.0;  // flat stretch up to the next knot
}

TrainedClassifier fit_linear_svm(const LabeledSet& data, double C, std::uint64_t seed,
                                 const SvmOptions& opts, SvmTrace* trace) {
    data.validate();
    if (!(C > 0.0)) throw ContractError("fit_linear_svm: C must be positive");
    if (opts.epochs < 1) throw ContractError("fit_linear_svm: epochs must be >= 1");
    const std::size_t n = data.size();
    const std::size_t d = data.dimension();
    const double cn = C * static_cast<double>(n);

    // The optimum satisfies ||w||^2 / 2 <= J(0, 0) = C n.
    const double w_radius = std::sqrt(2.0 * cn);

    std::vector<double> w(d, 0.0);
    std::vector<double> avg_w(d, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    double t = 0.0;
    double averaged = 0.0;

    // The bias is unregularized, so 1/t subgradient steps move it far too
    // slowly; it is instead set exactly for the current w once per epoch.
    if (trace) trace->objective.clear();
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        const double b = svm_optimal_bias(data, w);
        rng.shuffle(std::span<std::size_t>(order));
        for (std::size_t i : order) {
            t += 1.0;
            const double eta = 1.0 / t;
            const auto x = data.row(i);
            const double y = data.labels[i];
            const bool violated = y * (dot(w, x) + b) < 1.0;
            for (double& v : w) v *= 1.0 - eta;
            if (violated)
                for (std::size_t j = 0; j < d; ++j) w[j] += eta * cn * y * x[j];
            const double norm = std::sqrt(dot(w, w));
            if (norm > w_radius)
                for (double& v : w) v *= w_radius / norm;

            // Plain running mean of the iterates, skipping the first epoch.
            if (epoch == 0) {
                avg_w = w;
            } else {
                averaged += 1.0;
                for (std::size_t j = 0; j < d; ++j) avg_w[j] += (w[j] - avg_w[j]) / averaged;
            }
        }
        if (trace)
            trace->objective.push_back(svm_objective(data, C, avg_w, svm_optimal_bias(data, avg_w)));
    }

    const double bias = svm_optimal_bias(data, avg_w);
    ClassifierConfig cfg;
    cfg.C = C;
    cfg.seed = seed;
    return make(Family::linsvm, cfg, LinearModel{std::move(avg_w), bias}, 0.0, d);
}

// --- K nearest neighbours --------------------------------------------------

TrainedClassifier fit_knn(const LabeledSet& data, int K) {
    data.validate(/*require_both_classes=*/false);
    if (K < 1) throw ContractError("fit_knn: K must be positive");
    if (static_cast<std::size_t>(K) > data.size())
        throw ContractError("fit_knn: K exceeds the number of training samples");
    ClassifierConfig cfg;
    cfg.K = K;
    return make(Family::knn, cfg, KnnModel{data.features, data.labels, K}, 0.5, data.dimension());
}

// --- AdaBoost --------------------------------------------------------------

TrainedClassifier fit_adaboost(const LabeledSet& data, int D, int rounds, AdaBoostTrace* trace) {
    data.validate();
    if (D < 1) throw ContractError("fit_adaboost: depth must be >= 1");
    if (rounds < 1) throw ContractError("fit_adaboost: rounds must be >= 1");
    const std::size_t n = data.size();
    constexpr double kClamp = 1e-12;

    std::vector<double> weights(n, 1.0 / static_cast<double>(n));
    std::vector<double> ensemble(n, 0.0);
    std::vector<int> h(n);
    BoostedModel model;
    double bound = 1.0;
    if (trace) *trace = AdaBoostTrace{};

    for (int round = 0; round < rounds; ++round) {
        DecisionTree tree = fit_decision_tree(data, D, weights);
        double eps = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = tree.predict(data.row(i));
            if (h[i] != data.labels[i]) eps += weights[i];
        }
        if (eps >= 0.5) {
            if (trace) trace->stopped_early = true;
            break;
        }
        const double eps_c = std::clamp(eps, kClamp, 1.0 - kClamp);
        const double alpha = 0.5 * std::log((1.0 - eps_c) / eps_c);

        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            weights[i] *= std::exp(-alpha * data.labels[i] * h[i]);
            sum += weights[i];
        }
        for (double& w : weights) w /= sum;

        model.trees.push_back(std::move(tree));
        model.alphas.push_back(alpha);

        if (trace) {
            AdaBoostRound r;
            r.error = eps;
            r.alpha = alpha;
            bound *= 2.0 * std::sqrt(eps_c * (1.0 - eps_c));
            r.error_bound = bound;
            std::size_t wrong = 0;
            double post = 0.0;
            double wsum = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                ensemble[i] += alpha * h[i];
                if (data.labels[i] * ensemble[i] <= 0.0) ++wrong;
                if (h[i] != data.labels[i]) post += weights[i];
                wsum += weights[i];
            }
            r.training_error = static_cast<double>(wrong) / static_cast<double>(n);
            r.post_update_error = post;
            r.weight_sum = wsum;
            trace->rounds.push_back(r);
        }
        if (eps == 0.0) {
            if (trace) trace->stopped_early = round + 1 < rounds;
            break;
        }
    }

    ClassifierConfig cfg;
    cfg.D = D;
    cfg.N = rounds;
    return make(Family::adaboost, cfg, std::move(model), 0.0, data.dimension());
}

// --- random forest ---------------------------------------------------------

std::uint64_t forest_tree_seed(std::uint64_t seed, int tree) {
    return derive_seed(seed, static_cast<std::uint64_t>(tree));
}

TrainedClassifier fit_random_forest(const LabeledSet& data, int N, int D, std::uint64_t seed,
                                    const ForestOptions& opts) {
    data.validate();
    if (N < 1) throw ContractError("fit_random_forest: N must be >= 1");
    if (D < 1) throw ContractError("fit_random_forest: depth must be >= 1");
    const std::size_t n = data.size();
    const std::size_t subset =
        opts.feature_subset_size != 0
            ? opts.feature_subset_size
            : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(data.dimension()))));

    ForestModel forest;
    forest.trees.reserve(static_cast<std::size_t>(N));
    std::vector<double> weights(n);
    for (int t = 0; t < N; ++t) {
        Rng rng(forest_tree_seed(seed, t));
        if (opts.bootstrap) {
            std::fill(weights.begin(), weights.end(), 0.0);
            for (std::size_t k = 0; k < n; ++k) weights[rng.below(n)] += 1.0;
        } else {
            std::fill(weights.begin(), weights.end(), 1.0);
        }
        forest.trees.push_back(fit_decision_tree(data, D, weights, subset, &rng));
    }

    ClassifierConfig cfg;
    cfg.D = D;
    cfg.N = N;
    cfg.seed = seed;
    return make(Family::rforest, cfg, std::move(forest), 0.5, data.dimension());
}

TrainedClassifier fit(const ClassifierConfig& config, const LabeledSet& data) {
    config.validate();
    auto fitted = [&]() {
        switch (config.family) {
            case Family::logreg: return fit_logistic(data, config.C);
            case Family::linsvm: return fit_linear_svm(data, config.C, config.seed);
            case Family::knn: return fit_knn(data, config.K);
            case Family::adaboost: return fit_adaboost(data, config.D, config.N);
            case Family::rforest: return fit_random_forest(data, config.N, config.D, config.seed);
        }
        throw ContractError("unknown classifier family");
    }();
    return TrainedClassifier(config, fitted.params(), fitted.threshold(), fitted.standardizer());
}

}  // namespace nodulecad::classifiers
