#include "nodulecad/modelsel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>
#include <string>
#include <thread>

namespace nodulecad::modelsel {

using classifiers::ClassifierConfig;
using classifiers::Family;
using classifiers::LabeledSet;

std::vector<std::size_t> FoldPlan::validation_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) out.push_back(i);
    return out;
}

std::vector<std::size_t> FoldPlan::training_indices(int fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) out.push_back(i);
    return out;
}

FoldPlan kfold_split(std::span<const int> labels, int k, std::uint64_t seed) {
    if (k < 2) throw ContractError("kfold_split: k must be at least 2");
    std::vector<std::size_t> pos;
    std::vector<std::size_t> neg;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (!is_valid_label(labels[i])) throw ContractError("kfold_split: invalid label");
        (labels[i] == kMalignant ? pos : neg).push_back(i);
    }
    const auto kk = static_cast<std::size_t>(k);
    if (pos.size() < kk || neg.size() < kk)
        throw ContractError("kfold_split: each class needs at least k=" + std::to_string(k) +
                            " members (positives=" + std::to_string(pos.size()) +
                            ", negatives=" + std::to_string(neg.size()) + ")");

    FoldPlan plan{k, std::vector<int>(labels.size(), -1), seed, true};
    Rng rng(seed);
    std::size_t next = 0;
    for (auto* group : {&pos, &neg}) {
        rng.shuffle(std::span<std::size_t>(*group));
        for (std::size_t i : *group) plan.assignments[i] = static_cast<int>(next++ % kk);
    }
    return plan;
}

double tune_threshold(std::span<const double> scores, std::span<const int> truth) {
    if (scores.size() != truth.size()) throw ContractError("tune_threshold: length mismatch");
    std::size_t pos = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!is_valid_label(truth[i])) throw ContractError("tune_threshold: invalid label");
        if (std::isnan(scores[i])) throw ContractError("tune_threshold: NaN score");
        if (truth[i] == kMalignant) ++pos;
    }
    const std::size_t neg = truth.size() - pos;
    if (pos == 0 || neg == 0) throw ContractError("tune_threshold: both classes must be present");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    // Sweep thresholds upward. Below the smallest score everything is
    // positive; each step past a group of tied scores turns that group negative.
    auto f_of = [&](std::size_t tp, std::size_t tn) {
        return eval::f_measure(static_cast<double>(tp) / static_cast<double>(pos),
                               static_cast<double>(tn) / static_cast<double>(neg));
    };
    std::size_t tp = pos;
    std::size_t tn = 0;
    double best_theta = -std::numeric_limits<double>::infinity();
    double best_f = f_of(tp, tn);

    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        for (; k < order.size() && scores[order[k]] == s; ++k)
            truth[order[k]] == kMalignant ? --tp : ++tn;
        double theta = std::numeric_limits<double>::infinity();
        if (k < order.size()) {
            const double next = scores[order[k]];
            theta = s + (next - s) / 2.0;
            if (!(theta > s)) theta = next;  // adjacent doubles have no midpoint
        }
        const double f = f_of(tp, tn);
        if (f > best_f) {
            best_f = f;
            best_theta = theta;
        }
    }
    return best_theta;
}

namespace {

struct FoldOutput {
    std::vector<std::size_t> indices;
    std::vector<double> scores;
};

double population_std(std::span<const double> v, double mean) {
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

SearchResult grid_search(std::span<const ClassifierConfig> grid, const LabeledSet& train,
                         const SearchOptions& opts) {
    if (grid.empty()) throw ContractError("grid_search: empty grid");
    train.validate();
    for (const auto& c : grid) c.validate();

    const FoldPlan plan = kfold_split(train.labels, opts.folds, opts.seed);
    const std::size_t folds = static_cast<std::size_t>(opts.folds);
    const std::size_t tasks = grid.size() * folds;

    std::vector<FoldOutput> outputs(tasks);
    std::vector<std::exception_ptr> errors(tasks);
    std::atomic<std::size_t> cursor{0};

    auto worker = [&] {
        for (std::size_t t; (t = cursor.fetch_add(1)) < tasks;) {
            const std::size_t cand = t / folds;
            const int fold = static_cast<int>(t % folds);
            try {
                const auto train_idx = plan.training_indices(fold);
                const auto valid_idx = plan.validation_indices(fold);
                const LabeledSet part = train.subset(train_idx);
                const auto standardizer = features::fit_standardizer(part.features);
                if (opts.observer) opts.observer(cand, fold, standardizer, train_idx);

                LabeledSet scaled{standardizer.transform(part.features), part.labels};
                const auto model = classifiers::fit(grid[cand], scaled)
                                       .with_standardizer(standardizer);
                FoldOutput out{valid_idx, {}};
                out.scores.reserve(valid_idx.size());
                for (std::size_t i : valid_idx)
                    out.scores.push_back(classifiers::score_raw(model, train.row(i)));
                outputs[t] = std::move(out);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };

    unsigned threads = opts.threads != 0 ? opts.threads : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(tasks));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    }

    for (std::size_t t = 0; t < tasks; ++t) {
        if (!errors[t]) continue;
        const std::string where = grid[t / folds].describe() + ", fold " +
                                  std::to_string(t % folds);
        try {
            std::rethrow_exception(errors[t]);
        } catch (const InputError& e) {
            throw InputError("grid_search [" + where + "]: " + e.what());
        } catch (const ContractError& e) {
            throw ContractError("grid_search [" + where + "]: " + e.what());
        }
    }

    SearchResult result;
    result.table.reserve(grid.size());
    for (std::size_t cand = 0; cand < grid.size(); ++cand) {
        std::vector<double> pooled(train.size());
        for (std::size_t f = 0; f < folds; ++f) {
            const auto& out = outputs[cand * folds + f];
            for (std::size_t k = 0; k < out.indices.size(); ++k) pooled[out.indices[k]] = out.scores[k];
        }

        CandidateResult row;
        row.config = grid[cand];
        row.theta = tune_threshold(pooled, train.labels);

        auto predictions = [&](std::span<const double> s) {
            std::vector<int> p(s.size());
            for (std::size_t i = 0; i < s.size(); ++i) p[i] = s[i] >= row.theta ? kMalignant : kBenign;
            return p;
        };
        row.pooled_f = eval::metrics(eval::confusion(train.labels, predictions(pooled))).f_measure;
        row.pooled_auc = eval::auc(eval::roc_curve(pooled, train.labels));

        std::vector<double> fold_f;
        for (std::size_t f = 0; f < folds; ++f) {
            const auto& out = outputs[cand * folds + f];
            std::vector<int> truth;
            for (std::size_t i : out.indices) truth.push_back(train.labels[i]);
            try {
                fold_f.push_back(eval::metrics(eval::confusion(truth, predictions(out.scores))).f_measure);
            } catch (const ContractError& e) {
                throw ContractError("grid_search [" + row.config.describe() + ", fold " +
                                    std::to_string(f) + "]: " + e.what());
            }
        }
        row.mean_f = std::accumulate(fold_f.begin(), fold_f.end(), 0.0) /
                     static_cast<double>(fold_f.size());
        row.std_f = population_std(fold_f, row.mean_f);

        if (cand == 0 || row.mean_f > result.table[result.best_index].mean_f) result.best_index = cand;
        result.table.push_back(row);
    }
    result.best = result.table[result.best_index].config;
    result.best_theta = result.table[result.best_index].theta;
    return result;
}

classifiers::TrainedClassifier train_final(const ClassifierConfig& config, double theta,
                                           const LabeledSet& train) {
    train.validate();
    if (std::isnan(theta)) throw ContractError("train_final: threshold is missing");
    const auto standardizer = features::fit_standardizer(train.features);
    LabeledSet scaled{standardizer.transform(train.features), train.labels};
    return classifiers::fit(config, scaled).with_standardizer(standardizer).with_threshold(theta);
}

std::vector<ClassifierConfig> default_grid(Family family, std::uint64_t seed) {
    std::vector<ClassifierConfig> grid;
    auto add = [&](auto&& tweak) {
        ClassifierConfig c = ClassifierConfig::defaults(family);
        c.seed = seed;
        tweak(c);
        grid.push_back(c);
    };
    switch (family) {
        case Family::logreg:
            for (double C : {0.25, 0.5, 1.0, 2.0, 4.0}) add([&](auto& c) { c.C = C; });
            break;
        case Family::linsvm:
            for (double C : {0.0625, 0.125, 0.25, 0.5, 1.0, 2.0}) add([&](auto& c) { c.C = C; });
            break;
        case Family::knn:
            for (int K : {1, 3, 5, 7, 9}) add([&](auto& c) { c.K = K; });
            break;
        case Family::adaboost:
            for (int D : {1, 2, 3, 5, 7}) add([&](auto& c) { c.D = D; });
            break;
        case Family::rforest:
            for (int D : {5, 10, 25, 40})
                for (int N : {10, 20, 40, 80}) add([&](auto& c) { c.D = D; c.N = N; });
            break;
    }
    return grid;
}

}  // namespace nodulecad::modelsel
