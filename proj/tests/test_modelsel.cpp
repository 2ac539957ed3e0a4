#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <random>
#include <set>

#include "nodulecad/modelsel.hpp"
#include "support.hpp"

using namespace nodulecad;
using namespace nodulecad::classifiers;
using namespace nodulecad::modelsel;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<int> balanced_labels(std::size_t pos, std::size_t neg) {
    std::vector<int> y(pos, 1);
    y.insert(y.end(), neg, -1);
    return y;
}

// Every candidate threshold scored directly; strict improvement keeps the
// smallest theta among equals.
double oracle_threshold(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<double> u = scores;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<double> candidates{-kInf};
    for (std::size_t i = 0; i + 1 < u.size(); ++i) candidates.push_back((u[i] + u[i + 1]) / 2.0);
    candidates.push_back(kInf);

    double best = candidates.front();
    double best_f = testing::f_at(scores, labels, best);
    for (double c : candidates) {
        const double f = testing::f_at(scores, labels, c);
        if (f > best_f) {
            best_f = f;
            best = c;
        }
    }
    return best;
}

std::vector<double> column_means(const LabeledSet& s, std::span<const std::size_t> rows) {
    std::vector<double> m(s.dimension(), 0.0);
    for (std::size_t i : rows)
        for (std::size_t j = 0; j < s.dimension(); ++j) m[j] += s.features(i, j);
    for (double& v : m) v /= static_cast<double>(rows.size());
    return m;
}

}  // namespace

TEST_SUITE("modelsel") {

TEST_CASE("ten balanced samples give one of each class per fold") {
    const auto labels = balanced_labels(5, 5);
    const FoldPlan plan = kfold_split(labels, 5, 3);
    for (int f = 0; f < 5; ++f) {
        const auto val = plan.validation_indices(f);
        REQUIRE(val.size() == 2);
        CHECK(labels[val[0]] + labels[val[1]] == 0);
    }
}

TEST_CASE("folds partition the samples and stay stratified") {
    std::mt19937 gen(12);
    std::uniform_int_distribution<std::size_t> count(5, 90);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + trial % 6;
        auto labels = balanced_labels(std::max<std::size_t>(count(gen), k),
                                      std::max<std::size_t>(count(gen), k));
        std::shuffle(labels.begin(), labels.end(), gen);
        const FoldPlan plan = kfold_split(labels, k, trial);
        REQUIRE(plan.assignments.size() == labels.size());

        std::vector<int> seen(labels.size(), 0);
        std::vector<std::size_t> sizes, positives;
        const double pos_total = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
        for (int f = 0; f < k; ++f) {
            const auto val = plan.validation_indices(f);
            const auto tr = plan.training_indices(f);
            CHECK(val.size() + tr.size() == labels.size());
            for (std::size_t i : val) ++seen[i];
            sizes.push_back(val.size());
            positives.push_back(static_cast<std::size_t>(
                std::count_if(val.begin(), val.end(), [&](std::size_t i) { return labels[i] == 1; })));
            for (std::size_t i : tr) CHECK(plan.assignments[i] != f);
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
        const auto [smin, smax] = std::minmax_element(sizes.begin(), sizes.end());
        CHECK(*smax - *smin <= 1);
        for (std::size_t p : positives) CHECK(std::abs(double(p) - pos_total / k) < 1.0 + 1e-12);

        CHECK(kfold_split(labels, k, trial).assignments == plan.assignments);
    }
}

TEST_CASE("fold errors") {
    CHECK_THROWS_AS(kfold_split(balanced_labels(10, 10), 1, 0), ContractError);
    CHECK_THROWS_AS(kfold_split(balanced_labels(4, 10), 5, 0), ContractError);
    CHECK_NOTHROW(kfold_split(balanced_labels(5, 10), 5, 0));
}

TEST_CASE("threshold on the four-score example") {
    const std::vector<double> scores{0.2, 0.4, 0.6, 0.8};
    const std::vector<int> labels{-1, 1, -1, 1};
    const double theta = tune_threshold(scores, labels);
    CHECK(theta == oracle_threshold(scores, labels));
    CHECK(theta == doctest::Approx(0.3));
    CHECK(testing::f_at(scores, labels, theta) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("threshold on separable and constant scores") {
    CHECK(tune_threshold(std::vector<double>{0.1, 0.2, 0.7, 0.9}, std::vector<int>{-1, -1, 1, 1}) ==
          doctest::Approx(0.45));

    // All-positive and all-negative both give F = 0; the smaller theta wins.
    const std::vector<double> same{0.5, 0.5, 0.5};
    CHECK(tune_threshold(same, std::vector<int>{1, -1, -1}) == -kInf);
    CHECK(oracle_threshold(same, {1, -1, -1}) == -kInf);

    CHECK_THROWS_AS(tune_threshold(same, std::vector<int>{1, 1, 1}), ContractError);
    CHECK_THROWS_AS(tune_threshold(same, std::vector<int>{1, -1}), ContractError);
}

TEST_CASE("threshold matches exhaustive enumeration") {
    std::mt19937 gen(31);
    std::uniform_int_distribution<std::size_t> size(2, 80);
    std::uniform_int_distribution<int> level(0, 40);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = size(gen);
        std::vector<double> scores;
        std::vector<int> labels;
        for (std::size_t i = 0; i < n; ++i) {
            labels.push_back(i == 0 ? 1 : i == 1 ? -1 : (gen() % 2 ? 1 : -1));
            // Dyadic scores keep midpoints exact so theta can be compared bit for bit.
            scores.push_back(level(gen) / 32.0 + (labels.back() == 1 ? 0.25 : 0.0));
        }
        REQUIRE(tune_threshold(scores, labels) == oracle_threshold(scores, labels));
    }
}

TEST_CASE("threshold between adjacent doubles stays strict") {
    const double a = 1.0;
    const double b = std::nextafter(a, 2.0);
    const double theta = tune_threshold(std::vector<double>{a, b}, std::vector<int>{-1, 1});
    CHECK(theta > a);
    CHECK(theta <= b);
}

TEST_CASE("singleton grid and duplicated candidates") {
    const LabeledSet s = testing::gaussian_blobs(60, 4, 2.0, 4);
    const std::vector<ClassifierConfig> one{ClassifierConfig::defaults(Family::knn)};
    const SearchResult r1 = grid_search(one, s, {.folds = 5, .seed = 1, .threads = 1});
    CHECK(r1.best == one[0]);
    CHECK(r1.best_index == 0);
    REQUIRE(r1.table.size() == 1);
    CHECK(r1.best_theta == r1.table[0].theta);

    ClassifierConfig k3 = ClassifierConfig::defaults(Family::knn);
    k3.K = 3;
    const std::vector<ClassifierConfig> dup{k3, k3, k3};
    const SearchResult r2 = grid_search(dup, s, {.folds = 5, .seed = 1, .threads = 2});
    CHECK(r2.best_index == 0);
    CHECK(r2.table[0].mean_f == r2.table[2].mean_f);

    CHECK_THROWS_AS(grid_search(std::vector<ClassifierConfig>{}, s), ContractError);
}

TEST_CASE("search table statistics") {
    const LabeledSet s = testing::gaussian_blobs(80, 3, 1.5, 9);
    const auto grid = default_grid(Family::knn);
    const SearchResult r = grid_search(grid, s, {.folds = 4, .seed = 2, .threads = 1});
    REQUIRE(r.table.size() == grid.size());
    double best = -1.0;
    for (std::size_t i = 0; i < r.table.size(); ++i) {
        const auto& row = r.table[i];
        CHECK(row.config == grid[i]);
        CHECK(row.mean_f >= 0.0);
        CHECK(row.mean_f <= 1.0);
        CHECK(row.std_f >= 0.0);
        CHECK(row.pooled_auc >= 0.5);
        best = std::max(best, row.mean_f);
    }
    CHECK(r.table[r.best_index].mean_f == best);
    for (std::size_t i = 0; i < r.best_index; ++i) CHECK(r.table[i].mean_f < best);
}

TEST_CASE("fold standardizers see only their training rows") {
    LabeledSet s = testing::gaussian_blobs(50, 3, 1.0, 21);
    for (std::size_t i = 0; i < s.size(); ++i) s.features(i, 1) += 100.0 * double(i);

    std::mutex mu;
    int calls = 0;
    const FoldPlan plan = kfold_split(s.labels, 5, 8);
    SearchOptions opts{.folds = 5, .seed = 8, .threads = 3};
    opts.observer = [&](std::size_t, int fold, const features::Standardizer& st,
                        std::span<const std::size_t> rows) {
        const auto expected_rows = plan.training_indices(fold);
        const auto means = column_means(s, rows);
        std::lock_guard lock(mu);
        ++calls;
        CHECK(std::vector<std::size_t>(rows.begin(), rows.end()) == expected_rows);
        for (std::size_t j = 0; j < means.size(); ++j)
            CHECK(st.means[j] == doctest::Approx(means[j]).epsilon(1e-12));
    };
    const std::vector<ClassifierConfig> grid{ClassifierConfig::defaults(Family::logreg),
                                             ClassifierConfig::defaults(Family::knn)};
    grid_search(grid, s, opts);
    CHECK(calls == 10);
}

TEST_CASE("thread count does not change the result") {
    const LabeledSet s = testing::gaussian_blobs(70, 5, 1.2, 13);
    std::vector<ClassifierConfig> grid = default_grid(Family::rforest, 4);
    grid.resize(5);
    const auto logreg = default_grid(Family::logreg);
    grid.insert(grid.end(), logreg.begin(), logreg.end());

    const SearchResult a = grid_search(grid, s, {.folds = 5, .seed = 6, .threads = 1});
    const SearchResult b = grid_search(grid, s, {.folds = 5, .seed = 6, .threads = 4});
    CHECK(a.best_index == b.best_index);
    CHECK(a.best_theta == b.best_theta);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(a.table[i].mean_f == b.table[i].mean_f);
        CHECK(a.table[i].std_f == b.table[i].std_f);
        CHECK(a.table[i].pooled_auc == b.table[i].pooled_auc);
        CHECK(a.table[i].theta == b.table[i].theta);
    }
}

TEST_CASE("default grids contain the family defaults") {
    auto has = [](Family f, auto pred) {
        const auto g = default_grid(f);
        return std::any_of(g.begin(), g.end(), pred);
    };
    CHECK(has(Family::logreg, [](const ClassifierConfig& c) { return c.C == 2.0; }));
    CHECK(has(Family::linsvm, [](const ClassifierConfig& c) { return c.C == 0.25; }));
    CHECK(has(Family::knn, [](const ClassifierConfig& c) { return c.K == 5; }));
    CHECK(has(Family::adaboost, [](const ClassifierConfig& c) { return c.D == 5; }));
    CHECK(has(Family::rforest, [](const ClassifierConfig& c) { return c.D == 25 && c.N == 40; }));

    std::set<double> logreg_c, svm_c;
    for (const auto& c : default_grid(Family::logreg)) logreg_c.insert(c.C);
    for (const auto& c : default_grid(Family::linsvm)) svm_c.insert(c.C);
    CHECK(logreg_c == std::set<double>{0.25, 0.5, 1, 2, 4});
    CHECK(svm_c == std::set<double>{0.0625, 0.125, 0.25, 0.5, 1, 2});
    CHECK(default_grid(Family::knn).size() == 5);
    CHECK(default_grid(Family::adaboost).size() == 5);
    CHECK(default_grid(Family::rforest).size() == 16);
    for (Family f : {Family::logreg, Family::linsvm, Family::knn, Family::adaboost,
                     Family::rforest})
        for (const auto& c : default_grid(f)) {
            CHECK(c.family == f);
            CHECK_NOTHROW(c.validate());
        }
}

TEST_CASE("final model carries the tuned theta and the full-data standardizer") {
    const LabeledSet s = testing::gaussian_blobs(60, 4, 1.5, 17);
    ClassifierConfig c = ClassifierConfig::defaults(Family::rforest);
    c.N = 10;
    c.seed = 5;
    const TrainedClassifier m = train_final(c, 0.375, s);
    CHECK(m.threshold() == 0.375);
    CHECK(m.config() == c);
    CHECK(m.standardizer() == features::fit_standardizer(s.features));
    CHECK(train_final(c, 0.375, s) == m);
}

TEST_CASE("adaboost selection on synthetic nodules") {
    const LabeledSet s = testing::synthetic_features(100, 100, 42);
    const SearchResult r = grid_search(default_grid(Family::adaboost), s, {.folds = 5, .seed = 44});
    CHECK(r.table[r.best_index].mean_f >= 0.95);
}

}  // TEST_SUITE
