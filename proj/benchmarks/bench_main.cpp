#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "nodulecad/classifiers.hpp"
#include "nodulecad/eval.hpp"
#include "nodulecad/features.hpp"
#include "nodulecad/imaging.hpp"
#include "nodulecad/modelsel.hpp"
#include "nodulecad/synthetic.hpp"

using namespace nodulecad;
using namespace nodulecad::classifiers;

namespace {

LabeledSet blobs(std::size_t n, std::size_t d, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    LabeledSet s;
    s.features = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = i % 2 == 0 ? 1 : -1;
        s.labels.push_back(y);
        for (std::size_t j = 0; j < d; ++j) s.features(i, j) = 0.6 * y + noise(gen);
    }
    return s;
}

imaging::Polygon circle(double cx, double cy, double r, int vertices) {
    std::vector<imaging::Point> pts;
    for (int k = 0; k < vertices; ++k) {
        const double a = 2.0 * std::numbers::pi * k / vertices;
        pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    return imaging::Polygon(pts);
}

void BM_Rasterize(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const auto poly = circle(size / 2.0, size / 2.0, size * 0.4, 64);
    for (auto _ : state) benchmark::DoNotOptimize(imaging::rasterize_polygon(poly, size, size));
}
BENCHMARK(BM_Rasterize)->Arg(64)->Arg(256);

void BM_GeometricFeatures(benchmark::State& state) {
    const int size = static_cast<int>(state.range(0));
    const auto mask = imaging::rasterize_polygon(circle(size / 2.0, size / 2.0, size * 0.4, 64),
                                                 size, size);
    for (auto _ : state) benchmark::DoNotOptimize(features::geometric_features(mask, 0.7, 0.7));
}
BENCHMARK(BM_GeometricFeatures)->Arg(32)->Arg(128);

void BM_ExtractFeatures(benchmark::State& state) {
    const auto nod = data::generate_synthetic(1, 1, 64, 7).back();
    const auto img = imaging::normalize_intensity(nod.image, data::kSyntheticMax, nod.spacing,
                                                  nod.spacing);
    const std::vector<imaging::Polygon> polys{imaging::Polygon(nod.contour)};
    for (auto _ : state) benchmark::DoNotOptimize(features::extract_features(img, polys));
}
BENCHMARK(BM_ExtractFeatures);

void BM_RocAuc(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    std::mt19937 gen(3);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t i = 0; i < n; ++i) {
        labels.push_back(i % 2 == 0 ? 1 : -1);
        scores.push_back(labels.back() + noise(gen));
    }
    for (auto _ : state) benchmark::DoNotOptimize(eval::auc(eval::roc_curve(scores, labels)));
}
BENCHMARK(BM_RocAuc)->Arg(100)->Arg(10000);

void BM_FitTree(benchmark::State& state) {
    const LabeledSet s = blobs(200, 29, 4);
    const std::vector<double> w(s.size(), 1.0);
    const int depth = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(fit_decision_tree(s, depth, w));
}
BENCHMARK(BM_FitTree)->Arg(1)->Arg(5)->Arg(25);

void BM_FitFamily(benchmark::State& state) {
    const LabeledSet s = blobs(200, 29, 5);
    const auto family = static_cast<Family>(state.range(0));
    ClassifierConfig c = ClassifierConfig::defaults(family);
    c.seed = 1;
    state.SetLabel(std::string(to_string(family)));
    for (auto _ : state) benchmark::DoNotOptimize(fit(c, s));
}
BENCHMARK(BM_FitFamily)->DenseRange(0, 4)->Unit(benchmark::kMillisecond);

void BM_ScoreFamily(benchmark::State& state) {
    const LabeledSet s = blobs(200, 29, 6);
    const auto family = static_cast<Family>(state.range(0));
    ClassifierConfig c = ClassifierConfig::defaults(family);
    c.seed = 1;
    const TrainedClassifier m = fit(c, s);
    state.SetLabel(std::string(to_string(family)));
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(score(m, s.row(i)));
        i = (i + 1) % s.size();
    }
}
BENCHMARK(BM_ScoreFamily)->DenseRange(0, 4);

void BM_GridSearch(benchmark::State& state) {
    const LabeledSet s = blobs(150, 29, 8);
    const auto grid = modelsel::default_grid(Family::knn);
    const modelsel::SearchOptions opts{.folds = 5, .seed = 1, .threads = 1, .observer = {}};
    for (auto _ : state) benchmark::DoNotOptimize(modelsel::grid_search(grid, s, opts));
}
BENCHMARK(BM_GridSearch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
