#pragma once

// Shared fixtures and brute-force oracles for the test binaries. Oracles here
// are written independently of the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "nodulecad/classifiers.hpp"
#include "nodulecad/features.hpp"
#include "nodulecad/imaging.hpp"
#include "nodulecad/matrix.hpp"
#include "nodulecad/synthetic.hpp"

namespace testing {

namespace fs = std::filesystem;
using nodulecad::Matrix;
using nodulecad::classifiers::LabeledSet;
using nodulecad::imaging::Mask;
using nodulecad::imaging::Point;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = fs::temp_directory_path() /
                ("nodulecad-" + tag + "-" + std::to_string(::getpid()) + "-" +
                 std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

/// Two Gaussian blobs in d dimensions, centers at -sep/2 and +sep/2 along
/// every axis. Labels alternate so both classes are always present.
inline LabeledSet gaussian_blobs(std::size_t n, std::size_t d, double sep, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    LabeledSet s;
    s.features = Matrix(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const int y = i % 2 == 0 ? 1 : -1;
        s.labels.push_back(y);
        for (std::size_t j = 0; j < d; ++j) s.features(i, j) = y * sep / 2.0 + noise(gen);
    }
    return s;
}

/// Random binary mask, each pixel true with probability p; at least one pixel set.
inline Mask random_mask(int w, int h, double p, std::mt19937& gen) {
    std::bernoulli_distribution bit(p);
    Mask m(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (bit(gen)) m.set(c, r);
    if (m.empty()) m.set(w / 2, h / 2);
    return m;
}

/// Crossing-number point-in-polygon test with an explicit on-edge check.
inline bool inside_even_odd(const std::vector<Point>& poly, double x, double y) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = poly[i];
        const Point b = poly[(i + 1) % n];
        const double cross = (b.col - a.col) * (y - a.row) - (b.row - a.row) * (x - a.col);
        if (std::abs(cross) < 1e-9 && x >= std::min(a.col, b.col) - 1e-9 &&
            x <= std::max(a.col, b.col) + 1e-9 && y >= std::min(a.row, b.row) - 1e-9 &&
            y <= std::max(a.row, b.row) + 1e-9)
            return true;
    }
    bool in = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = poly[i];
        const Point b = poly[j];
        if ((a.row > y) != (b.row > y)) {
            const double xc = a.col + (y - a.row) * (b.col - a.col) / (b.row - a.row);
            if (x < xc) in = !in;
        }
    }
    return in;
}

inline Mask brute_force_raster(const std::vector<Point>& poly, int w, int h) {
    Mask m(w, h);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            if (inside_even_odd(poly, c, r)) m.set(c, r);
    return m;
}

/// Boundary by scanning the four neighbours of every pixel.
inline std::vector<std::pair<int, int>> brute_force_boundary(const Mask& m) {
    std::vector<std::pair<int, int>> out;
    for (int r = 0; r < m.height(); ++r)
        for (int c = 0; c < m.width(); ++c) {
            if (!m.at(c, r)) continue;
            const int dc[] = {1, -1, 0, 0};
            const int dr[] = {0, 0, 1, -1};
            bool edge = false;
            for (int k = 0; k < 4; ++k) {
                const int cc = c + dc[k];
                const int rr = r + dr[k];
                if (cc < 0 || rr < 0 || cc >= m.width() || rr >= m.height() || !m.at(cc, rr))
                    edge = true;
            }
            if (edge) out.emplace_back(c, r);
        }
    return out;
}

/// Mann-Whitney statistic by comparing every positive/negative pair.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (labels[i] != 1) continue;
        for (std::size_t j = 0; j < scores.size(); ++j) {
            if (labels[j] != -1) continue;
            pairs += 1.0;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

/// F-measure of (score >= theta) evaluated directly from counts.
inline double f_at(const std::vector<double>& scores, const std::vector<int>& labels,
                   double theta) {
    double tp = 0, fn = 0, tn = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const bool pos = scores[i] >= theta;
        if (labels[i] == 1) (pos ? tp : fn) += 1;
        else (pos ? fp : tn) += 1;
    }
    const double se = tp / (tp + fn);
    const double sp = tn / (tn + fp);
    return se + sp == 0.0 ? 0.0 : 2.0 * se * sp / (se + sp);
}

/// Generated nodules run through normalization and feature extraction in
/// memory, with labels from the diagnosis codes.
inline LabeledSet synthetic_features(int n_benign, int n_malignant, std::uint64_t seed) {
    LabeledSet s;
    for (const auto& nod : nodulecad::data::generate_synthetic(n_benign, n_malignant, 64, seed)) {
        const auto img = nodulecad::imaging::normalize_intensity(
            nod.image, nodulecad::data::kSyntheticMax, nod.spacing, nod.spacing);
        const std::vector<nodulecad::imaging::Polygon> polys{nodulecad::imaging::Polygon(nod.contour)};
        const auto fv = nodulecad::features::extract_features(img, polys);
        s.features.append_row(fv.values);
        s.labels.push_back(*nodulecad::data::label_for_diagnosis(nod.diagnosis));
    }
    return s;
}

}  // namespace testing
