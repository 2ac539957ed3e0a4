#include "nodulecad/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

namespace nodulecad::features {

namespace {

std::string indexed(const char* prefix, int i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%s%02d", prefix, i);
    return buf;
}

void l1_normalize(std::vector<double>& bins) {
    double total = 0.0;
    for (double b : bins) total += b;
    if (total > 0.0)
        for (double& b : bins) b /= total;
}

long long cross(const imaging::Pixel& o, const imaging::Pixel& a, const imaging::Pixel& b) {
    return static_cast<long long>(a.col - o.col) * (b.row - o.row) -
           static_cast<long long>(a.row - o.row) * (b.col - o.col);
}

// Andrew's monotone chain; input need not be sorted. Collinear points dropped.
std::vector<imaging::Pixel> convex_hull(std::vector<imaging::Pixel> pts) {
    std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.col != b.col ? a.col < b.col : a.row < b.row;
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<imaging::Pixel> hull(2 * pts.size());
    std::size_t k = 0;
    for (const auto& p : pts) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
        hull[k++] = p;
    }
    for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
        while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
        hull[k++] = pts[i];
    }
    hull.resize(k - 1);
    return hull;
}

}  // namespace

std::vector<std::string> FeatureLayout::column_names() const {
    std::vector<std::string> names{"f_diam_mm", "f_aspect", "f_area_mm2", "f_perim_mm"};
    for (int i = 0; i < gray_bins; ++i) names.push_back(indexed("f_gh_", i));
    for (int i = 0; i < gradient_bins; ++i) names.push_back(indexed("f_ogh_", i));
    return names;
}

GeometricFeatures geometric_features(const imaging::Mask& mask, double spacing_x,
                                     double spacing_y) {
    if (!(spacing_x > 0.0) || !(spacing_y > 0.0))
        throw InputError("geometric_features: pixel spacing must be positive");
    const imaging::Rect box = mask.bounding_box();  // throws on empty
    const auto boundary = imaging::boundary_pixels(mask);

    GeometricFeatures g;
    g.area_mm2 = static_cast<double>(mask.count()) * spacing_x * spacing_y;
    g.perimeter_mm = static_cast<double>(boundary.size()) * (spacing_x + spacing_y) / 2.0;
    g.aspect_ratio = (box.height() * spacing_y) / (box.width() * spacing_x);

    // The farthest pair of a point set is always a pair of hull vertices, and
    // the anisotropic mm scaling is linear so it preserves hull membership.
    const auto hull = convex_hull(boundary);
    double best_sq = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i) {
        for (std::size_t j = i + 1; j < hull.size(); ++j) {
            const double dx = (hull[i].col - hull[j].col) * spacing_x;
            const double dy = (hull[i].row - hull[j].row) * spacing_y;
            best_sq = std::max(best_sq, dx * dx + dy * dy);
        }
    }
    g.diameter_mm = best_sq > 0.0 ? std::sqrt(best_sq) : (spacing_x + spacing_y) / 2.0;
    return g;
}

Histogram gray_histogram(const imaging::GrayImage& img, int bins) {
    if (bins < 1) throw ContractError("gray_histogram: bin count must be >= 1");
    Histogram h{std::vector<double>(static_cast<std::size_t>(bins), 0.0), HistogramKind::gray};
    for (double v : img.pixels()) {
        const int b = std::min(bins - 1, static_cast<int>(std::floor(v * bins / 256.0)));
        h.bins[static_cast<std::size_t>(b)] += 1.0;
    }
    l1_normalize(h.bins);
    return h;
}

Histogram oriented_gradient_histogram(const imaging::GrayImage& img, int bins) {
    if (bins < 1) throw ContractError("oriented_gradient_histogram: bin count must be >= 1");
    if (img.width() < 2 || img.height() < 2)
        throw ContractError("oriented_gradient_histogram: image must be at least 2x2");

    Histogram h{std::vector<double>(static_cast<std::size_t>(bins), 0.0), HistogramKind::gradient};
    const int w = img.width();
    const int ht = img.height();
    for (int row = 0; row < ht; ++row) {
        const int up = std::max(row - 1, 0);
        const int down = std::min(row + 1, ht - 1);
        for (int col = 0; col < w; ++col) {
            const int left = std::max(col - 1, 0);
            const int right = std::min(col + 1, w - 1);
            const double gx = (img.at(right, row) - img.at(left, row)) / 2.0;
            const double gy = (img.at(col, down) - img.at(col, up)) / 2.0;
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double phi = std::atan2(gy, gx);
            if (phi < 0.0) phi += std::numbers::pi;
            if (phi >= std::numbers::pi) phi -= std::numbers::pi;
            const int b =
                std::min(bins - 1, static_cast<int>(std::floor(phi * bins / std::numbers::pi)));
            h.bins[static_cast<std::size_t>(b)] += mag;
        }
    }
    l1_normalize(h.bins);
    return h;
}

FeatureVector assemble_feature_vector(const GeometricFeatures& geo, const Histogram& gray,
                                      const Histogram& gradient, const FeatureLayout& layout) {
    if (gray.kind != HistogramKind::gray ||
        gray.bins.size() != static_cast<std::size_t>(layout.gray_bins))
        throw ContractError("assemble_feature_vector: gray histogram must have " +
                            std::to_string(layout.gray_bins) + " bins");
    if (gradient.kind != HistogramKind::gradient ||
        gradient.bins.size() != static_cast<std::size_t>(layout.gradient_bins))
        throw ContractError("assemble_feature_vector: gradient histogram must have " +
                            std::to_string(layout.gradient_bins) + " bins");

    FeatureVector fv;
    fv.values.reserve(layout.dimension());
    fv.values = {geo.diameter_mm, geo.aspect_ratio, geo.area_mm2, geo.perimeter_mm};
    fv.values.insert(fv.values.end(), gray.bins.begin(), gray.bins.end());
    fv.values.insert(fv.values.end(), gradient.bins.begin(), gradient.bins.end());
    for (double v : fv.values)
        if (!std::isfinite(v)) throw ContractError("assemble_feature_vector: non-finite feature");
    return fv;
}

FeatureVector extract_features(const imaging::GrayImage& img,
                               std::span<const imaging::Polygon> polygons, double margin,
                               const FeatureLayout& layout) {
    if (polygons.empty()) throw InputError("nodule has no annotation polygons");
    std::vector<imaging::Mask> masks;
    masks.reserve(polygons.size());
    for (const auto& p : polygons)
        masks.push_back(imaging::rasterize_polygon(p, img.width(), img.height()));
    const imaging::Mask roi = imaging::union_masks(masks);

    const auto geo = geometric_features(roi, img.spacing_x(), img.spacing_y());
    const auto patch = imaging::crop_with_margin(img, roi, margin);
    return assemble_feature_vector(geo, gray_histogram(patch, layout.gray_bins),
                                   oriented_gradient_histogram(patch, layout.gradient_bins),
                                   layout);
}

Standardizer Standardizer::identity(std::size_t dim) {
    return Standardizer{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
}

std::vector<double> Standardizer::transform(std::span<const double> v) const {
    if (v.size() != means.size())
        throw ContractError("Standardizer: expected " + std::to_string(means.size()) +
                            " values, got " + std::to_string(v.size()));
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - means[j]) / stds[j];
    return out;
}

std::vector<double> Standardizer::inverse(std::span<const double> v) const {
    if (v.size() != means.size()) throw ContractError("Standardizer: width mismatch");
    std::vector<double> out(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] * stds[j] + means[j];
    return out;
}

Matrix Standardizer::transform(const Matrix& m) const {
    if (m.cols() != means.size()) throw ContractError("Standardizer: width mismatch");
    Matrix out(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = (m(i, j) - means[j]) / stds[j];
    return out;
}

Standardizer fit_standardizer(const Matrix& rows) {
    if (rows.rows() < 2) throw ContractError("fit_standardizer: need at least 2 rows");
    const std::size_t n = rows.rows();
    const std::size_t d = rows.cols();
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    for (std::size_t j = 0; j < d; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += rows(i, j);
        mean /= static_cast<double>(n);
        double correction = 0.0;
        for (std::size_t i = 0; i < n; ++i) correction += rows(i, j) - mean;
        mean += correction / static_cast<double>(n);
        double var = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dv = rows(i, j) - mean;
            var += dv * dv;
        }
        const double sd = std::sqrt(var / static_cast<double>(n));
        s.means[j] = mean;
        s.stds[j] = sd < 1e-12 ? 1.0 : sd;
    }
    return s;
}

FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& v) {
    return FeatureVector{s.transform(v.values), v.label};
}

}  // namespace nodulecad::features
