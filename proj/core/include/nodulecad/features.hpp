#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nodulecad/imaging.hpp"
#include "nodulecad/matrix.hpp"

namespace nodulecad::features {

/// Shape descriptors of a nodule mask, in metric units.
struct GeometricFeatures {
    double diameter_mm = 0.0;   // Feret diameter over boundary pixel centers
    double aspect_ratio = 0.0;  // bbox height / bbox width, both in mm
    double area_mm2 = 0.0;
    double perimeter_mm = 0.0;
};

enum class HistogramKind { gray, gradient };

struct Histogram {
    std::vector<double> bins;
    HistogramKind kind = HistogramKind::gray;
};

inline constexpr int kGrayBins = 16;
inline constexpr int kGradientBins = 9;
inline constexpr int kGeometricCount = 4;

/// Bin counts that fix the length and column order of a feature vector.
struct FeatureLayout {
    int gray_bins = kGrayBins;
    int gradient_bins = kGradientBins;

    std::size_t dimension() const {
        return static_cast<std::size_t>(kGeometricCount + gray_bins + gradient_bins);
    }
    /// f_diam_mm, f_aspect, f_area_mm2, f_perim_mm, f_gh_00.., f_ogh_00..
    std::vector<std::string> column_names() const;
};

/// [diameter, aspect, area, perimeter | gray bins | gradient bins]; 29 entries
/// with the default layout.
struct FeatureVector {
    std::vector<double> values;
    std::optional<int> label;
};

/// Per-column affine standardization fitted on a training matrix.
struct Standardizer {
    std::vector<double> means;
    std::vector<double> stds;

    std::size_t dimension() const { return means.size(); }

    /// Identity transform of the given width.
    static Standardizer identity(std::size_t dim);

    std::vector<double> transform(std::span<const double> v) const;
    std::vector<double> inverse(std::span<const double> v) const;
    Matrix transform(const Matrix& m) const;

    friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

GeometricFeatures geometric_features(const imaging::Mask& mask, double spacing_x,
                                     double spacing_y);

/// Fixed-range [0, 256) intensity histogram, L1-normalized.
Histogram gray_histogram(const imaging::GrayImage& img, int bins = kGrayBins);

/// One global contrast-insensitive orientation histogram weighted by gradient
/// magnitude. Central differences with replicated borders; orientations in
/// [0, 180) hard-assigned to equal bins. All-zero when the image is flat.
Histogram oriented_gradient_histogram(const imaging::GrayImage& img, int bins = kGradientBins);

FeatureVector assemble_feature_vector(const GeometricFeatures& geo, const Histogram& gray,
                                      const Histogram& gradient,
                                      const FeatureLayout& layout = {});

/// Full per-nodule extraction: union of annotations, geometry on the mask,
/// histograms on the margin crop.
FeatureVector extract_features(const imaging::GrayImage& img,
                               std::span<const imaging::Polygon> polygons, double margin = 0.05,
                               const FeatureLayout& layout = {});

/// Column means and population standard deviations; near-constant columns
/// (std < 1e-12) get std 1. Needs at least two rows.
Standardizer fit_standardizer(const Matrix& rows);

FeatureVector apply_standardizer(const Standardizer& s, const FeatureVector& v);

}  // namespace nodulecad::features
