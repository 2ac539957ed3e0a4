#include "nodulecad/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace nodulecad::imaging {

namespace {

constexpr double kMaxIntensity = 0x1.fffffffffffffp+7;  // largest double below 256
constexpr double kEdgeEps = 1e-9;

}  // namespace

GrayImage::GrayImage(int width, int height, std::vector<double> pixels, double spacing_x,
                     double spacing_y)
    : width_(width),
      height_(height),
      pixels_(std::move(pixels)),
      spacing_x_(spacing_x),
      spacing_y_(spacing_y) {
    if (width <= 0 || height <= 0) throw ContractError("GrayImage: dimensions must be positive");
    if (pixels_.size() != static_cast<std::size_t>(width) * height)
        throw ContractError("GrayImage: pixel count does not match width x height");
    if (!(spacing_x > 0.0) || !(spacing_y > 0.0) || !std::isfinite(spacing_x) ||
        !std::isfinite(spacing_y))
        throw InputError("GrayImage: pixel spacing must be positive");
    for (double v : pixels_)
        if (!(v >= 0.0 && v < 256.0)) throw ContractError("GrayImage: pixel outside [0, 256)");
}

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
    if (vertices_.size() < 3) throw InputError("polygon needs at least 3 vertices");
    for (const auto& p : vertices_)
        if (!std::isfinite(p.col) || !std::isfinite(p.row))
            throw InputError("polygon vertex is not finite");
}

double Polygon::signed_area() const {
    double twice = 0.0;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = vertices_[i];
        const Point& b = vertices_[(i + 1) % n];
        twice += a.col * b.row - b.col * a.row;
    }
    return 0.5 * twice;
}

bool Polygon::is_degenerate() const {
    const Point& o = vertices_.front();
    for (std::size_t i = 1; i + 1 < vertices_.size(); ++i) {
        const Point& a = vertices_[i];
        const Point& b = vertices_[i + 1];
        const double cross = (a.col - o.col) * (b.row - o.row) - (a.row - o.row) * (b.col - o.col);
        if (std::abs(cross) >= 1e-12) return false;
    }
    return true;
}

Mask::Mask(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw ContractError("Mask: dimensions must be positive");
    bits_.assign(static_cast<std::size_t>(width) * height, 0);
}

std::size_t Mask::count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

Rect Mask::bounding_box() const {
    Rect r{width_, height_, -1, -1};
    for (int row = 0; row < height_; ++row) {
        for (int col = 0; col < width_; ++col) {
            if (!at(col, row)) continue;
            r.col0 = std::min(r.col0, col);
            r.col1 = std::max(r.col1, col);
            r.row0 = std::min(r.row0, row);
            r.row1 = std::max(r.row1, row);
        }
    }
    if (r.col1 < 0) throw InputError("mask is empty");
    return r;
}

GrayImage normalize_intensity(const RawImage& raw, std::uint32_t source_max, double spacing_x,
                              double spacing_y) {
    if (source_max == 0) throw InputError("normalize_intensity: source_max must be positive");
    if (raw.width <= 0 || raw.height <= 0 ||
        raw.values.size() != static_cast<std::size_t>(raw.width) * raw.height)
        throw InputError("normalize_intensity: raw grid dimensions are inconsistent");

    const double scale = 256.0 / (static_cast<double>(source_max) + 1.0);
    std::vector<double> out;
    out.reserve(raw.values.size());
    for (std::uint32_t v : raw.values) {
        if (v > source_max)
            throw InputError("normalize_intensity: raw value " + std::to_string(v) +
                             " exceeds declared maximum " + std::to_string(source_max));
        out.push_back(std::clamp(static_cast<double>(v) * scale, 0.0, kMaxIntensity));
    }
    return GrayImage(raw.width, raw.height, std::move(out), spacing_x, spacing_y);
}

Mask rasterize_polygon(const Polygon& poly, int width, int height) {
    if (poly.is_degenerate())
        throw InputError("polygon has zero area; mask would be empty");

    Mask mask(width, height);
    const auto& v = poly.vertices();
    const std::size_t n = v.size();
    std::vector<double> xs;

    // Interior by even-odd scanline crossings at each row of pixel centers.
    for (int row = 0; row < height; ++row) {
        const double y = row;
        xs.clear();
        for (std::size_t i = 0; i < n; ++i) {
            const Point& a = v[i];
            const Point& b = v[(i + 1) % n];
            if ((a.row > y) != (b.row > y))
                xs.push_back(a.col + (y - a.row) * (b.col - a.col) / (b.row - a.row));
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k])));
            const int c1 = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1])) - 1);
            for (int col = c0; col <= c1; ++col) mask.set(col, row);
        }
    }

    // Centers lying exactly on an edge.
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = v[i];
        const Point& b = v[(i + 1) % n];
        const int r0 = std::max(0, static_cast<int>(std::ceil(std::min(a.row, b.row) - kEdgeEps)));
        const int r1 =
            std::min(height - 1, static_cast<int>(std::floor(std::max(a.row, b.row) + kEdgeEps)));
        for (int row = r0; row <= r1; ++row) {
            if (std::abs(a.row - b.row) <= kEdgeEps) {
                if (std::abs(a.row - row) > kEdgeEps) continue;
                const int c0 =
                    std::max(0, static_cast<int>(std::ceil(std::min(a.col, b.col) - kEdgeEps)));
                const int c1 = std::min(
                    width - 1, static_cast<int>(std::floor(std::max(a.col, b.col) + kEdgeEps)));
                for (int col = c0; col <= c1; ++col) mask.set(col, row);
            } else {
                const double x = a.col + (row - a.row) * (b.col - a.col) / (b.row - a.row);
                const double rx = std::round(x);
                if (std::abs(x - rx) <= kEdgeEps && rx >= 0 && rx < width)
                    mask.set(static_cast<int>(rx), row);
            }
        }
    }

    if (mask.empty()) throw InputError("polygon covers no pixel center; mask is empty");
    return mask;
}

Mask union_masks(std::span<const Mask> masks) {
    if (masks.empty()) throw ContractError("union_masks: no masks given");
    Mask out = masks.front();
    for (const Mask& m : masks.subspan(1)) {
        if (m.width() != out.width() || m.height() != out.height())
            throw ContractError("union_masks: mask dimensions differ");
        for (int row = 0; row < m.height(); ++row)
            for (int col = 0; col < m.width(); ++col)
                if (m.at(col, row)) out.set(col, row);
    }
    return out;
}

Rect margin_rect(const Mask& mask, double margin) {
    if (!(margin >= 0.0) || !std::isfinite(margin))
        throw ContractError("crop margin must be a non-negative fraction");
    const Rect box = mask.bounding_box();
    // The epsilon keeps exact products like 0.05 * 40 from rounding up.
    const int pad_x = static_cast<int>(std::ceil(margin * box.width() - 1e-9));
    const int pad_y = static_cast<int>(std::ceil(margin * box.height() - 1e-9));
    return Rect{std::max(0, box.col0 - pad_x), std::max(0, box.row0 - pad_y),
                std::min(mask.width() - 1, box.col1 + pad_x),
                std::min(mask.height() - 1, box.row1 + pad_y)};
}

GrayImage crop(const GrayImage& img, const Rect& rect) {
    if (rect.col0 < 0 || rect.row0 < 0 || rect.col1 >= img.width() || rect.row1 >= img.height() ||
        rect.width() <= 0 || rect.height() <= 0)
        throw ContractError("crop rectangle outside image");
    std::vector<double> px;
    px.reserve(static_cast<std::size_t>(rect.width()) * rect.height());
    for (int row = rect.row0; row <= rect.row1; ++row)
        for (int col = rect.col0; col <= rect.col1; ++col) px.push_back(img.at(col, row));
    return GrayImage(rect.width(), rect.height(), std::move(px), img.spacing_x(), img.spacing_y());
}

GrayImage crop_with_margin(const GrayImage& img, const Mask& mask, double margin) {
    if (mask.width() != img.width() || mask.height() != img.height())
        throw ContractError("crop_with_margin: mask and image dimensions differ");
    return crop(img, margin_rect(mask, margin));
}

std::vector<Pixel> boundary_pixels(const Mask& mask) {
    auto off = [&](int c, int r) { return !mask.contains(c, r) || !mask.at(c, r); };
    std::vector<Pixel> out;
    for (int row = 0; row < mask.height(); ++row) {
        for (int col = 0; col < mask.width(); ++col) {
            if (!mask.at(col, row)) continue;
            if (off(col - 1, row) || off(col + 1, row) || off(col, row - 1) || off(col, row + 1))
                out.push_back({col, row});
        }
    }
    return out;
}

}  // namespace nodulecad::imaging
