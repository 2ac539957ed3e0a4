#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nodulecad/common.hpp"

namespace nodulecad::imaging {

/// Integer intensities as read from disk, before normalization.
struct RawImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> values;  // row-major

    std::uint32_t at(int col, int row) const {
        return values[static_cast<std::size_t>(row) * width + col];
    }
};

/// Normalized 2D slice. Every pixel lies in [0, 256); spacings are mm/pixel.
class GrayImage {
public:
    GrayImage(int width, int height, std::vector<double> pixels, double spacing_x = 1.0,
              double spacing_y = 1.0);

    int width() const { return width_; }
    int height() const { return height_; }
    double spacing_x() const { return spacing_x_; }
    double spacing_y() const { return spacing_y_; }

    double at(int col, int row) const {
        return pixels_[static_cast<std::size_t>(row) * width_ + col];
    }
    std::span<const double> pixels() const { return pixels_; }

private:
    int width_;
    int height_;
    std::vector<double> pixels_;
    double spacing_x_;
    double spacing_y_;
};

struct Point {
    double col = 0.0;
    double row = 0.0;
};

struct Pixel {
    int col = 0;
    int row = 0;
    friend bool operator==(const Pixel&, const Pixel&) = default;
    friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Closed polygon in pixel coordinates. Pixel (c, r) has its center at (c, r).
class Polygon {
public:
    explicit Polygon(std::vector<Point> vertices);

    const std::vector<Point>& vertices() const { return vertices_; }
    double signed_area() const;
    /// True when all vertices are collinear, so the polygon encloses no area.
    bool is_degenerate() const;

private:
    std::vector<Point> vertices_;
};

/// Inclusive pixel rectangle.
struct Rect {
    int col0 = 0;
    int row0 = 0;
    int col1 = -1;
    int row1 = -1;

    int width() const { return col1 - col0 + 1; }
    int height() const { return row1 - row0 + 1; }
    friend bool operator==(const Rect&, const Rect&) = default;
};

/// Binary nodule mask with the dimensions of its source image.
class Mask {
public:
    Mask(int width, int height);

    int width() const { return width_; }
    int height() const { return height_; }

    bool at(int col, int row) const { return bits_[index(col, row)] != 0; }
    void set(int col, int row, bool value = true) { bits_[index(col, row)] = value ? 1 : 0; }

    bool contains(int col, int row) const {
        return col >= 0 && row >= 0 && col < width_ && row < height_;
    }

    std::size_t count() const;
    bool empty() const { return count() == 0; }

    /// Tight bounding box of the true pixels. Throws InputError on an empty mask.
    Rect bounding_box() const;

    friend bool operator==(const Mask&, const Mask&) = default;

private:
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * width_ + col;
    }

    int width_;
    int height_;
    std::vector<std::uint8_t> bits_;
};

/// Maps raw integers in [0, source_max] onto [0, 256) via raw * 256 / (source_max + 1).
GrayImage normalize_intensity(const RawImage& raw, std::uint32_t source_max,
                              double spacing_x = 1.0, double spacing_y = 1.0);

/// Even-odd fill sampled at pixel centers; centers exactly on an edge count
/// as inside. Throws InputError if the polygon has zero area or covers no
/// pixel center of the grid.
Mask rasterize_polygon(const Polygon& poly, int width, int height);

/// Pixelwise OR. Throws ContractError on an empty list or mismatched sizes.
Mask union_masks(std::span<const Mask> masks);

/// Bounding box of the mask grown by ceil(margin * side) on each side and
/// clipped to the image.
Rect margin_rect(const Mask& mask, double margin);

GrayImage crop(const GrayImage& img, const Rect& rect);

/// Crop of `img` around the mask's bounding box with the margin above.
GrayImage crop_with_margin(const GrayImage& img, const Mask& mask, double margin = 0.05);

/// True pixels with at least one 4-neighbor that is false or off-grid, in
/// row-major order.
std::vector<Pixel> boundary_pixels(const Mask& mask);

}  // namespace nodulecad::imaging
