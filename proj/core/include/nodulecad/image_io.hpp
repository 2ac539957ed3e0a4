#pragma once

#include <cstdint>
#include <filesystem>

#include "nodulecad/imaging.hpp"

namespace nodulecad::imaging {

struct LoadedImage {
    RawImage raw;
    int bit_depth = 8;  // 8 or 16

    /// Default normalization maximum implied by the storage depth.
    std::uint32_t nominal_max() const { return bit_depth > 8 ? 65535u : 255u; }
};

/// Reads a single-channel binary PGM (P5) or grayscale PNG, 8 or 16 bit.
/// Format is detected from the file signature. Throws InputError.
LoadedImage read_image(const std::filesystem::path& path);

LoadedImage read_pgm(const std::filesystem::path& path);
LoadedImage read_png(const std::filesystem::path& path);

/// Writes a binary PGM; 16-bit samples are emitted when maxval > 255.
void write_pgm(const std::filesystem::path& path, const RawImage& img, std::uint32_t maxval);

}  // namespace nodulecad::imaging
