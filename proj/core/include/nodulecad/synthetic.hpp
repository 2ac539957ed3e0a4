#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nodulecad/data.hpp"
#include "nodulecad/imaging.hpp"

namespace nodulecad::data {

/// Raw intensity ceiling of generated slices (12-bit, CT-like).
inline constexpr std::uint32_t kSyntheticMax = 4095;

struct SyntheticNodule {
    std::string id;
    std::string subject;
    int diagnosis = 1;
    imaging::RawImage image;  // values in [0, kSyntheticMax]
    double spacing = 1.0;     // mm/pixel on both axes
    std::vector<imaging::Point> contour;
    double diameter_px = 0.0;  // nominal generating diameter
};

/// Seeded generator of annotated nodule slices for desk-scale validation.
///
/// Most benign nodules are small (4-9 px) and near circular; most malignant
/// ones are large (11-22 px), eccentric and lobulated by random low-order
/// radial harmonics. One in five of each class falls in the other size range.
/// Density depends on size and label jointly: small benign and large malignant
/// nodules are dense and sharp edged, the other two groups faint and soft, so
/// neither size nor density alone is enough. Backgrounds are smoothed Gaussian
/// noise. The annotation is the generating contour. Nodule i draws from its
/// own stream, so output depends only on (counts, size, seed).
std::vector<SyntheticNodule> generate_synthetic(int n_benign, int n_malignant,
                                                int image_size = 64, std::uint64_t seed = 42);

/// Writes one 16-bit PGM per nodule plus manifest.json into `dir` and returns
/// the manifest (base_dir = dir).
Manifest write_synthetic(const std::vector<SyntheticNodule>& nodules,
                         const std::filesystem::path& dir);

}  // namespace nodulecad::data
