#include "nodulecad/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "nodulecad/image_io.hpp"
#include "nodulecad/rng.hpp"

namespace nodulecad::data {

namespace {

constexpr int kContourVertices = 48;
constexpr int kHarmonics = 4;
constexpr double kTypicalFraction = 0.8;  // share of each class in its usual size range

struct Shape {
    double center_col = 0.0;
    double center_row = 0.0;
    double radius = 0.0;      // base radius in px
    double stretch = 1.0;     // major/minor axis ratio
    double rotation = 0.0;    // radians
    std::array<double, kHarmonics> amp{};
    std::array<double, kHarmonics> phase{};
    int first_harmonic = 2;

    double radius_at(double phi) const {
        double r = 1.0;
        for (int k = 0; k < kHarmonics; ++k)
            r += amp[static_cast<std::size_t>(k)] *
                 std::cos((first_harmonic + k) * phi + phase[static_cast<std::size_t>(k)]);
        return radius * std::max(r, 0.35);
    }

    // Image position of the contour point at nodule-frame angle phi.
    imaging::Point contour_point(double phi) const {
        const double r = radius_at(phi);
        const double u = r * std::cos(phi) * std::sqrt(stretch);
        const double v = r * std::sin(phi) / std::sqrt(stretch);
        return {center_col + u * std::cos(rotation) - v * std::sin(rotation),
                center_row + u * std::sin(rotation) + v * std::cos(rotation)};
    }

    // Signed depth inside the contour in px along the ray from the center
    // (positive inside).
    double depth(double col, double row) const {
        const double dx = col - center_col;
        const double dy = row - center_row;
        const double u = (dx * std::cos(rotation) + dy * std::sin(rotation)) / std::sqrt(stretch);
        const double v = (-dx * std::sin(rotation) + dy * std::cos(rotation)) * std::sqrt(stretch);
        return radius_at(std::atan2(v, u)) - std::hypot(u, v);
    }
};

std::vector<double> smoothed_noise(Rng& rng, int size, double sigma) {
    const auto n = static_cast<std::size_t>(size);
    std::vector<double> raw(n * n);
    for (double& v : raw) v = rng.normal();
    // Two 3x3 box passes approximate a small Gaussian blur; rescale to sigma.
    std::vector<double> out(raw.size());
    for (int pass = 0; pass < 2; ++pass) {
        for (int r = 0; r < size; ++r) {
            for (int c = 0; c < size; ++c) {
                double s = 0.0;
                for (int dr = -1; dr <= 1; ++dr)
                    for (int dc = -1; dc <= 1; ++dc) {
                        const int rr = std::clamp(r + dr, 0, size - 1);
                        const int cc = std::clamp(c + dc, 0, size - 1);
                        s += raw[static_cast<std::size_t>(rr) * n + static_cast<std::size_t>(cc)];
                    }
                out[static_cast<std::size_t>(r) * n + static_cast<std::size_t>(c)] = s / 9.0;
            }
        }
        std::swap(raw, out);
    }
    double var = 0.0;
    for (double v : raw) var += v * v;
    const double scale = sigma / std::sqrt(var / static_cast<double>(raw.size()));
    for (double& v : raw) v *= scale;
    return raw;
}

SyntheticNodule make_nodule(int index, bool malignant, int size, std::uint64_t seed) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
    SyntheticNodule nod;

    Shape shape;
    shape.center_col = size / 2.0 + rng.uniform(-2.0, 2.0);
    shape.center_row = size / 2.0 + rng.uniform(-2.0, 2.0);
    shape.rotation = rng.uniform(0.0, std::numbers::pi);

    // Size alone separates most of the classes. The rest is decided by how
    // size interacts with density: a small bright nodule is a calcified
    // granuloma, a small faint one a ground-glass adenocarcinoma, and among
    // large nodules it is the dense ones that are malignant.
    const bool typical = rng.uniform() < kTypicalFraction;
    const bool small = malignant ? !typical : typical;
    const double u = rng.uniform();
    nod.diameter_px = small ? 4.0 + 5.0 * u : 11.0 + 11.0 * u;

    double contrast;
    double edge_softness;
    double heterogeneity;
    const bool dense = small != malignant;
    if (dense) {
        contrast = rng.uniform(650.0, 1100.0);
        edge_softness = 0.5;
        heterogeneity = 0.1;
    } else {
        contrast = rng.uniform(80.0, 200.0);
        edge_softness = 1.3;
        heterogeneity = 0.35;
    }
    if (malignant) {
        shape.stretch = rng.uniform(1.2, 1.8);
        shape.first_harmonic = 3;
        for (int k = 0; k < kHarmonics; ++k) {
            shape.amp[static_cast<std::size_t>(k)] = rng.uniform(0.04, 0.13);
            shape.phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        nod.diagnosis = rng.uniform() < 0.5 ? 2 : 3;
    } else {
        shape.stretch = rng.uniform(1.0, 1.2);
        shape.first_harmonic = 2;
        for (int k = 0; k < kHarmonics; ++k) {
            shape.amp[static_cast<std::size_t>(k)] = rng.uniform(0.0, 0.03);
            shape.phase[static_cast<std::size_t>(k)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        nod.diagnosis = 1;
    }
    shape.radius = nod.diameter_px / 2.0;
    nod.spacing = rng.uniform(0.5, 1.0);

    const double background = rng.uniform(250.0, 450.0);
    const auto texture = smoothed_noise(rng, size, 35.0);
    const auto interior = smoothed_noise(rng, size, 1.0);

    nod.image.width = size;
    nod.image.height = size;
    nod.image.values.resize(static_cast<std::size_t>(size) * size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) {
            const std::size_t i = static_cast<std::size_t>(r) * size + c;
            const double inside = 1.0 / (1.0 + std::exp(-shape.depth(c, r) / edge_softness));
            const double lesion = contrast * (1.0 + heterogeneity * interior[i]);
            const double v = background + texture[i] + inside * lesion;
            nod.image.values[i] =
                static_cast<std::uint32_t>(std::clamp(std::lround(v), 0L, long{kSyntheticMax}));
        }
    }

    const double hi = size - 1.0;
    for (int k = 0; k < kContourVertices; ++k) {
        auto p = shape.contour_point(2.0 * std::numbers::pi * k / kContourVertices);
        p.col = std::clamp(p.col, 0.0, hi);
        p.row = std::clamp(p.row, 0.0, hi);
        nod.contour.push_back(p);
    }
    return nod;
}

}  // namespace

std::vector<SyntheticNodule> generate_synthetic(int n_benign, int n_malignant, int image_size,
                                                std::uint64_t seed) {
    if (n_benign < 1 || n_malignant < 1)
        throw ContractError("generate_synthetic: both class counts must be >= 1");
    if (image_size < 32) throw ContractError("generate_synthetic: image size must be >= 32");

    std::vector<SyntheticNodule> out;
    out.reserve(static_cast<std::size_t>(n_benign + n_malignant));
    char buf[48];
    for (int i = 0; i < n_benign + n_malignant; ++i) {
        const bool malignant = i >= n_benign;
        SyntheticNodule nod = make_nodule(i, malignant, image_size, seed);
        std::snprintf(buf, sizeof buf, "syn-%04d", i);
        nod.id = buf;
        const int within = malignant ? i - n_benign : i;
        std::snprintf(buf, sizeof buf, "subj-%c%03d", malignant ? 'm' : 'b', within / 3);
        nod.subject = buf;
        out.push_back(std::move(nod));
    }
    return out;
}

Manifest write_synthetic(const std::vector<SyntheticNodule>& nodules,
                         const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw InputError("cannot create directory '" + (dir / "images").string() + "'");

    Manifest m;
    m.base_dir = dir;
    for (const auto& nod : nodules) {
        const std::filesystem::path rel = std::filesystem::path("images") / (nod.id + ".pgm");
        imaging::write_pgm(dir / rel, nod.image, 65535);
        ManifestEntry e;
        e.id = nod.id;
        e.subject = nod.subject;
        e.image = rel;
        e.spacing_x = nod.spacing;
        e.spacing_y = nod.spacing;
        e.source_max = kSyntheticMax;
        e.polygons.emplace_back(nod.contour);
        e.diagnosis = nod.diagnosis;
        m.entries.push_back(std::move(e));
    }
    write_manifest(m, dir / "manifest.json");
    return m;
}

}  // namespace nodulecad::data
