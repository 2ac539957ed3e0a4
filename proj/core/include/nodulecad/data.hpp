#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nodulecad/features.hpp"
#include "nodulecad/imaging.hpp"

namespace nodulecad::data {

inline constexpr int kManifestSchemaVersion = 1;

/// Nodule diagnosis codes: 0 unknown, 1 benign, 2 primary malignant,
/// 3 metastatic malignant.
enum class Diagnosis : int { unknown = 0, benign = 1, malignant_primary = 2, malignant_metastatic = 3 };

/// -1 for benign, +1 for either malignant code, nullopt for unknown.
/// Throws InputError for codes outside 0..3.
std::optional<int> label_for_diagnosis(int code);

struct ManifestEntry {
    std::string id;
    std::string subject;
    std::filesystem::path image;  // relative paths resolve against the manifest directory
    double spacing_x = 1.0;
    double spacing_y = 1.0;
    std::optional<std::uint32_t> source_max;  // default comes from the image bit depth
    std::vector<imaging::Polygon> polygons;   // one per annotating radiologist
    int diagnosis = 0;
};

/// Versioned JSON manifest:
///   {"schema": 1, "nodules": [{"id", "subject", "image", "spacing_x",
///    "spacing_y", "source_max"?, "diagnosis", "polygons": [[[col,row],...],...]}]}
struct Manifest {
    std::filesystem::path base_dir;
    std::vector<ManifestEntry> entries;

    std::filesystem::path resolve(const ManifestEntry& e) const;
};

/// Validates schema version, unique ids, positive spacings, diagnosis codes
/// and polygon shapes. Throws InputError naming the offending nodule.
Manifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);
Manifest read_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(const Manifest& m);
void write_manifest(const Manifest& m, const std::filesystem::path& path);

struct Sample {
    ManifestEntry entry;
    int label = 0;  // -1 or +1
};

/// Labeled nodules with unknown diagnoses removed.
struct Dataset {
    Manifest manifest;  // only the retained entries
    std::vector<Sample> samples;
    std::size_t dropped_unknown = 0;

    std::vector<int> labels() const;
    std::vector<std::string> subjects() const;
};

/// Reads a manifest, checks that every referenced image exists, maps
/// diagnoses to labels and drops the unknown ones.
Dataset load_manifest(const std::filesystem::path& path);
Dataset to_dataset(const Manifest& manifest, bool check_images = true);

/// Loads, normalizes and annotates one nodule, returning its feature vector.
/// Errors carry the nodule id.
features::FeatureVector extract_sample(const Manifest& manifest, const Sample& sample,
                                       double margin = 0.05,
                                       const features::FeatureLayout& layout = {});

enum class SplitLevel { slice, subject };

SplitLevel parse_split_level(std::string_view name);

struct TrainTestSplit {
    std::vector<std::size_t> train;  // ascending
    std::vector<std::size_t> test;   // ascending
    std::uint64_t seed_used = 0;
};

/// Seeded train/test split.
///
/// Slice level puts floor(fraction * n_c) of each class c in train. Subject
/// level keeps every subject on one side, greedily matching the per-class
/// train targets. If either side lacks a class the seed is incremented and
/// the split retried, up to 100 attempts, then ContractError.
TrainTestSplit split_train_test(std::span<const int> labels,
                                std::span<const std::string> subjects, double train_fraction,
                                std::uint64_t seed, SplitLevel level = SplitLevel::slice);

}  // namespace nodulecad::data
