#include "nodulecad/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "nodulecad/image_io.hpp"
#include "nodulecad/rng.hpp"

namespace nodulecad::data {

using nlohmann::json;

std::optional<int> label_for_diagnosis(int code) {
    switch (code) {
        case 0: return std::nullopt;
        case 1: return kBenign;
        case 2:
        case 3: return kMalignant;
        default:
            throw InputError("unknown diagnosis code " + std::to_string(code) +
                             " (expected 0, 1, 2 or 3)");
    }
}

std::filesystem::path Manifest::resolve(const ManifestEntry& e) const {
    return e.image.is_absolute() ? e.image : base_dir / e.image;
}

namespace {

ManifestEntry parse_entry(const json& j) {
    ManifestEntry e;
    e.id = j.at("id").get<std::string>();
    try {
        e.subject = j.contains("subject") ? j.at("subject").get<std::string>() : e.id;
        e.image = j.at("image").get<std::string>();
        e.spacing_x = j.at("spacing_x").get<double>();
        e.spacing_y = j.at("spacing_y").get<double>();
        if (!(e.spacing_x > 0.0) || !(e.spacing_y > 0.0) || !std::isfinite(e.spacing_x) ||
            !std::isfinite(e.spacing_y))
            throw InputError("pixel spacing must be positive");
        if (j.contains("source_max") && !j.at("source_max").is_null()) {
            const auto m = j.at("source_max").get<std::int64_t>();
            if (m <= 0 || m > 0xFFFFFFFFLL) throw InputError("source_max must be positive");
            e.source_max = static_cast<std::uint32_t>(m);
        }
        e.diagnosis = j.at("diagnosis").get<int>();
        label_for_diagnosis(e.diagnosis);  // validates the code

        const json& polys = j.at("polygons");
        if (!polys.is_array() || polys.empty()) throw InputError("at least one polygon required");
        for (const auto& poly : polys) {
            std::vector<imaging::Point> pts;
            for (const auto& v : poly) {
                if (!v.is_array() || v.size() != 2) throw InputError("malformed polygon vertex");
                pts.push_back({v[0].get<double>(), v[1].get<double>()});
            }
            e.polygons.emplace_back(std::move(pts));
        }
    } catch (const json::exception& ex) {
        throw InputError("nodule '" + e.id + "': malformed entry: " + ex.what());
    } catch (const InputError& ex) {
        throw InputError("nodule '" + e.id + "': " + ex.what());
    }
    return e;
}

}  // namespace

Manifest parse_manifest(const json& doc, const std::filesystem::path& base_dir) {
    if (!doc.is_object() || !doc.contains("schema"))
        throw InputError("manifest has no schema version");
    if (!doc.at("schema").is_number_integer() ||
        doc.at("schema").get<int>() != kManifestSchemaVersion)
        throw InputError("unsupported manifest schema " + doc.at("schema").dump());
    if (!doc.contains("nodules") || !doc.at("nodules").is_array())
        throw InputError("manifest has no 'nodules' array");

    Manifest m;
    m.base_dir = base_dir;
    std::set<std::string> seen;
    for (const auto& j : doc.at("nodules")) {
        if (!j.is_object() || !j.contains("id") || !j.at("id").is_string())
            throw InputError("manifest entry without a string id");
        ManifestEntry e = parse_entry(j);
        if (!seen.insert(e.id).second) throw InputError("duplicate nodule id '" + e.id + "'");
        m.entries.push_back(std::move(e));
    }
    return m;
}

Manifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open manifest '" + path.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw InputError("manifest '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_manifest(doc, path.parent_path());
}

json manifest_to_json(const Manifest& m) {
    json nodules = json::array();
    for (const auto& e : m.entries) {
        json polys = json::array();
        for (const auto& p : e.polygons) {
            json verts = json::array();
            for (const auto& v : p.vertices()) verts.push_back({v.col, v.row});
            polys.push_back(verts);
        }
        json j{{"id", e.id},
               {"subject", e.subject},
               {"image", e.image.generic_string()},
               {"spacing_x", e.spacing_x},
               {"spacing_y", e.spacing_y},
               {"diagnosis", e.diagnosis},
               {"polygons", polys}};
        if (e.source_max) j["source_max"] = *e.source_max;
        nodules.push_back(std::move(j));
    }
    return json{{"schema", kManifestSchemaVersion}, {"nodules", nodules}};
}

void write_manifest(const Manifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write manifest '" + path.string() + "'");
    out << manifest_to_json(m).dump(2) << '\n';
}

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    for (const auto& s : samples) out.push_back(s.label);
    return out;
}

std::vector<std::string> Dataset::subjects() const {
    std::vector<std::string> out;
    for (const auto& s : samples) out.push_back(s.entry.subject);
    return out;
}

Dataset to_dataset(const Manifest& manifest, bool check_images) {
    Dataset ds;
    ds.manifest.base_dir = manifest.base_dir;
    for (const auto& e : manifest.entries) {
        const auto label = label_for_diagnosis(e.diagnosis);
        if (!label) {
            ++ds.dropped_unknown;
            continue;
        }
        if (check_images && !std::filesystem::is_regular_file(manifest.resolve(e)))
            throw InputError("nodule '" + e.id + "': image file '" +
                             manifest.resolve(e).string() + "' does not exist");
        ds.manifest.entries.push_back(e);
        ds.samples.push_back(Sample{e, *label});
    }
    return ds;
}

Dataset load_manifest(const std::filesystem::path& path) {
    return to_dataset(read_manifest(path), /*check_images=*/true);
}

features::FeatureVector extract_sample(const Manifest& manifest, const Sample& sample,
                                       double margin, const features::FeatureLayout& layout) {
    const auto& e = sample.entry;
    try {
        const auto loaded = imaging::read_image(manifest.resolve(e));
        const auto img = imaging::normalize_intensity(
            loaded.raw, e.source_max.value_or(loaded.nominal_max()), e.spacing_x, e.spacing_y);
        for (const auto& poly : e.polygons)
            for (const auto& v : poly.vertices())
                if (v.col < -0.5 || v.row < -0.5 || v.col > img.width() - 0.5 ||
                    v.row > img.height() - 0.5)
                    throw InputError("polygon vertex (" + std::to_string(v.col) + ", " +
                                     std::to_string(v.row) + ") lies outside the " +
                                     std::to_string(img.width()) + "x" +
                                     std::to_string(img.height()) + " image");
        auto fv = features::extract_features(img, e.polygons, margin, layout);
        fv.label = sample.label;
        return fv;
    } catch (const InputError& ex) {
        throw InputError("nodule '" + e.id + "': " + ex.what());
    } catch (const ContractError& ex) {
        throw ContractError("nodule '" + e.id + "': " + ex.what());
    }
}

SplitLevel parse_split_level(std::string_view name) {
    if (name == "slice") return SplitLevel::slice;
    if (name == "subject") return SplitLevel::subject;
    throw InputError("unknown split level '" + std::string(name) + "' (expected slice or subject)");
}

namespace {

TrainTestSplit split_slices(std::span<const int> labels, double fraction, std::uint64_t seed) {
    Rng rng(seed);
    TrainTestSplit out;
    for (int cls : {kMalignant, kBenign}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) idx.push_back(i);
        rng.shuffle(std::span<std::size_t>(idx));
        const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(idx.size())));
        out.train.insert(out.train.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
        out.test.insert(out.test.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    }
    return out;
}

TrainTestSplit split_subjects(std::span<const int> labels, std::span<const std::string> subjects,
                              double fraction, std::uint64_t seed) {
    struct Group {
        std::string subject;
        std::vector<std::size_t> members;
        double pos = 0.0;
        double neg = 0.0;
    };
    std::map<std::string, std::size_t> where;
    std::vector<Group> groups;
    double total_pos = 0.0;
    double total_neg = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto [it, fresh] = where.try_emplace(subjects[i], groups.size());
        if (fresh) groups.push_back(Group{subjects[i], {}, 0.0, 0.0});
        Group& g = groups[it->second];
        g.members.push_back(i);
        (labels[i] == kMalignant ? g.pos : g.neg) += 1.0;
        (labels[i] == kMalignant ? total_pos : total_neg) += 1.0;
    }

    Rng rng(seed);
    rng.shuffle(std::span<Group>(groups));
    std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        return a.members.size() > b.members.size();
    });

    const double target_pos = fraction * total_pos;
    const double target_neg = fraction * total_neg;
    auto cost = [&](double p, double n) {
        return std::abs(p - target_pos) / std::max(total_pos, 1.0) +
               std::abs(n - target_neg) / std::max(total_neg, 1.0);
    };

    TrainTestSplit out;
    double pos = 0.0;
    double neg = 0.0;
    for (const Group& g : groups) {
        if (cost(pos + g.pos, neg + g.neg) < cost(pos, neg)) {
            pos += g.pos;
            neg += g.neg;
            out.train.insert(out.train.end(), g.members.begin(), g.members.end());
        } else {
            out.test.insert(out.test.end(), g.members.begin(), g.members.end());
        }
    }
    return out;
}

bool both_classes(std::span<const int> labels, std::span<const std::size_t> idx) {
    bool p = false;
    bool n = false;
    for (std::size_t i : idx) (labels[i] == kMalignant ? p : n) = true;
    return p && n;
}

}  // namespace

TrainTestSplit split_train_test(std::span<const int> labels,
                                std::span<const std::string> subjects, double train_fraction,
                                std::uint64_t seed, SplitLevel level) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ContractError("train fraction must lie strictly between 0 and 1");
    for (int y : labels)
        if (!is_valid_label(y)) throw ContractError("split_train_test: invalid label");
    if (level == SplitLevel::subject && subjects.size() != labels.size())
        throw ContractError("split_train_test: one subject id per sample required");

    constexpr int kAttempts = 100;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
        const std::uint64_t s = seed + static_cast<std::uint64_t>(attempt);
        TrainTestSplit split = level == SplitLevel::slice
                                   ? split_slices(labels, train_fraction, s)
                                   : split_subjects(labels, subjects, train_fraction, s);
        if (!both_classes(labels, split.train) || !both_classes(labels, split.test)) continue;
        std::sort(split.train.begin(), split.train.end());
        std::sort(split.test.begin(), split.test.end());
        split.seed_used = s;
        return split;
    }
    throw ContractError("split_train_test: could not place both classes on both sides after " +
                        std::to_string(kAttempts) + " attempts");
}

}  // namespace nodulecad::data
