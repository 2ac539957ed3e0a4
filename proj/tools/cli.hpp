#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "nodulecad/classifiers.hpp"
#include "nodulecad/features.hpp"
#include "nodulecad/matrix.hpp"

namespace nodulecad::cli {

enum ExitCode : int { kSuccess = 0, kFailure = 1, kInputError = 2, kContractViolation = 3 };

/// Seed offsets per pipeline stage, added to the single --seed value.
inline constexpr std::uint64_t kSynthSeedOffset = 0;
inline constexpr std::uint64_t kSplitSeedOffset = 1;
inline constexpr std::uint64_t kFoldSeedOffset = 2;
inline constexpr std::uint64_t kModelSeedOffset = 3;

/// Feature CSV: header "id,label,<feature columns>", one row per nodule.
struct FeatureTable {
    std::vector<std::string> ids;
    std::vector<int> labels;
    Matrix features;
    std::vector<std::string> columns;  // feature column names only

    std::size_t size() const { return ids.size(); }
    classifiers::LabeledSet labeled() const { return {features, labels}; }
    FeatureTable subset(std::span<const std::size_t> rows) const;
};

/// Shortest decimal form that parses back to the same double; "inf"/"-inf".
std::string format_real(double v);
double parse_real(std::string_view text);

std::string feature_csv(const FeatureTable& table);
FeatureTable parse_feature_csv(std::string_view text);
FeatureTable read_feature_csv(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);
std::string read_file(const std::filesystem::path& path);

/// Expands a grid document {"schema":1,"candidates":[{"family":..,"C":[..]},..]}
/// into configs; array-valued hyperparameters form a cartesian product.
std::vector<classifiers::ClassifierConfig> parse_grid(const nlohmann::json& doc,
                                                      std::uint64_t model_seed);

/// Parses argv-style arguments (without the program name) and runs one
/// subcommand. Errors are reported on `err` and mapped to ExitCode values.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace nodulecad::cli
