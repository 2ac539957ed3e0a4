#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "nodulecad/classifiers.hpp"

namespace nodulecad::classifiers {

/// Version written into every model document; loading any other value fails.
inline constexpr int kModelSchemaVersion = 1;

/// Encodes a double so that +-inf survive JSON ("inf" / "-inf" strings).
nlohmann::json encode_real(double v);
double decode_real(const nlohmann::json& j);

nlohmann::json config_to_json(const ClassifierConfig& c);
/// Missing hyperparameters fall back to ClassifierConfig::defaults(family).
ClassifierConfig config_from_json(const nlohmann::json& j);

/// {"schema": 1, "family", "hyperparameters", "threshold", "standardizer",
///  "parameters"}. Trees are nested {"feature","threshold","left","right"}
/// objects with {"label","positive_fraction"} leaves.
nlohmann::json model_to_json(const TrainedClassifier& model);

/// Throws ContractError on a schema mismatch or missing threshold, InputError
/// on structurally malformed documents.
TrainedClassifier model_from_json(const nlohmann::json& j);

void save_model(const TrainedClassifier& model, const std::filesystem::path& path);
TrainedClassifier load_model(const std::filesystem::path& path);

}  // namespace nodulecad::classifiers
