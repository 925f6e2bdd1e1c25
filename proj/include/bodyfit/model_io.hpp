#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bodyfit/body_model.hpp"

namespace bodyfit {

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const ModelDefinition& model);
/// Parses and validates a model document. Throws IoError on schema problems
/// and DegenerateModel on invariant violations.
ModelDefinition model_from_json(const nlohmann::json& doc);

void save_model(const ModelDefinition& model, const std::filesystem::path& path);
ModelDefinition load_model(const std::filesystem::path& path);

/// {beta:[...], offsets:[[x,y,z]...], frames:[{theta:[[..]xJ], trans:[..]}]}
nlohmann::json subject_to_json(const SubjectParams& params);
SubjectParams subject_from_json(const nlohmann::json& doc);

std::string read_text_file(const std::filesystem::path& path);
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes through a temporary sibling and renames it into place.
void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace bodyfit
