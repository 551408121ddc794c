#pragma once

#include "lapkm/trainer.hpp"

#include <json.hpp>

#include <filesystem>

namespace lapkm {

inline constexpr const char* kModelVersion = "lapkm-model/1";

/// Model as a single JSON document tagged "lapkm-model/1". An infinite bandwidth is
/// stored as the string "inf".
nlohmann::json model_to_json(const LapKModesModel<double>& model);
LapKModesModel<double> model_from_json(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const LapKModesModel<double>& model);
LapKModesModel<double> load_model(const std::filesystem::path& path);

nlohmann::json graph_spec_to_json(const GraphSpec& spec);
GraphSpec graph_spec_from_json(const nlohmann::json& doc);

}  // namespace lapkm
