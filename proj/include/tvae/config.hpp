#pragma once

// JSON form of TrainConfig. Every key is optional; unknown keys are rejected
// by name.

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tvae/training.hpp"

namespace tvae {

nlohmann::json config_to_json(const TrainConfig& cfg);
/// Starts from `base` and overrides the keys present in `j`.
TrainConfig config_from_json(const nlohmann::json& j, const TrainConfig& base = {});

TrainConfig load_config(const std::filesystem::path& path);
void save_config(const TrainConfig& cfg, const std::filesystem::path& path);

/// Git blob object id (SHA-1 over "blob <size>\0" + bytes), lowercase hex.
std::string git_blob_sha1(std::string_view bytes);

}  // namespace tvae
