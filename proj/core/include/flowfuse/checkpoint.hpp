#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace flowfuse {

// Checkpoint container: uint32-LE header byte count, UTF-8 JSON header,
// then raw float32-LE parameter data. Header schema is owned by the caller;
// "param_count" is validated here.
void write_checkpoint_file(const std::filesystem::path& path,
                           const nlohmann::ordered_json& header,
                           const std::vector<float>& params);

std::pair<nlohmann::ordered_json, std::vector<float>> read_checkpoint_file(
    const std::filesystem::path& path);

}  // namespace flowfuse
