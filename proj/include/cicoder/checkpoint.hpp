#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "cicoder/nn.hpp"

namespace cicoder {

// "NCKP", u32 version, model config, then (name, shape, float32 data) records.
// Parameters are stored as float32, so saving rounds them.
std::string serialize_checkpoint(const ModelParams& params);
ModelParams deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace cicoder
