#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "tdti/model/model.hpp"

namespace tdti::model {

inline constexpr std::string_view kCheckpointMagic = "TDTICKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Layout: magic, u32 version, u32 config-block byte length, config block,
/// u32 tensor count, then per tensor u32 rows, u32 cols and rows*cols f64
/// (row-major), all little-endian, in Model::parameters() order. A JSON copy
/// of the config is written next to it as `<path>.json`.
void save_checkpoint(const Model& model, const std::string& path);

/// When `expected` is given, the stored config must equal it.
Model load_checkpoint(const std::string& path, const std::optional<ModelConfig>& expected = std::nullopt);

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

}  // namespace tdti::model
