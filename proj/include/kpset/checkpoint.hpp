#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "kpset/corpus.hpp"
#include "kpset/model.hpp"

namespace kpset {

/// Binary checkpoint layout, all integers and floats little-endian:
///
///   magic   8 bytes  "KPSETCKP"
///   version u32      kCheckpointVersion
///   hlen    u64      length of the JSON header
///   header  hlen     {"model": {...}, "vocab": [...], "meta": {...}}
///   count   u32      number of tensors
///   count x { u32 name_len, name, u32 rows, u32 cols, rows*cols f64 row-major }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct LoadedCheckpoint {
  Model model;
  Vocabulary vocab;
  nlohmann::json meta;
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Writes to a temporary sibling and renames, so an existing checkpoint is
/// only replaced by a complete one.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     const nlohmann::json& meta = nlohmann::json::object());

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace kpset
