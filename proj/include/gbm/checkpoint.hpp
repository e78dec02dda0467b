#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "gbm/scorenet.hpp"

namespace gbm {

/// Checkpoint container: one line of JSON (architecture, version, endianness,
/// block table, payload size and FNV-1a checksum), a newline, then the
/// parameter blocks as little-endian IEEE-754 binary32 in declaration order
/// (layer0.weight, layer0.bias, layer1.weight, ...), each column-major.
inline constexpr int checkpoint_version = 1;

template <typename Scalar>
struct LoadedCheckpoint {
  ScoreNet<Scalar> net;
  nlohmann::json metadata;
};

nlohmann::json architecture_to_json(const ScoreNetArchitecture& arch);
ScoreNetArchitecture architecture_from_json(const nlohmann::json& j);

std::uint64_t fnv1a64(const void* data, std::size_t size);

/// Writes atomically (temporary file + rename).
template <typename Scalar>
void save_checkpoint(const ScoreNet<Scalar>& net, const std::filesystem::path& path,
                     const nlohmann::json& metadata = nlohmann::json::object());

/// Throws LoadError on unreadable, truncated, corrupted or version-mismatched
/// files and StructuralError when the block table disagrees with the
/// architecture. Nothing is returned on failure.
template <typename Scalar>
LoadedCheckpoint<Scalar> load_checkpoint(const std::filesystem::path& path);

}  // namespace gbm
