#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "stml/model.hpp"

namespace stml {

struct CheckpointInfo {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

struct LoadedCheckpoint {
  ModelParams params;
  CheckpointInfo info;
};

/// Writes `<stem>.manifest` (text) and `<stem>.bin` (little-endian f64 parameters).
/// Returns the manifest path.
std::filesystem::path save_checkpoint(const ModelParams& params, const CheckpointInfo& info,
                                      const std::filesystem::path& stem);

/// Reads a manifest and its sibling parameter file. Throws ParseError on a
/// malformed manifest or a parameter file of the wrong length.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest_path);

}  // namespace stml
