#pragma once

#include <filesystem>

#include "mkg/xmodal/model.hpp"

namespace mkg::xmodal {

// Layout: "MKGXCKPT", u32 version, u32 metadata length, metadata JSON
// (config + vocabulary), u32 tensor count, then per tensor: u32 name length,
// name, u32 rows, u32 cols, rows*cols little-endian float32.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::filesystem::path& path);
// Validates every tensor against the shapes implied by the stored config.
Model load_checkpoint(const std::filesystem::path& path);

// Rounds every parameter to float32, matching what a save/load round trip
// yields.
void round_to_float(Encoders& enc);

}  // namespace mkg::xmodal
