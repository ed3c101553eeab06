#pragma once

#include <filesystem>

#include "lgn/model.hpp"

namespace lgn {

// Checkpoint layout: one line of compact JSON (config, vocabulary, ordered
// parameter manifest with shapes), then the parameter payloads as
// little-endian 64-bit floats in manifest order.
void save_checkpoint(const std::filesystem::path& path, const LgnModel& model);

// Rebuilds the model and verifies each manifest entry against the
// configuration-derived shape; a mismatch names the offending parameter.
LgnModel load_checkpoint(const std::filesystem::path& path);

}  // namespace lgn
