#pragma once

#include <memory>
#include <string>

#include "xtrl/nn.hpp"

namespace xtrl {

// Versioned binary checkpoint: magic, format version, architecture
// descriptor, raw little-endian parameter buffers in declaration order and a
// checksum trailer.
void save_checkpoint(const std::string& path, const ActorCritic& net);

// Rebuilds the network from the stored architecture descriptor. Throws
// ParseError on a bad magic, version, truncation or checksum mismatch.
std::unique_ptr<ActorCritic> load_checkpoint(const std::string& path);

}  // namespace xtrl
