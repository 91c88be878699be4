#pragma once

#include <string>

#include "presto/model.hpp"
#include "presto/pts_io.hpp"

namespace presto {

// Checkpoint file: magic "PRSTCKPT", format version u16, little-endian; model
// config and normalization stats, then a manifest of named parameters (UTF-8
// name, shape, payload offset) followed by raw 32-bit float payloads.
void write_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::string& path);

}  // namespace presto
