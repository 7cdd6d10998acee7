#pragma once

#include <map>
#include <string>

#include "autodiff.hpp"

namespace stegograph {

// Checkpoint file: a text manifest followed by one raw little-endian float32
// blob. Manifest lines:
//   STEGOGRAPH-CKPT-1
//   config <key> <value>
//   tensor <param|buffer> <name> <rank> <dim...> <byte_offset>
//   blob <total_bytes>
// Tensors appear in store order (parameters first, then buffers), which is
// also the blob layout.
inline constexpr const char* kCheckpointMagic = "STEGOGRAPH-CKPT-1";

struct LoadedCheckpoint {
    std::map<std::string, std::string> config;
    ParamStore<float> store;
};

void save_checkpoint(const std::string& path, const ParamStore<float>& store,
                     const std::map<std::string, std::string>& config);

LoadedCheckpoint load_checkpoint(const std::string& path);

// Overwrites values of an existing store (shapes must match) so persistent
// optimizer/graph wiring survives a reload.
void assign_from_checkpoint(ParamStore<float>& store, const LoadedCheckpoint& ckpt);

} // namespace stegograph
