#pragma once

#include <string>

#include "trainer.hpp"

namespace stegograph {

// Writes the (A, W) pair for one image: a text manifest (node count,
// topology, 1-based patch offsets, edge list including self-loops) followed
// by the node feature matrix as a raw float32 blob. Features come from a
// checkpoint when given, otherwise from seed-initialized parameters.
void dump_graph(const std::string& image_path, const ExperimentConfig& config, const std::string& ckpt_path,
                const std::string& out_path);

} // namespace stegograph
