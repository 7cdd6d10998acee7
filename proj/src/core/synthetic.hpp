#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace stegograph {

// Gaussian-smoothed noise field; smooth enough that +-1 embedding changes
// dominate the high-pass residual.
GrayImage synthetic_cover(std::int64_t height, std::int64_t width, std::uint64_t seed);

// count covers written to dir/0000.pgm.. ; returns the paths.
std::vector<std::string> make_covers(const std::string& out_dir, int count, std::int64_t height, std::int64_t width,
                                     std::uint64_t master_seed);

} // namespace stegograph
