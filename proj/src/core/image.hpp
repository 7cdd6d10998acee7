#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace stegograph {

// 8-bit grayscale image, row-major.
struct GrayImage {
    std::int64_t height = 0;
    std::int64_t width = 0;
    std::vector<std::uint8_t> pixels;

    GrayImage() = default;
    GrayImage(std::int64_t h, std::int64_t w, std::uint8_t fill = 0)
        : height(h), width(w), pixels(static_cast<std::size_t>(h * w), fill) {
        if (h < 1 || w < 1) throw InvalidArgument("image dimensions must be positive");
    }

    std::uint8_t& at(std::int64_t y, std::int64_t x) { return pixels[static_cast<std::size_t>(y * width + x)]; }
    std::uint8_t at(std::int64_t y, std::int64_t x) const { return pixels[static_cast<std::size_t>(y * width + x)]; }
};

// Binary PGM (P5), maxval up to 255.
GrayImage load_pgm(const std::string& path);
void save_pgm(const GrayImage& image, const std::string& path);

} // namespace stegograph
