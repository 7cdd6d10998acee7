#include "synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "rng.hpp"

namespace stegograph {

namespace {

std::int64_t reflect(std::int64_t i, std::int64_t n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// separable blur with mirror padding
void gaussian_blur(std::vector<double>& field, std::int64_t h, std::int64_t w, double sigma, std::int64_t radius) {
    std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
    double norm = 0;
    for (std::int64_t d = -radius; d <= radius; ++d) {
        taps[static_cast<std::size_t>(d + radius)] = std::exp(-static_cast<double>(d * d) / (2.0 * sigma * sigma));
        norm += taps[static_cast<std::size_t>(d + radius)];
    }
    for (double& t : taps) t /= norm;

    std::vector<double> tmp(field.size());
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0;
            for (std::int64_t d = -radius; d <= radius; ++d)
                acc += field[static_cast<std::size_t>(y * w + reflect(x + d, w))] *
                       taps[static_cast<std::size_t>(d + radius)];
            tmp[static_cast<std::size_t>(y * w + x)] = acc;
        }
    for (std::int64_t x = 0; x < w; ++x)
        for (std::int64_t y = 0; y < h; ++y) {
            double acc = 0;
            for (std::int64_t d = -radius; d <= radius; ++d)
                acc += tmp[static_cast<std::size_t>(reflect(y + d, h) * w + x)] *
                       taps[static_cast<std::size_t>(d + radius)];
            field[static_cast<std::size_t>(y * w + x)] = acc;
        }
}

} // namespace

GrayImage synthetic_cover(std::int64_t height, std::int64_t width, std::uint64_t seed) {
    const std::int64_t n = height * width;
    std::vector<double> field(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i)
        field[static_cast<std::size_t>(i)] = counter_uniform(seed, static_cast<std::uint64_t>(i)) * 255.0;
    gaussian_blur(field, height, width, /*sigma=*/1.5, /*radius=*/4);

    // small per-image brightness shift for corpus diversity
    const double offset = (counter_uniform(seed, static_cast<std::uint64_t>(n) + 1) - 0.5) * 60.0;

    GrayImage img(height, width);
    for (std::int64_t i = 0; i < n; ++i) {
        const double v = std::round(field[static_cast<std::size_t>(i)] + offset);
        img.pixels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return img;
}

std::vector<std::string> make_covers(const std::string& out_dir, int count, std::int64_t height, std::int64_t width,
                                     std::uint64_t master_seed) {
    if (count < 1) throw InvalidArgument("make_covers: count must be positive");
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> paths;
    paths.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        char name[16];
        std::snprintf(name, sizeof(name), "%04d.pgm", i);
        const GrayImage img = synthetic_cover(height, width, derive_seed(master_seed, static_cast<std::uint64_t>(i)));
        const std::string path = (std::filesystem::path(out_dir) / name).string();
        save_pgm(img, path);
        paths.push_back(path);
    }
    return paths;
}

} // namespace stegograph
