#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"
#include "tensor.hpp"

namespace stegograph {

// Grid of overlapping patch placements. Offsets are 1-based (row, col) of each
// patch's top-left pixel, raster order: grid position (u,v) -> index (u-1)*m+(v-1).
struct PatchPlan {
    std::int64_t patch_h = 0, patch_w = 0;
    std::int64_t n = 0, m = 0; // grid rows, cols
    double alpha = 0.0, beta = 0.0;
    std::vector<std::pair<std::int64_t, std::int64_t>> offsets; // (f, g) per node

    std::int64_t node_count() const { return n * m; }
};

// Column stride is (1-alpha)*patch_w, row stride (1-beta)*patch_h; both must be
// whole numbers of pixels wherever the grid actually steps. Every patch must
// lie inside the image.
PatchPlan plan_patches(std::int64_t h, std::int64_t w, std::int64_t patch_h, std::int64_t patch_w, std::int64_t n,
                       std::int64_t m, double alpha, double beta);

enum class TopologyKind { Complete, Lattice };

TopologyKind topology_from_string(const std::string& s);
std::string topology_name(TopologyKind kind);

// Symmetric boolean adjacency, dense row-major.
struct GraphTopology {
    std::int64_t node_count = 0;
    std::vector<std::uint8_t> adjacency; // node_count^2 entries

    std::uint8_t at(std::int64_t i, std::int64_t j) const {
        return adjacency[static_cast<std::size_t>(i * node_count + j)];
    }
    void set(std::int64_t i, std::int64_t j, bool v) {
        adjacency[static_cast<std::size_t>(i * node_count + j)] = v ? 1 : 0;
    }
    bool has_full_diagonal() const {
        for (std::int64_t i = 0; i < node_count; ++i)
            if (!at(i, i)) return false;
        return true;
    }
    std::int64_t undirected_edge_count() const { // off-diagonal pairs
        std::int64_t e = 0;
        for (std::int64_t i = 0; i < node_count; ++i)
            for (std::int64_t j = i + 1; j < node_count; ++j) e += at(i, j) ? 1 : 0;
        return e;
    }
};

GraphTopology build_complete_graph(std::int64_t node_count);

// Edge between grid cells (a,b) and (c,d) iff max(|a-c|,|b-d|) = 1, i.e. the
// 8-neighborhood of the n x m grid.
GraphTopology build_lattice_graph(std::int64_t n, std::int64_t m);

GraphTopology add_self_loops(GraphTopology t);

GraphTopology build_topology(TopologyKind kind, std::int64_t n, std::int64_t m);

// Patches in raster order, each [1,1,patch_h,patch_w], raw 0-255 values.
template <typename T>
struct PatchGrid {
    PatchPlan plan;
    std::vector<Tensor<T>> patches;
};

template <typename T>
PatchGrid<T> extract_patches(const GrayImage& image, const PatchPlan& plan) {
    if (plan.n < 1 || plan.m < 1 || plan.offsets.size() != static_cast<std::size_t>(plan.node_count()))
        throw InvalidArgument("extract_patches: malformed plan");
    PatchGrid<T> grid;
    grid.plan = plan;
    grid.patches.reserve(plan.offsets.size());
    for (const auto& [f, g] : plan.offsets) {
        if (f < 1 || g < 1 || f + plan.patch_h - 1 > image.height || g + plan.patch_w - 1 > image.width)
            throw InvalidArgument("extract_patches: plan does not fit a " + std::to_string(image.height) + "x" +
                                  std::to_string(image.width) + " image");
        Tensor<T> patch(Shape{1, 1, plan.patch_h, plan.patch_w});
        for (std::int64_t y = 0; y < plan.patch_h; ++y)
            for (std::int64_t x = 0; x < plan.patch_w; ++x)
                patch.at(0, 0, y, x) = static_cast<T>(image.at(f - 1 + y, g - 1 + x));
        grid.patches.push_back(std::move(patch));
    }
    return grid;
}

// All patches as one [n*m, 1, patch_h, patch_w] batch for the shared CNN.
template <typename T>
Tensor<T> stack_patches(const PatchGrid<T>& grid) {
    if (grid.patches.empty()) throw InvalidArgument("stack_patches: empty grid");
    const std::int64_t hp = grid.plan.patch_h, wp = grid.plan.patch_w;
    Tensor<T> out(Shape{static_cast<std::int64_t>(grid.patches.size()), 1, hp, wp});
    T* dst = out.data();
    for (const auto& p : grid.patches) {
        std::copy(p.data(), p.data() + hp * wp, dst);
        dst += hp * wp;
    }
    return out;
}

} // namespace stegograph
