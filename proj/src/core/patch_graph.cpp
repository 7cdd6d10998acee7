#include "patch_graph.hpp"

namespace stegograph {

namespace {

// integer stride or error; only consulted when the grid steps in that direction
std::int64_t integer_stride(double frac, std::int64_t patch_dim, const char* which) {
    const double stride = (1.0 - frac) * static_cast<double>(patch_dim);
    const double rounded = std::round(stride);
    if (std::abs(stride - rounded) > 1e-9 || rounded < 1.0)
        throw InvalidArgument(std::string("plan_patches: ") + which + " stride " + std::to_string(stride) +
                              " is not a positive integer");
    return static_cast<std::int64_t>(rounded);
}

} // namespace

PatchPlan plan_patches(std::int64_t h, std::int64_t w, std::int64_t patch_h, std::int64_t patch_w, std::int64_t n,
                       std::int64_t m, double alpha, double beta) {
    if (patch_h < 1 || patch_w < 1 || patch_h > h || patch_w > w)
        throw InvalidArgument("plan_patches: patch size must satisfy 1 <= patch <= image");
    if (n < 1 || m < 1) throw InvalidArgument("plan_patches: grid dimensions must be >= 1");
    if (alpha < 0.0 || alpha >= 1.0 || beta < 0.0 || beta >= 1.0)
        throw InvalidArgument("plan_patches: overlap fractions must lie in [0,1)");

    const std::int64_t col_stride = m > 1 ? integer_stride(alpha, patch_w, "column") : 0;
    const std::int64_t row_stride = n > 1 ? integer_stride(beta, patch_h, "row") : 0;

    PatchPlan plan;
    plan.patch_h = patch_h;
    plan.patch_w = patch_w;
    plan.n = n;
    plan.m = m;
    plan.alpha = alpha;
    plan.beta = beta;
    plan.offsets.reserve(static_cast<std::size_t>(n * m));
    for (std::int64_t u = 0; u < n; ++u)
        for (std::int64_t v = 0; v < m; ++v) {
            const std::int64_t f = 1 + u * row_stride;
            const std::int64_t g = 1 + v * col_stride;
            if (f + patch_h - 1 > h || g + patch_w - 1 > w)
                throw InvalidArgument("plan_patches: patch (" + std::to_string(u + 1) + "," + std::to_string(v + 1) +
                                      ") at (" + std::to_string(f) + "," + std::to_string(g) + ") exceeds " +
                                      std::to_string(h) + "x" + std::to_string(w) + " image");
            plan.offsets.emplace_back(f, g);
        }
    return plan;
}

TopologyKind topology_from_string(const std::string& s) {
    if (s == "complete") return TopologyKind::Complete;
    if (s == "lattice") return TopologyKind::Lattice;
    throw InvalidArgument("unknown topology '" + s + "' (expected complete or lattice)");
}

std::string topology_name(TopologyKind kind) {
    return kind == TopologyKind::Complete ? "complete" : "lattice";
}

GraphTopology build_complete_graph(std::int64_t node_count) {
    if (node_count < 1) throw InvalidArgument("build_complete_graph: need at least one node");
    GraphTopology t;
    t.node_count = node_count;
    t.adjacency.assign(static_cast<std::size_t>(node_count * node_count), 1);
    for (std::int64_t i = 0; i < node_count; ++i) t.set(i, i, false);
    return t;
}

GraphTopology build_lattice_graph(std::int64_t n, std::int64_t m) {
    if (n < 1 || m < 1) throw InvalidArgument("build_lattice_graph: grid dimensions must be >= 1");
    GraphTopology t;
    t.node_count = n * m;
    t.adjacency.assign(static_cast<std::size_t>(t.node_count * t.node_count), 0);
    for (std::int64_t a = 0; a < n; ++a)
        for (std::int64_t b = 0; b < m; ++b)
            for (std::int64_t c = 0; c < n; ++c)
                for (std::int64_t d = 0; d < m; ++d) {
                    const std::int64_t cheb = std::max(std::abs(a - c), std::abs(b - d));
                    if (cheb == 1) t.set(a * m + b, c * m + d, true);
                }
    return t;
}

GraphTopology add_self_loops(GraphTopology t) {
    for (std::int64_t i = 0; i < t.node_count; ++i) t.set(i, i, true);
    return t;
}

GraphTopology build_topology(TopologyKind kind, std::int64_t n, std::int64_t m) {
    return kind == TopologyKind::Complete ? build_complete_graph(n * m) : build_lattice_graph(n, m);
}

} // namespace stegograph
