#pragma once

#include <random>
#include <string>

#include "nn_ops.hpp"
#include "param_init.hpp"
#include "patch_graph.hpp"

namespace stegograph {

// Two single-head graph attention layers (l -> d1 -> d2) followed by the
// mean readout and a 64-wide two-way classifier head.
struct GatConfig {
    std::int64_t input_dim = 0; // l, the CNN feature width
    std::int64_t d1 = 0;        // first layer output dim (defaults to l)
    std::int64_t d2 = 0;        // second layer output dim (defaults to l)

    void apply_defaults() {
        if (d1 == 0) d1 = input_dim;
        if (d2 == 0) d2 = input_dim;
    }
    void validate() const {
        if (input_dim < 1 || d1 < 1 || d2 < 1) throw InvalidArgument("gat config: dimensions must be positive");
    }
};

template <typename T>
void add_gat_params(ParamStore<T>& store, const GatConfig& config, std::mt19937_64& gen) {
    config.validate();
    const std::int64_t dims[3] = {config.input_dim, config.d1, config.d2};
    for (int layer = 1; layer <= 2; ++layer) {
        const std::int64_t in = dims[layer - 1], out = dims[layer];
        const std::string base = "gat.layer" + std::to_string(layer);
        store.add_parameter(base + ".wproj", uniform_tensor<T>(Shape{in, out}, fan_in_bound<T>(in), gen));
        store.add_parameter(base + ".attn", uniform_tensor<T>(Shape{2 * out}, fan_in_bound<T>(2 * out), gen));
    }
    add_linear_params(store, "head.fc1", config.d2, 64, gen);
    add_linear_params(store, "head.fc2", 64, 2, gen);
}

template <typename T>
Tensor<T> adjacency_mask(const GraphTopology& topology) {
    Tensor<T> mask(Shape{topology.node_count, topology.node_count});
    for (std::int64_t i = 0; i < topology.node_count * topology.node_count; ++i)
        mask[i] = topology.adjacency[static_cast<std::size_t>(i)] ? T(1) : T(0);
    return mask;
}

// Attention coefficients: alpha = masked_softmax(leaky_relu(a_l.HP_i + a_r.HP_j))
// where HP = H * W_proj and [a_l ; a_r] is the attention vector. Rows sum to 1
// over each node's neighborhood; non-neighbors get exact zeros.
template <typename T>
Var<T> gat_attention(const GraphTopology& topology, const Var<T>& projected, const Var<T>& attn) {
    const std::int64_t out_dim = projected->value.dim(1);
    require_shape(attn->value, Shape{2 * out_dim}, "gat attention vector");
    auto attn_mat = reshape(attn, Shape{2 * out_dim, 1});
    auto col = matmul(projected, slice_rows(attn_mat, 0, out_dim));      // a_l . HP_i
    auto row = matmul(projected, slice_rows(attn_mat, out_dim, out_dim)); // a_r . HP_j
    auto scores = leaky_relu(pair_sum(col, row), T(0.2));
    return masked_row_softmax(scores, adjacency_mask<T>(topology));
}

// One layer: h'_i = sigma(sum_j alpha_ij * HP_j). sigma is elu between the
// two layers and identity after the final one.
template <typename T>
Var<T> gat_layer_forward(const GraphTopology& topology, const Var<T>& h, const Var<T>& wproj, const Var<T>& attn,
                         bool apply_elu) {
    require_rank(h->value, 2, "gat layer input");
    if (h->value.dim(0) != topology.node_count)
        throw InvalidArgument("gat layer: " + std::to_string(h->value.dim(0)) + " feature rows for " +
                              std::to_string(topology.node_count) + " nodes");
    if (!topology.has_full_diagonal())
        throw InvalidArgument("gat layer: adjacency lacks self-loops; an isolated node would have an empty softmax");
    auto projected = matmul(h, wproj);
    auto alpha = gat_attention(topology, projected, attn);
    auto out = matmul(alpha, projected);
    return apply_elu ? elu(out) : out;
}

// Mean over nodes: [nm, d] -> [1, d].
template <typename T>
Var<T> readout(const Var<T>& node_features) {
    return mean_rows(node_features);
}

// relu(g*W1+b1)*W2+b2 over graph-level rows; softmax left to the caller.
template <typename T>
Var<T> classify_logits(ParamStore<T>& store, const Var<T>& graph_features) {
    auto hidden = relu(linear(graph_features, store.get("head.fc1.w").node, store.get("head.fc1.b").node));
    return linear(hidden, store.get("head.fc2.w").node, store.get("head.fc2.b").node);
}

template <typename T>
Var<T> classify(ParamStore<T>& store, const Var<T>& graph_features) {
    return row_softmax(classify_logits(store, graph_features));
}

// Both layers + readout: node features [nm, l] -> graph vector [1, d2].
template <typename T>
Var<T> gat_graph_features(ParamStore<T>& store, const GraphTopology& topology, const Var<T>& node_features) {
    auto h1 = gat_layer_forward(topology, node_features, store.get("gat.layer1.wproj").node,
                                store.get("gat.layer1.attn").node, /*apply_elu=*/true);
    auto h2 = gat_layer_forward(topology, h1, store.get("gat.layer2.wproj").node, store.get("gat.layer2.attn").node,
                                /*apply_elu=*/false);
    return readout(h2);
}

} // namespace stegograph
