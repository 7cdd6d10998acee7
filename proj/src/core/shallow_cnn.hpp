#pragma once

#include <random>
#include <string>

#include "nn_ops.hpp"
#include "param_init.hpp"

namespace stegograph {

// Truncated XWS-CNN feature extractor: fixed high-pass layer, then k
// conv-norm-activation-pool groups. Channel widths 1 -> 8 -> 16 -> 32 -> 64
// -> 128; groups before the last pool locally (window 5, stride 2), the last
// pools globally.
struct ShallowCnnConfig {
    int group_count = 2;       // k in [1,5]
    std::int64_t patch_h = 0;
    std::int64_t patch_w = 0;

    std::int64_t output_dim() const { return std::int64_t(8) << (group_count - 1); }

    static std::int64_t group_channels(int gi) { return std::int64_t(8) << (gi - 1); }

    // Convolutions pad to preserve size, so only the local pools shrink the
    // extent: s -> (s-5)/2 + 1 after each of the first k-1 groups.
    void validate() const {
        if (group_count < 1 || group_count > 5)
            throw InvalidArgument("cnn config: group count " + std::to_string(group_count) + " outside [1,5]");
        if (patch_h < 1 || patch_w < 1) throw InvalidArgument("cnn config: patch size must be positive");
        std::int64_t h = patch_h, w = patch_w;
        for (int g = 1; g <= group_count; ++g) {
            if (g < group_count) { // local pool needs a full window
                if (h < 5 || w < 5)
                    throw InvalidArgument("cnn config: " + std::to_string(h) + "x" + std::to_string(w) +
                                          " extent entering group " + std::to_string(g) +
                                          " is too small for window-5 pooling with " +
                                          std::to_string(group_count) + " groups");
                h = (h - 5) / 2 + 1;
                w = (w - 5) / 2 + 1;
            }
        }
        if (h < 1 || w < 1) throw InvalidArgument("cnn config: patch vanishes before the final group");
    }
};

// KV high-pass kernel, /12. Zero-sum; frozen as a buffer.
template <typename T>
Tensor<T> kv_kernel() {
    static const double k[25] = {
        -1,  2,  -2,  2, -1, //
         2, -6,   8, -6,  2, //
        -2,  8, -12,  8, -2, //
         2, -6,   8, -6,  2, //
        -1,  2,  -2,  2, -1,
    };
    Tensor<T> t(Shape{1, 1, 5, 5});
    for (int i = 0; i < 25; ++i) t[i] = static_cast<T>(k[i] / 12.0);
    return t;
}

// Registers hpf buffer + per-group conv/bn parameters, drawing weights from
// `gen` in a fixed order.
template <typename T>
void add_cnn_params(ParamStore<T>& store, const ShallowCnnConfig& config, std::mt19937_64& gen) {
    config.validate();
    store.add_buffer("cnn.hpf.w", kv_kernel<T>());
    std::int64_t in_ch = 1;
    for (int g = 1; g <= config.group_count; ++g) {
        const std::int64_t out_ch = ShallowCnnConfig::group_channels(g);
        const std::int64_t ksize = g <= 2 ? 5 : 1;
        const std::string base = "cnn.group" + std::to_string(g);
        add_conv_params(store, base + ".conv", out_ch, in_ch, ksize, ksize, gen);
        add_bn_params(store, base + ".bn", out_ch);
        in_ch = out_ch;
    }
}

template <typename T>
Var<T> hpf_forward(ParamStore<T>& store, const Var<T>& patches) {
    return conv2d(patches, store.get("cnn.hpf.w").node, /*stride=*/1, /*padding=*/2);
}

// One conv-pooling group. Group 1 takes |.| before normalization; groups 1-2
// finish with tanh, later groups with relu.
template <typename T>
Var<T> cnn_group_forward(ParamStore<T>& store, int gi, bool final_group, Var<T> x, Mode mode) {
    const std::string base = "cnn.group" + std::to_string(gi);
    x = conv2d(x, store.get(base + ".conv.w").node, store.get(base + ".conv.b").node, /*stride=*/1,
               /*padding=*/gi <= 2 ? 2 : 0);
    if (gi == 1) x = abs_act(x);
    x = batch_norm(x, store.get(base + ".bn.gamma").node, store.get(base + ".bn.beta").node,
                   store.get(base + ".bn.rmean").node, store.get(base + ".bn.rvar").node, mode);
    x = gi <= 2 ? tanh_act(x) : relu(x);
    if (final_group) return global_avg_pool(x);
    return avg_pool2d(x, /*window=*/5, /*stride=*/2);
}

// [B,1,h_p,w_p] patches -> [B,l] features
template <typename T>
Var<T> extract_features(ParamStore<T>& store, const ShallowCnnConfig& config, const Var<T>& patches, Mode mode) {
    config.validate();
    require_rank(patches->value, 4, "extract_features patches");
    if (patches->value.dim(1) != 1 || patches->value.dim(2) != config.patch_h ||
        patches->value.dim(3) != config.patch_w)
        throw InvalidArgument("extract_features: batch shape " + shape_to_string(patches->value.shape()) +
                              " does not match configured " + std::to_string(config.patch_h) + "x" +
                              std::to_string(config.patch_w) + " patches");
    Var<T> x = hpf_forward(store, patches);
    for (int g = 1; g <= config.group_count; ++g)
        x = cnn_group_forward(store, g, g == config.group_count, x, mode);
    return x;
}

// Baseline head: features -> 2 logits. Softmax is applied by the caller
// (cross-entropy folds it in during training).
template <typename T>
Var<T> cnn_baseline_logits(ParamStore<T>& store, const ShallowCnnConfig& config, const Var<T>& patches, Mode mode) {
    auto features = extract_features(store, config, patches, mode);
    return linear(features, store.get("fc.w").node, store.get("fc.b").node);
}

template <typename T>
Var<T> cnn_baseline_forward(ParamStore<T>& store, const ShallowCnnConfig& config, const Var<T>& patches, Mode mode) {
    return row_softmax(cnn_baseline_logits(store, config, patches, mode));
}

} // namespace stegograph
