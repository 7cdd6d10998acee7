#pragma once

#include <functional>
#include <map>
#include <random>
#include <vector>

#include "gat.hpp"
#include "image.hpp"
#include "patch_graph.hpp"
#include "shallow_cnn.hpp"
#include "text_util.hpp"

namespace stegograph {

enum class ModelKind { Cnn, CnnGat };

inline ModelKind model_kind_from_string(const std::string& s) {
    if (s == "cnn") return ModelKind::Cnn;
    if (s == "cnn-gat") return ModelKind::CnnGat;
    throw InvalidArgument("unknown model kind '" + s + "' (expected cnn or cnn-gat)");
}

inline std::string model_kind_name(ModelKind kind) { return kind == ModelKind::Cnn ? "cnn" : "cnn-gat"; }

// Everything needed to build and run a model. The cnn baseline treats the
// whole image as a single patch; cnn-gat tiles the image per the plan and
// runs the attention stack over patch features.
struct ModelConfig {
    ModelKind kind = ModelKind::CnnGat;
    ShallowCnnConfig cnn;                       // patch size lives here
    std::int64_t grid_n = 3, grid_m = 3;
    double alpha = 0.5, beta = 0.5;
    TopologyKind topology = TopologyKind::Complete;
    std::int64_t gat_d1 = 0, gat_d2 = 0;        // 0 -> default to l

    GatConfig gat_config() const {
        GatConfig g;
        g.input_dim = cnn.output_dim();
        g.d1 = gat_d1;
        g.d2 = gat_d2;
        g.apply_defaults();
        return g;
    }

    void validate() const {
        cnn.validate();
        if (kind == ModelKind::CnnGat) {
            if (grid_n < 1 || grid_m < 1) throw InvalidArgument("model config: grid dimensions must be >= 1");
            gat_config().validate();
        }
    }

    PatchPlan plan_for(std::int64_t image_h, std::int64_t image_w) const {
        if (kind == ModelKind::Cnn) {
            if (image_h != cnn.patch_h || image_w != cnn.patch_w)
                throw InvalidArgument("cnn baseline expects images of exactly " + std::to_string(cnn.patch_h) + "x" +
                                      std::to_string(cnn.patch_w));
            return plan_patches(image_h, image_w, cnn.patch_h, cnn.patch_w, 1, 1, 0.0, 0.0);
        }
        return plan_patches(image_h, image_w, cnn.patch_h, cnn.patch_w, grid_n, grid_m, alpha, beta);
    }
};

// The checkpoint config block carries enough to rebuild the model.
inline std::map<std::string, std::string> model_config_to_map(const ModelConfig& config) {
    return {
        {"model", model_kind_name(config.kind)},
        {"group_count", std::to_string(config.cnn.group_count)},
        {"patch_h", std::to_string(config.cnn.patch_h)},
        {"patch_w", std::to_string(config.cnn.patch_w)},
        {"grid_n", std::to_string(config.grid_n)},
        {"grid_m", std::to_string(config.grid_m)},
        {"alpha", format_double(config.alpha)},
        {"beta", format_double(config.beta)},
        {"topology", topology_name(config.topology)},
        {"gat_d1", std::to_string(config.gat_d1)},
        {"gat_d2", std::to_string(config.gat_d2)},
    };
}

inline ModelConfig model_config_from_map(const std::map<std::string, std::string>& map) {
    auto need = [&map](const char* key) -> const std::string& {
        auto it = map.find(key);
        if (it == map.end()) throw InvalidArgument(std::string("model config: missing key '") + key + "'");
        return it->second;
    };
    ModelConfig config;
    config.kind = model_kind_from_string(need("model"));
    config.cnn.group_count = static_cast<int>(parse_int(need("group_count"), "group_count"));
    config.cnn.patch_h = parse_int(need("patch_h"), "patch_h");
    config.cnn.patch_w = parse_int(need("patch_w"), "patch_w");
    config.grid_n = parse_int(need("grid_n"), "grid_n");
    config.grid_m = parse_int(need("grid_m"), "grid_m");
    config.alpha = parse_double(need("alpha"), "alpha");
    config.beta = parse_double(need("beta"), "beta");
    config.topology = topology_from_string(need("topology"));
    config.gat_d1 = parse_int(need("gat_d1"), "gat_d1");
    config.gat_d2 = parse_int(need("gat_d2"), "gat_d2");
    config.validate();
    return config;
}

// All trainable state, seeded deterministically from the master seed.
template <typename T>
ParamStore<T> build_model_params(const ModelConfig& config, std::uint64_t master_seed) {
    config.validate();
    std::mt19937_64 gen(derive_seed(master_seed, /*stream=*/1));
    ParamStore<T> store;
    add_cnn_params(store, config.cnn, gen);
    if (config.kind == ModelKind::Cnn) {
        add_linear_params(store, "fc", config.cnn.output_dim(), 2, gen);
    } else {
        add_gat_params(store, config.gat_config(), gen);
    }
    return store;
}

// Per-batch intermediates the tests inspect after backward().
template <typename T>
struct ModelTrace {
    Var<T> patch_features; // [B*nm, l] (cnn-gat) or [B, l] (baseline)
    Var<T> logits;         // [B, 2]
};

// Batched forward to logits. Images are tiled per the plan, all patches of
// the batch run through the shared CNN as one batch, then each image's nm
// feature rows go through the GAT stack.
template <typename T>
ModelTrace<T> model_logits(ParamStore<T>& store, const ModelConfig& config, const std::vector<GrayImage>& images,
                           Mode mode) {
    if (images.empty()) throw InvalidArgument("model forward: empty batch");
    const PatchPlan plan = config.plan_for(images[0].height, images[0].width);
    const std::int64_t nm = plan.node_count();
    const std::int64_t batch = static_cast<std::int64_t>(images.size());

    Tensor<T> patches(Shape{batch * nm, 1, plan.patch_h, plan.patch_w});
    T* dst = patches.data();
    const std::int64_t patch_elems = plan.patch_h * plan.patch_w;
    for (const auto& img : images) {
        if (img.height != images[0].height || img.width != images[0].width)
            throw InvalidArgument("model forward: mixed image sizes in one batch");
        PatchGrid<T> grid = extract_patches<T>(img, plan);
        for (const auto& p : grid.patches) {
            std::copy(p.data(), p.data() + patch_elems, dst);
            dst += patch_elems;
        }
    }

    ModelTrace<T> trace;
    auto patch_var = make_const(std::move(patches));
    if (config.kind == ModelKind::Cnn) {
        trace.patch_features = extract_features(store, config.cnn, patch_var, mode);
        trace.logits = linear(trace.patch_features, store.get("fc.w").node, store.get("fc.b").node);
        return trace;
    }

    trace.patch_features = extract_features(store, config.cnn, patch_var, mode);
    const GraphTopology topology = add_self_loops(build_topology(config.topology, plan.n, plan.m));
    std::vector<Var<T>> graph_rows;
    graph_rows.reserve(static_cast<std::size_t>(batch));
    for (std::int64_t i = 0; i < batch; ++i) {
        auto node_features = slice_rows(trace.patch_features, i * nm, nm);
        graph_rows.push_back(gat_graph_features(store, topology, node_features));
    }
    auto graph_features = batch == 1 ? graph_rows[0] : concat_rows(graph_rows);
    trace.logits = classify_logits(store, graph_features);
    return trace;
}

// Probabilities for a batch of images; eval-mode, no tape.
template <typename T>
Tensor<T> model_predict(ParamStore<T>& store, const ModelConfig& config, const std::vector<GrayImage>& images) {
    NoGradGuard guard;
    auto trace = model_logits(store, config, images, Mode::Eval);
    return row_softmax(trace.logits)->value;
}

// argmax with ties to class 0
template <typename T>
std::vector<int> predict_classes(const Tensor<T>& probabilities) {
    require_rank(probabilities, 2, "predict_classes");
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(probabilities.dim(0)));
    for (std::int64_t i = 0; i < probabilities.dim(0); ++i)
        out.push_back(probabilities.at(i, 1) > probabilities.at(i, 0) ? 1 : 0);
    return out;
}

// Image -> (A with self-loops, node feature matrix) via a caller-supplied
// patch-batch extractor mapping [nm,1,h_p,w_p] -> [nm,l].
template <typename T>
std::pair<GraphTopology, Tensor<T>> image_to_graph(const GrayImage& image, const PatchPlan& plan, TopologyKind kind,
                                                   const std::function<Tensor<T>(const Tensor<T>&)>& extractor) {
    PatchGrid<T> grid = extract_patches<T>(image, plan);
    Tensor<T> features = extractor(stack_patches(grid));
    require_rank(features, 2, "image_to_graph features");
    if (features.dim(0) != plan.node_count())
        throw InvalidArgument("image_to_graph: extractor returned " + std::to_string(features.dim(0)) +
                              " rows for " + std::to_string(plan.node_count()) + " patches");
    GraphTopology topology = add_self_loops(build_topology(kind, plan.n, plan.m));
    return {std::move(topology), std::move(features)};
}

} // namespace stegograph
