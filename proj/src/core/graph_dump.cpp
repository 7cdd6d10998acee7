#include "graph_dump.hpp"

#include <fstream>

#include "checkpoint.hpp"

namespace stegograph {

void dump_graph(const std::string& image_path, const ExperimentConfig& config, const std::string& ckpt_path,
                const std::string& out_path) {
    const GrayImage image = load_pgm(image_path);
    const ModelConfig& model = config.model;
    const PatchPlan plan = model.plan_for(image.height, image.width);

    ParamStore<float> store = build_model_params<float>(model, config.master_seed);
    if (!ckpt_path.empty()) assign_from_checkpoint(store, load_checkpoint(ckpt_path));

    auto extractor = [&store, &model](const Tensor<float>& batch) {
        NoGradGuard guard;
        return extract_features(store, model.cnn, make_const(batch), Mode::Eval)->value;
    };
    auto [topology, features] =
        image_to_graph<float>(image, plan, model.kind == ModelKind::Cnn ? TopologyKind::Complete : model.topology,
                              extractor);

    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + out_path);
    out << "STEGOGRAPH-GRAPH-1\n";
    out << "nodes " << topology.node_count << "\n";
    out << "topology " << (model.kind == ModelKind::Cnn ? "complete" : topology_name(model.topology)) << "\n";
    for (const auto& [f, g] : plan.offsets) out << "patch " << f << " " << g << "\n";
    for (std::int64_t i = 0; i < topology.node_count; ++i) // 1-based ids, i <= j, self-loops included
        for (std::int64_t j = i; j < topology.node_count; ++j)
            if (topology.at(i, j)) out << "edge " << i + 1 << " " << j + 1 << "\n";
    out << "features " << features.dim(0) << " " << features.dim(1) << "\n";
    out << "blob " << features.numel() * static_cast<std::int64_t>(sizeof(float)) << "\n";
    out.write(reinterpret_cast<const char*>(features.data()),
              features.numel() * static_cast<std::streamsize>(sizeof(float)));
    if (!out) throw IoError("write failed: " + out_path);
}

} // namespace stegograph
