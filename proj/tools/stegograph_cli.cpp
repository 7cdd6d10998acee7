// Command-line front end. Everything goes through the public C API; no core
// headers are included here.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "stegograph.h"

namespace {

int report_status(sg_status status) {
    if (status == SG_OK) return 0;
    std::fprintf(stderr, "error: %s\n", sg_last_error());
    return static_cast<int>(status);
}

int cat_file(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) {
        std::fprintf(stderr, "error: cannot read %s\n", path.c_str());
        return 1;
    }
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) std::fwrite(buf, 1, n, stdout);
    std::fclose(f);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stegograph: patch-graph steganalysis models, data synthesis and experiments"};
    app.require_subcommand(1);

    // covers make
    auto* covers = app.add_subcommand("covers", "synthetic cover images");
    covers->require_subcommand(1);
    auto* covers_make = covers->add_subcommand("make", "generate smooth synthetic covers");
    std::string covers_out;
    int covers_count = 100, covers_h = 128, covers_w = 128;
    unsigned long long covers_seed = 1;
    covers_make->add_option("--out", covers_out, "output directory")->required();
    covers_make->add_option("--count", covers_count, "number of covers");
    covers_make->add_option("--height", covers_h, "image height");
    covers_make->add_option("--width", covers_w, "image width");
    covers_make->add_option("--seed", covers_seed, "master seed");

    // dataset make
    auto* dataset = app.add_subcommand("dataset", "labeled cover/stego corpora");
    dataset->require_subcommand(1);
    auto* dataset_make = dataset->add_subcommand("make", "embed a payload into every cover and split");
    std::string ds_covers, ds_out, ds_algo = "uniform", ds_split;
    double ds_payload = 0.4;
    unsigned long long ds_seed = 1;
    dataset_make->add_option("--covers", ds_covers, "directory of PGM covers")->required();
    dataset_make->add_option("--payload", ds_payload, "bits per pixel")->required();
    dataset_make->add_option("--algo", ds_algo, "cost model: uniform | hill")->required();
    dataset_make->add_option("--seed", ds_seed, "master seed")->required();
    dataset_make->add_option("--out", ds_out, "output directory")->required();
    dataset_make->add_option("--split", ds_split, "train/val/test weights, e.g. 40/10/50");

    // train
    auto* train = app.add_subcommand("train", "train a model from a config file");
    std::string train_config, train_out;
    train->add_option("--config", train_config, "key-value config file")->required();
    train->add_option("--out", train_out, "run directory for checkpoint and report")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "accuracy of a checkpoint on a split");
    std::string eval_ckpt, eval_manifest, eval_split = "test";
    eval->add_option("--ckpt", eval_ckpt, "checkpoint file")->required();
    eval->add_option("--manifest", eval_manifest, "dataset manifest (default: recorded in checkpoint)");
    eval->add_option("--split", eval_split, "train | val | test")->required();

    // compare
    auto* compare = app.add_subcommand("compare", "accuracy table over finished runs");
    std::vector<std::string> compare_runs;
    std::string compare_out = ".";
    compare->add_option("--runs", compare_runs, "run directories")->required()->expected(-1);
    compare->add_option("--out", compare_out, "where to write compare.csv / compare.txt");

    // graph dump
    auto* graph = app.add_subcommand("graph", "graph inspection");
    graph->require_subcommand(1);
    auto* graph_dump = graph->add_subcommand("dump", "write the (A, W) pair for one image");
    std::string gd_image, gd_config, gd_ckpt, gd_out;
    graph_dump->add_option("--image", gd_image, "input PGM image")->required();
    graph_dump->add_option("--config", gd_config, "experiment config file")->required();
    graph_dump->add_option("--ckpt", gd_ckpt, "checkpoint (default: seed-initialized parameters)");
    graph_dump->add_option("--out", gd_out, "output file (default: IMAGE.graph)");

    // predict
    auto* predict = app.add_subcommand("predict", "cover/stego probabilities for one image");
    std::string pr_ckpt, pr_image;
    predict->add_option("--ckpt", pr_ckpt, "checkpoint file")->required();
    predict->add_option("--image", pr_image, "input PGM image")->required();

    CLI11_PARSE(app, argc, argv);

    if (covers_make->parsed())
        return report_status(sg_make_covers(covers_out.c_str(), covers_count, covers_h, covers_w, covers_seed));

    if (dataset_make->parsed()) {
        char manifest[4096] = {0};
        const sg_status status =
            sg_make_dataset(ds_covers.c_str(), ds_out.c_str(), ds_payload, ds_algo.c_str(), ds_seed,
                            ds_split.empty() ? nullptr : ds_split.c_str(), manifest, sizeof(manifest));
        if (status == SG_OK) std::printf("%s\n", manifest);
        return report_status(status);
    }

    if (train->parsed()) {
        const sg_status status = sg_train(train_config.c_str(), train_out.c_str());
        if (status == SG_OK) return cat_file(train_out + "/report.txt");
        return report_status(status);
    }

    if (eval->parsed()) {
        double accuracy = 0.0;
        const sg_status status = sg_evaluate(eval_ckpt.c_str(),
                                             eval_manifest.empty() ? nullptr : eval_manifest.c_str(),
                                             eval_split.c_str(), &accuracy);
        if (status == SG_OK) std::printf("%.6f\n", accuracy);
        return report_status(status);
    }

    if (compare->parsed()) {
        std::vector<const char*> dirs;
        dirs.reserve(compare_runs.size());
        for (const auto& d : compare_runs) dirs.push_back(d.c_str());
        const sg_status status = sg_compare(dirs.data(), dirs.size(), compare_out.c_str());
        if (status == SG_OK) return cat_file(compare_out + "/compare.txt");
        return report_status(status);
    }

    if (graph_dump->parsed()) {
        if (gd_out.empty()) gd_out = gd_image + ".graph";
        const sg_status status = sg_graph_dump(gd_image.c_str(), gd_config.c_str(),
                                               gd_ckpt.empty() ? nullptr : gd_ckpt.c_str(), gd_out.c_str());
        if (status == SG_OK) std::printf("%s\n", gd_out.c_str());
        return report_status(status);
    }

    if (predict->parsed()) {
        sg_model* model = nullptr;
        sg_status status = sg_model_load(pr_ckpt.c_str(), &model);
        if (status != SG_OK) return report_status(status);
        double probs[2] = {0, 0};
        status = sg_model_predict(model, pr_image.c_str(), probs);
        sg_model_free(model);
        if (status == SG_OK) std::printf("cover %.6f\nstego %.6f\n", probs[0], probs[1]);
        return report_status(status);
    }

    return 0;
}
