#include "stegograph.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "../core/checkpoint.hpp"
#include "../core/graph_dump.hpp"
#include "../core/stego_sim.hpp"
#include "../core/synthetic.hpp"
#include "../core/trainer.hpp"

namespace {

thread_local std::string g_last_error;

sg_status fail(sg_status code, const std::string& message) {
    g_last_error = message;
    return code;
}

// Maps the library's exception taxonomy onto status codes.
template <typename Fn>
sg_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return SG_OK;
    } catch (const stegograph::InvalidArgument& e) {
        return fail(SG_ERR_INVALID_ARGUMENT, e.what());
    } catch (const stegograph::IoError& e) {
        return fail(SG_ERR_IO, e.what());
    } catch (const stegograph::NumericError& e) {
        return fail(SG_ERR_NUMERIC, e.what());
    } catch (const std::exception& e) {
        return fail(SG_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(SG_ERR_INTERNAL, "unknown error");
    }
}

sg_status require(const void* p, const char* name) {
    if (p) return SG_OK;
    return fail(SG_ERR_INVALID_ARGUMENT, std::string(name) + " must not be NULL");
}

} // namespace

struct sg_model {
    stegograph::ModelConfig config;
    stegograph::ParamStore<float> store;
};

extern "C" {

const char* sg_last_error(void) { return g_last_error.c_str(); }

sg_status sg_make_covers(const char* out_dir, int count, int height, int width, unsigned long long seed) {
    if (require(out_dir, "out_dir") != SG_OK) return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] { stegograph::make_covers(out_dir, count, height, width, seed); });
}

sg_status sg_make_dataset(const char* covers_dir, const char* out_dir, double payload_bpp, const char* algorithm,
                          unsigned long long seed, const char* split_spec, char* manifest_path_out,
                          size_t manifest_path_cap) {
    if (require(covers_dir, "covers_dir") != SG_OK || require(out_dir, "out_dir") != SG_OK ||
        require(algorithm, "algorithm") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] {
        stegograph::DatasetConfig config;
        config.payload_bpp = payload_bpp;
        config.algorithm = algorithm;
        config.master_seed = seed;
        if (split_spec && *split_spec) {
            const auto parts = stegograph::split(split_spec, '/');
            if (parts.size() != 3)
                throw stegograph::InvalidArgument("split_spec must look like 40/10/50, got '" +
                                                  std::string(split_spec) + "'");
            config.split_train = stegograph::parse_double(parts[0], "split_spec");
            config.split_val = stegograph::parse_double(parts[1], "split_spec");
            config.split_test = stegograph::parse_double(parts[2], "split_spec");
        }
        const std::string manifest = stegograph::make_dataset(covers_dir, config, out_dir);
        if (manifest_path_out && manifest_path_cap > 0) {
            std::strncpy(manifest_path_out, manifest.c_str(), manifest_path_cap - 1);
            manifest_path_out[manifest_path_cap - 1] = '\0';
        }
    });
}

sg_status sg_train(const char* config_path, const char* out_dir) {
    if (require(config_path, "config_path") != SG_OK || require(out_dir, "out_dir") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] {
        const auto config = stegograph::load_experiment_config(config_path);
        stegograph::train(config, out_dir);
    });
}

sg_status sg_evaluate(const char* ckpt_path, const char* manifest_path, const char* split, double* accuracy_out) {
    if (require(ckpt_path, "ckpt_path") != SG_OK || require(split, "split") != SG_OK ||
        require(accuracy_out, "accuracy_out") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] {
        *accuracy_out =
            stegograph::evaluate_checkpoint(ckpt_path, manifest_path ? manifest_path : "", split);
    });
}

sg_status sg_compare(const char* const* run_dirs, size_t run_count, const char* out_dir) {
    if (require(run_dirs, "run_dirs") != SG_OK || require(out_dir, "out_dir") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] {
        std::vector<std::string> dirs(run_dirs, run_dirs + run_count);
        const auto rows = stegograph::compare_runs(dirs);
        std::filesystem::create_directories(out_dir);
        const auto csv_path = std::filesystem::path(out_dir) / "compare.csv";
        const auto txt_path = std::filesystem::path(out_dir) / "compare.txt";
        std::ofstream csv(csv_path, std::ios::trunc);
        csv << stegograph::compare_table_csv(rows);
        std::ofstream txt(txt_path, std::ios::trunc);
        txt << stegograph::compare_table_text(rows);
        if (!csv || !txt) throw stegograph::IoError("cannot write comparison tables in " + std::string(out_dir));
    });
}

sg_status sg_graph_dump(const char* image_path, const char* config_path, const char* ckpt_path,
                        const char* out_path) {
    if (require(image_path, "image_path") != SG_OK || require(config_path, "config_path") != SG_OK ||
        require(out_path, "out_path") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] {
        const auto config = stegograph::load_experiment_config(config_path);
        stegograph::dump_graph(image_path, config, ckpt_path ? ckpt_path : "", out_path);
    });
}

sg_status sg_model_load(const char* ckpt_path, sg_model** model_out) {
    if (require(ckpt_path, "ckpt_path") != SG_OK || require(model_out, "model_out") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    *model_out = nullptr;
    return guarded([&] {
        const auto ckpt = stegograph::load_checkpoint(ckpt_path);
        auto model = std::make_unique<sg_model>();
        model->config = stegograph::model_config_from_map(ckpt.config);
        model->store = stegograph::build_model_params<float>(model->config, 0);
        stegograph::assign_from_checkpoint(model->store, ckpt);
        *model_out = model.release();
    });
}

void sg_model_free(sg_model* model) { delete model; }

sg_status sg_model_predict(sg_model* model, const char* image_path, double probabilities_out[2]) {
    if (require(model, "model") != SG_OK || require(image_path, "image_path") != SG_OK ||
        require(probabilities_out, "probabilities_out") != SG_OK)
        return SG_ERR_INVALID_ARGUMENT;
    return guarded([&] {
        const stegograph::GrayImage image = stegograph::load_pgm(image_path);
        const auto probs = stegograph::model_predict(model->store, model->config, {image});
        probabilities_out[0] = static_cast<double>(probs.at(0, 0));
        probabilities_out[1] = static_cast<double>(probs.at(0, 1));
    });
}

} // extern "C"
