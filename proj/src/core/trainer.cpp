#include "trainer.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "adam.hpp"
#include "checkpoint.hpp"

namespace fs = std::filesystem;

namespace stegograph {

void ExperimentConfig::validate() const {
    model.validate();
    if (batch_size < 2) throw InvalidArgument("config: batch_size must be >= 2 (train-mode normalization)");
    if (epochs < 1) throw InvalidArgument("config: epochs must be >= 1");
    if (learning_rate <= 0) throw InvalidArgument("config: learning_rate must be positive");
    if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1) throw InvalidArgument("config: betas must lie in [0,1)");
    if (max_iterations < 0) throw InvalidArgument("config: max_iterations must be >= 0");
    if (stop_at_train_acc < 0 || stop_at_train_acc > 1)
        throw InvalidArgument("config: stop_at_train_acc must lie in [0,1]");
}

ExperimentConfig experiment_config_from_map(const std::map<std::string, std::string>& map,
                                            const std::string& base_dir) {
    ExperimentConfig config;
    for (const auto& [key, value] : map) {
        if (key == "model")
            config.model.kind = model_kind_from_string(value);
        else if (key == "group_count")
            config.model.cnn.group_count = static_cast<int>(parse_int(value, key));
        else if (key == "patch_h")
            config.model.cnn.patch_h = parse_int(value, key);
        else if (key == "patch_w")
            config.model.cnn.patch_w = parse_int(value, key);
        else if (key == "grid_n")
            config.model.grid_n = parse_int(value, key);
        else if (key == "grid_m")
            config.model.grid_m = parse_int(value, key);
        else if (key == "alpha")
            config.model.alpha = parse_double(value, key);
        else if (key == "beta")
            config.model.beta = parse_double(value, key);
        else if (key == "topology")
            config.model.topology = topology_from_string(value);
        else if (key == "gat_d1")
            config.model.gat_d1 = parse_int(value, key);
        else if (key == "gat_d2")
            config.model.gat_d2 = parse_int(value, key);
        else if (key == "batch_size")
            config.batch_size = parse_int(value, key);
        else if (key == "epochs")
            config.epochs = parse_int(value, key);
        else if (key == "learning_rate")
            config.learning_rate = parse_double(value, key);
        else if (key == "beta1")
            config.beta1 = parse_double(value, key);
        else if (key == "beta2")
            config.beta2 = parse_double(value, key);
        else if (key == "seed")
            config.master_seed = parse_uint(value, key);
        else if (key == "manifest")
            config.manifest = value;
        else if (key == "max_iterations")
            config.max_iterations = parse_int(value, key);
        else if (key == "stop_at_train_acc")
            config.stop_at_train_acc = parse_double(value, key);
        else
            throw InvalidArgument("config: unknown key '" + key + "'");
    }
    if (!config.manifest.empty() && fs::path(config.manifest).is_relative() && !base_dir.empty())
        config.manifest = (fs::path(base_dir) / config.manifest).string();
    config.validate();
    return config;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    std::map<std::string, std::string> map;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw IoError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw IoError(path + ":" + std::to_string(lineno) + ": empty key or value");
        if (!map.emplace(key, value).second)
            throw IoError(path + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    return experiment_config_from_map(map, fs::path(path).parent_path().string());
}

std::map<std::string, std::string> experiment_config_to_map(const ExperimentConfig& config) {
    auto map = model_config_to_map(config.model);
    map["batch_size"] = std::to_string(config.batch_size);
    map["epochs"] = std::to_string(config.epochs);
    map["learning_rate"] = format_double(config.learning_rate);
    map["beta1"] = format_double(config.beta1);
    map["beta2"] = format_double(config.beta2);
    map["seed"] = std::to_string(config.master_seed);
    map["manifest"] = config.manifest;
    map["max_iterations"] = std::to_string(config.max_iterations);
    map["stop_at_train_acc"] = format_double(config.stop_at_train_acc);
    return map;
}

std::string RunReport::canonical_text() const {
    std::ostringstream out;
    out << "stegograph-run-report\n";
    for (const auto& [key, value] : config_echo) out << "config " << key << " " << value << "\n";
    out << "train_images " << train_images << "\n";
    out << "iterations_planned " << iterations_planned << "\n";
    out << "iterations_run " << iterations_run << "\n";
    for (const auto& e : epochs)
        out << "epoch " << e.epoch << " train_loss " << format_double(e.train_loss) << " train_acc "
            << format_double(e.train_acc) << " val_acc " << format_double(e.val_acc) << "\n";
    out << "best_epoch " << best_epoch << "\n";
    out << "best_val_acc " << format_double(best_val_acc) << "\n";
    out << "test_acc " << format_double(test_acc) << "\n";
    out << "test_reads_before_selection " << test_reads_before_selection << "\n";
    out << "checkpoint " << checkpoint_path << "\n";
    return out.str();
}

namespace {

// correct/total over a split, eval mode, batches in manifest order
std::pair<std::size_t, std::size_t> eval_split(ParamStore<float>& store, const ModelConfig& model,
                                               const Dataset& dataset, const std::string& split,
                                               std::int64_t batch_size) {
    const auto& indices = dataset.split_indices(split);
    std::size_t correct = 0;
    for (std::size_t at = 0; at < indices.size(); at += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(indices.size(), at + static_cast<std::size_t>(batch_size));
        std::vector<GrayImage> images;
        std::vector<int> labels;
        images.reserve(end - at);
        for (std::size_t i = at; i < end; ++i) {
            const DatasetItem& item = dataset.item(indices[i]);
            images.push_back(item.image);
            labels.push_back(item.label);
        }
        const Tensor<float> probs = model_predict(store, model, images);
        const std::vector<int> classes = predict_classes(probs);
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == labels[i]) ++correct;
    }
    return {correct, indices.size()};
}

double ratio_or_zero(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

RunReport train_with_dataset(const ExperimentConfig& config, Dataset& dataset, const std::string& out_dir) {
    config.validate();
    const auto t0 = std::chrono::steady_clock::now();
    fs::create_directories(out_dir);

    // fail fast if the plan does not fit the corpus images
    (void)config.model.plan_for(dataset.image_height(), dataset.image_width());

    ParamStore<float> store = build_model_params<float>(config.model, config.master_seed);
    Adam<float> optimizer(store, static_cast<float>(config.learning_rate), static_cast<float>(config.beta1),
                          static_cast<float>(config.beta2));

    const auto& train_indices = dataset.split_indices("train");
    const std::int64_t train_n = static_cast<std::int64_t>(train_indices.size());
    const std::int64_t iters_per_epoch = train_n / config.batch_size;
    if (iters_per_epoch < 1)
        throw InvalidArgument("train: " + std::to_string(train_n) + " training images cannot fill a batch of " +
                              std::to_string(config.batch_size));

    RunReport report;
    report.config_echo = experiment_config_to_map(config);
    report.train_images = train_n;
    report.iterations_planned = iters_per_epoch * config.epochs;
    report.checkpoint_path = "best.ckpt";

    const std::string ckpt_path = (fs::path(out_dir) / report.checkpoint_path).string();
    auto ckpt_config = model_config_to_map(config.model);
    ckpt_config["seed"] = std::to_string(config.master_seed);
    ckpt_config["manifest"] = fs::absolute(config.manifest).string();

    double best_val = -1.0;
    bool capped = false;
    for (std::int64_t epoch = 1; epoch <= config.epochs && !capped; ++epoch) {
        const auto order = shuffled_indices(static_cast<std::size_t>(train_n),
                                            derive_seed(config.master_seed, 1000 + static_cast<std::uint64_t>(epoch)));
        double loss_sum = 0.0;
        std::size_t seen = 0, correct = 0;
        std::int64_t iters_this_epoch = 0;
        for (std::int64_t it = 0; it < iters_per_epoch; ++it) {
            if (config.max_iterations > 0 && report.iterations_run >= config.max_iterations) {
                capped = true;
                break;
            }
            std::vector<GrayImage> images;
            std::vector<int> labels;
            images.reserve(static_cast<std::size_t>(config.batch_size));
            for (std::int64_t b = 0; b < config.batch_size; ++b) {
                const std::size_t idx = train_indices[order[static_cast<std::size_t>(it * config.batch_size + b)]];
                const DatasetItem& item = dataset.item(idx);
                images.push_back(item.image);
                labels.push_back(item.label);
            }
            auto trace = model_logits(store, config.model, images, Mode::Train);
            auto loss = softmax_cross_entropy(trace.logits, labels);
            backward(loss);
            optimizer.step();

            loss_sum += static_cast<double>(loss->value[0]);
            const auto classes = predict_classes(trace.logits->value);
            for (std::size_t i = 0; i < classes.size(); ++i)
                if (classes[i] == labels[i]) ++correct;
            seen += classes.size();
            ++report.iterations_run;
            ++iters_this_epoch;
        }
        if (iters_this_epoch == 0) break; // cap landed exactly on an epoch boundary

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / static_cast<double>(iters_this_epoch);
        stats.train_acc = ratio_or_zero(correct, seen);
        const auto [val_correct, val_total] = eval_split(store, config.model, dataset, "val", config.batch_size);
        stats.val_acc = ratio_or_zero(val_correct, val_total);
        report.epochs.push_back(stats);

        if (stats.val_acc > best_val) { // strict: ties keep the earliest epoch
            best_val = stats.val_acc;
            report.best_epoch = epoch;
            report.best_val_acc = stats.val_acc;
            save_checkpoint(ckpt_path, store, ckpt_config);
        }
        if (config.stop_at_train_acc > 0 && stats.train_acc >= config.stop_at_train_acc) break;
    }

    report.test_reads_before_selection = dataset.split_access_total("test");

    // test accuracy: once, on the best-validation parameters
    const LoadedCheckpoint best = load_checkpoint(ckpt_path);
    assign_from_checkpoint(store, best);
    const auto [test_correct, test_total] = eval_split(store, config.model, dataset, "test", config.batch_size);
    report.test_acc = ratio_or_zero(test_correct, test_total);

    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::ofstream rep((fs::path(out_dir) / "report.txt").string(), std::ios::trunc);
    rep << report.canonical_text();
    if (!rep) throw IoError("cannot write report in " + out_dir);
    std::ofstream timing((fs::path(out_dir) / "timing.txt").string(), std::ios::trunc);
    timing << "wall_seconds " << format_double(report.wall_seconds) << "\n";
    return report;
}

RunReport train(const ExperimentConfig& config, const std::string& out_dir) {
    config.validate();
    if (config.manifest.empty()) throw InvalidArgument("config: manifest path is required for training");
    Dataset dataset(config.manifest);
    return train_with_dataset(config, dataset, out_dir);
}

double evaluate_checkpoint(const std::string& ckpt_path, const std::string& manifest_path, const std::string& split) {
    const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
    const ModelConfig model = model_config_from_map(ckpt.config);
    ParamStore<float> store = build_model_params<float>(model, 0);
    assign_from_checkpoint(store, ckpt);

    std::string manifest = manifest_path;
    if (manifest.empty()) {
        auto it = ckpt.config.find("manifest");
        if (it == ckpt.config.end())
            throw InvalidArgument(ckpt_path + ": checkpoint records no manifest; pass one explicitly");
        manifest = it->second;
    }
    Dataset dataset(manifest);
    const auto [correct, total] = eval_split(store, model, dataset, split, 32);
    if (total == 0) throw InvalidArgument("evaluate: split '" + split + "' is empty");
    return static_cast<double>(correct) / static_cast<double>(total);
}

std::vector<CompareRow> compare_runs(const std::vector<std::string>& run_dirs) {
    if (run_dirs.empty()) throw InvalidArgument("compare: no run directories given");
    std::vector<CompareRow> rows;
    for (const auto& dir : run_dirs) {
        const std::string ckpt_path = (fs::path(dir) / "best.ckpt").string();
        const LoadedCheckpoint ckpt = load_checkpoint(ckpt_path);
        CompareRow row;
        row.run_dir = dir;
        const ModelConfig model = model_config_from_map(ckpt.config);
        row.model = model_kind_name(model.kind);
        row.group_count = model.cnn.group_count;
        row.accuracy = evaluate_checkpoint(ckpt_path, "", "test");
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string compare_table_csv(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "model,group_count,test_accuracy\n";
    for (const auto& r : rows) out << r.model << "," << r.group_count << "," << format_double(r.accuracy) << "\n";
    return out.str();
}

std::string compare_table_text(const std::vector<CompareRow>& rows) {
    std::ostringstream out;
    out << "model      k  test_accuracy  run\n";
    for (const auto& r : rows) {
        char acc[32];
        std::snprintf(acc, sizeof(acc), "%.4f", r.accuracy);
        out << r.model;
        for (std::size_t pad = r.model.size(); pad < 11; ++pad) out << ' ';
        out << r.group_count << "  " << acc << "         " << r.run_dir << "\n";
    }
    return out.str();
}

} // namespace stegograph
