#pragma once

#include <map>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "model.hpp"

namespace stegograph {

// Flat key-value experiment description; defaults mirror the reference
// protocol (batch 32, 300 epochs, lr 1e-3, betas 0.5/0.999, complete
// topology, 256x256 patches in a 3x3 half-overlap grid).
struct ExperimentConfig {
    ModelConfig model;
    std::int64_t batch_size = 32;
    std::int64_t epochs = 300;
    double learning_rate = 1e-3;
    double beta1 = 0.5;
    double beta2 = 0.999;
    std::uint64_t master_seed = 1;
    std::string manifest;
    std::int64_t max_iterations = 0;  // 0 = run all epochs
    double stop_at_train_acc = 0.0;   // 0 = off; stop once an epoch reaches this training accuracy

    ExperimentConfig() {
        model.cnn.patch_h = 256;
        model.cnn.patch_w = 256;
    }

    void validate() const;
};

// File format: one `key = value` per line, '#' comments. Relative manifest
// paths resolve against the config file's directory.
ExperimentConfig load_experiment_config(const std::string& path);
ExperimentConfig experiment_config_from_map(const std::map<std::string, std::string>& map,
                                            const std::string& base_dir);
std::map<std::string, std::string> experiment_config_to_map(const ExperimentConfig& config);

struct EpochStats {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

struct RunReport {
    std::map<std::string, std::string> config_echo;
    std::int64_t train_images = 0;
    std::int64_t iterations_planned = 0; // floor(train_size/batch) * epochs
    std::int64_t iterations_run = 0;
    std::vector<EpochStats> epochs;
    std::int64_t best_epoch = 0;
    double best_val_acc = 0.0;
    double test_acc = 0.0;
    std::size_t test_reads_before_selection = 0; // audit: must stay 0
    std::string checkpoint_path;                 // relative to the run dir
    double wall_seconds = 0.0;                   // excluded from canonical text

    // Byte-stable rendition written to report.txt; wall clock goes to
    // timing.txt so equal-seed runs compare equal.
    std::string canonical_text() const;
};

// Trains, writes out_dir/{best.ckpt,report.txt,timing.txt}.
RunReport train(const ExperimentConfig& config, const std::string& out_dir);

// Same, with a caller-owned dataset (tests audit its access log).
RunReport train_with_dataset(const ExperimentConfig& config, Dataset& dataset, const std::string& out_dir);

// Accuracy of a checkpointed model over one split. Empty manifest_path falls
// back to the manifest recorded inside the checkpoint.
double evaluate_checkpoint(const std::string& ckpt_path, const std::string& manifest_path, const std::string& split);

struct CompareRow {
    std::string model;
    int group_count = 0;
    double accuracy = 0.0;
    std::string run_dir;
};

// Re-evaluates each run's best checkpoint on its test split.
std::vector<CompareRow> compare_runs(const std::vector<std::string>& run_dirs);
std::string compare_table_text(const std::vector<CompareRow>& rows);
std::string compare_table_csv(const std::vector<CompareRow>& rows);

} // namespace stegograph
