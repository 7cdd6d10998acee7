#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "image.hpp"

namespace stegograph {

struct ManifestEntry {
    std::string path; // absolute, resolved against the manifest directory
    std::string role; // cover | stego
    std::string split; // train | val | test
    std::uint64_t seed = 0;
    double payload = 0.0;
    std::string algorithm;
    double lambda = 0.0;
    bool has_lambda = false;
};

std::vector<ManifestEntry> load_manifest(const std::string& manifest_path);

struct DatasetItem {
    GrayImage image;
    int label = 0; // cover 0, stego 1
    std::string path;
    std::string split;
};

// Preloaded dataset with a per-item access counter so tests can audit split
// discipline (no test image touched during training).
class Dataset {
public:
    explicit Dataset(const std::string& manifest_path);

    std::size_t size() const { return items_.size(); }
    std::int64_t image_height() const { return image_h_; }
    std::int64_t image_width() const { return image_w_; }

    const std::vector<std::size_t>& split_indices(const std::string& split) const;

    const DatasetItem& item(std::size_t index) const; // counts the access
    int label(std::size_t index) const { return items_.at(index).label; }

    std::size_t access_count(std::size_t index) const { return access_log_.at(index); }
    std::size_t split_access_total(const std::string& split) const;
    void reset_access_log() { access_log_.assign(items_.size(), 0); }

private:
    std::vector<DatasetItem> items_;
    std::map<std::string, std::vector<std::size_t>> splits_;
    mutable std::vector<std::size_t> access_log_;
    std::int64_t image_h_ = 0, image_w_ = 0;
};

} // namespace stegograph
