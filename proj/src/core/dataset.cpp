#include "dataset.hpp"

#include <filesystem>
#include <fstream>

#include "text_util.hpp"

namespace fs = std::filesystem;

namespace stegograph {

std::vector<ManifestEntry> load_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open manifest " + manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    std::string line;
    if (!std::getline(in, line) || trim(line) != "path,role,split,seed,payload,algorithm,lambda")
        throw IoError(manifest_path + ": missing or unexpected manifest header");

    std::vector<ManifestEntry> entries;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cols = split(trim(line), ',');
        if (cols.size() != 7)
            throw IoError(manifest_path + ":" + std::to_string(lineno) + ": expected 7 columns, got " +
                          std::to_string(cols.size()));
        ManifestEntry e;
        e.path = (base / cols[0]).string();
        e.role = cols[1];
        e.split = cols[2];
        e.seed = parse_uint(cols[3], "manifest seed");
        e.payload = parse_double(cols[4], "manifest payload");
        e.algorithm = cols[5];
        if (!cols[6].empty()) {
            e.lambda = parse_double(cols[6], "manifest lambda");
            e.has_lambda = true;
        }
        if (e.role != "cover" && e.role != "stego")
            throw IoError(manifest_path + ":" + std::to_string(lineno) + ": bad role '" + e.role + "'");
        if (e.split != "train" && e.split != "val" && e.split != "test")
            throw IoError(manifest_path + ":" + std::to_string(lineno) + ": bad split '" + e.split + "'");
        entries.push_back(std::move(e));
    }
    if (entries.empty()) throw IoError(manifest_path + ": no entries");
    return entries;
}

Dataset::Dataset(const std::string& manifest_path) {
    const auto entries = load_manifest(manifest_path);
    items_.reserve(entries.size());
    for (const auto& e : entries) {
        DatasetItem item;
        item.image = load_pgm(e.path);
        item.label = e.role == "stego" ? 1 : 0;
        item.path = e.path;
        item.split = e.split;
        if (items_.empty()) {
            image_h_ = item.image.height;
            image_w_ = item.image.width;
        } else if (item.image.height != image_h_ || item.image.width != image_w_) {
            throw InvalidArgument(e.path + ": image is " + std::to_string(item.image.height) + "x" +
                                  std::to_string(item.image.width) + " but the dataset is " +
                                  std::to_string(image_h_) + "x" + std::to_string(image_w_));
        }
        splits_[item.split].push_back(items_.size());
        items_.push_back(std::move(item));
    }
    splits_.try_emplace("train");
    splits_.try_emplace("val");
    splits_.try_emplace("test");
    access_log_.assign(items_.size(), 0);
}

const std::vector<std::size_t>& Dataset::split_indices(const std::string& split) const {
    auto it = splits_.find(split);
    if (it == splits_.end()) throw InvalidArgument("unknown split '" + split + "'");
    return it->second;
}

const DatasetItem& Dataset::item(std::size_t index) const {
    ++access_log_.at(index);
    return items_.at(index);
}

std::size_t Dataset::split_access_total(const std::string& split) const {
    std::size_t total = 0;
    for (std::size_t idx : split_indices(split)) total += access_log_.at(idx);
    return total;
}

} // namespace stegograph
