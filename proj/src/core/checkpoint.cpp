#include "checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "text_util.hpp"

namespace stegograph {

namespace {

void write_tensor_line(std::ostream& out, const char* kind, const Parameter<float>& p, std::int64_t offset) {
    out << "tensor " << kind << " " << p.name << " " << p.node->value.rank();
    for (std::size_t d = 0; d < p.node->value.rank(); ++d) out << " " << p.node->value.dim(d);
    out << " " << offset << "\n";
}

} // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& store,
                     const std::map<std::string, std::string>& config) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path);
    out << kCheckpointMagic << "\n";
    for (const auto& [key, value] : config) {
        if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos)
            throw InvalidArgument("checkpoint config entries must be single-line, space-free keys");
        out << "config " << key << " " << value << "\n";
    }
    std::int64_t offset = 0;
    for (const auto& p : store.parameters()) {
        write_tensor_line(out, "param", p, offset);
        offset += p.node->value.numel() * static_cast<std::int64_t>(sizeof(float));
    }
    for (const auto& b : store.buffers()) {
        write_tensor_line(out, "buffer", b, offset);
        offset += b.node->value.numel() * static_cast<std::int64_t>(sizeof(float));
    }
    out << "blob " << offset << "\n";
    for (const auto& p : store.parameters())
        out.write(reinterpret_cast<const char*>(p.node->value.data()),
                  p.node->value.numel() * static_cast<std::streamsize>(sizeof(float)));
    for (const auto& b : store.buffers())
        out.write(reinterpret_cast<const char*>(b.node->value.data()),
                  b.node->value.numel() * static_cast<std::streamsize>(sizeof(float)));
    if (!out) throw IoError("write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path);
    std::string line;
    if (!std::getline(in, line) || trim(line) != kCheckpointMagic)
        throw IoError(path + ": not a " + std::string(kCheckpointMagic) + " file");

    LoadedCheckpoint ckpt;
    struct Entry {
        bool is_param;
        std::string name;
        Shape shape;
        std::int64_t offset;
    };
    std::vector<Entry> entries;
    std::int64_t blob_bytes = -1;

    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "config") {
            std::string key;
            ls >> key;
            std::string value;
            std::getline(ls, value);
            ckpt.config[key] = trim(value);
        } else if (tag == "tensor") {
            Entry e;
            std::string kind;
            std::size_t rank = 0;
            ls >> kind >> e.name >> rank;
            if (!ls || (kind != "param" && kind != "buffer"))
                throw IoError(path + ": malformed tensor line '" + line + "'");
            e.is_param = kind == "param";
            e.shape.resize(rank);
            for (std::size_t d = 0; d < rank; ++d) ls >> e.shape[d];
            ls >> e.offset;
            if (!ls) throw IoError(path + ": malformed tensor line '" + line + "'");
            entries.push_back(std::move(e));
        } else if (tag == "blob") {
            ls >> blob_bytes;
            if (!ls || blob_bytes < 0) throw IoError(path + ": malformed blob line");
            break;
        } else {
            throw IoError(path + ": unexpected manifest line '" + line + "'");
        }
    }
    if (blob_bytes < 0) throw IoError(path + ": missing blob section");

    std::vector<float> blob(static_cast<std::size_t>(blob_bytes) / sizeof(float));
    in.read(reinterpret_cast<char*>(blob.data()), blob_bytes);
    if (in.gcount() != blob_bytes) throw IoError(path + ": truncated blob");

    for (const auto& e : entries) {
        const std::int64_t numel = shape_numel(e.shape);
        const std::int64_t first = e.offset / static_cast<std::int64_t>(sizeof(float));
        if (e.offset % sizeof(float) != 0 || first + numel > static_cast<std::int64_t>(blob.size()))
            throw IoError(path + ": tensor '" + e.name + "' exceeds blob bounds");
        std::vector<float> data(blob.begin() + first, blob.begin() + first + numel);
        Tensor<float> t(e.shape, std::move(data));
        if (e.is_param)
            ckpt.store.add_parameter(e.name, std::move(t));
        else
            ckpt.store.add_buffer(e.name, std::move(t));
    }
    return ckpt;
}

void assign_from_checkpoint(ParamStore<float>& store, const LoadedCheckpoint& ckpt) {
    auto copy_into = [](Parameter<float>& dst, const Parameter<float>& src) {
        if (!dst.node->value.same_shape(src.node->value))
            throw InvalidArgument("checkpoint tensor '" + src.name + "' has shape " +
                                  shape_to_string(src.node->value.shape()) + ", model expects " +
                                  shape_to_string(dst.node->value.shape()));
        dst.node->value = src.node->value;
    };
    for (const auto& p : ckpt.store.parameters()) copy_into(store.get(p.name), p);
    for (const auto& b : ckpt.store.buffers()) copy_into(store.get(b.name), b);
}

} // namespace stegograph
