#include "image.hpp"

#include <cctype>
#include <fstream>

namespace stegograph {

namespace {

// next whitespace-delimited token, skipping '#' comments to end of line
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

std::int64_t parse_dim(const std::string& tok, const std::string& path, const char* what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(tok, &used);
        if (used != tok.size() || v < 1) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw IoError(path + ": bad PGM " + what + " '" + tok + "'");
    }
}

} // namespace

GrayImage load_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);

    if (next_token(in) != "P5") throw IoError(path + ": not a binary PGM (P5) file");
    const std::int64_t w = parse_dim(next_token(in), path, "width");
    const std::int64_t h = parse_dim(next_token(in), path, "height");
    const std::int64_t maxval = parse_dim(next_token(in), path, "maxval");
    if (maxval > 255) throw IoError(path + ": 16-bit PGM not supported (maxval " + std::to_string(maxval) + ")");

    GrayImage img(h, w);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError(path + ": truncated pixel data");
    return img;
}

void save_pgm(const GrayImage& image, const std::string& path) {
    if (image.height < 1 || image.width < 1 ||
        image.pixels.size() != static_cast<std::size_t>(image.height * image.width))
        throw InvalidArgument("save_pgm: malformed image");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw IoError("write failed: " + path);
}

} // namespace stegograph
