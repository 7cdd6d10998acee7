#include "stego_sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "rng.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace stegograph {

namespace {

std::int64_t reflect(std::int64_t i, std::int64_t n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

// centered cross-correlation with mirror padding; odd square kernels only
std::vector<double> conv_mirror(const std::vector<double>& src, std::int64_t h, std::int64_t w,
                                const std::vector<double>& kernel, std::int64_t ksize) {
    const std::int64_t c = ksize / 2;
    std::vector<double> out(static_cast<std::size_t>(h * w), 0.0);
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            double acc = 0;
            for (std::int64_t dy = -c; dy <= c; ++dy) {
                const std::int64_t sy = reflect(y + dy, h);
                for (std::int64_t dx = -c; dx <= c; ++dx) {
                    const std::int64_t sx = reflect(x + dx, w);
                    acc += src[static_cast<std::size_t>(sy * w + sx)] *
                           kernel[static_cast<std::size_t>((dy + c) * ksize + dx + c)];
                }
            }
            out[static_cast<std::size_t>(y * w + x)] = acc;
        }
    return out;
}

std::vector<double> mean_kernel(std::int64_t ksize) {
    return std::vector<double>(static_cast<std::size_t>(ksize * ksize), 1.0 / static_cast<double>(ksize * ksize));
}

} // namespace

CostMap uniform_cost(const GrayImage& cover) {
    CostMap map;
    map.height = cover.height;
    map.width = cover.width;
    map.rho.assign(cover.pixels.size(), 1.0);
    return map;
}

CostMap hill_cost(const GrayImage& cover) {
    if (cover.height < 15 || cover.width < 15)
        throw InvalidArgument("hill_cost: image must be at least 15x15, got " + std::to_string(cover.height) + "x" +
                              std::to_string(cover.width));
    const std::int64_t h = cover.height, w = cover.width;
    std::vector<double> pixels(cover.pixels.begin(), cover.pixels.end());

    const std::vector<double> h1 = {-1, 2, -1, 2, -4, 2, -1, 2, -1};
    std::vector<double> residual = conv_mirror(pixels, h, w, h1, 3);
    for (double& v : residual) v = std::abs(v);

    std::vector<double> smoothed = conv_mirror(residual, h, w, mean_kernel(3), 3);
    for (double& v : smoothed) v = 1.0 / std::max(v, 1e-10);

    CostMap map;
    map.height = h;
    map.width = w;
    map.rho = conv_mirror(smoothed, h, w, mean_kernel(15), 15);
    return map;
}

double change_probability(double rho, double lambda) {
    const double e = std::exp(-lambda * rho);
    return e / (1.0 + 2.0 * e);
}

double ternary_entropy_bits(double p) {
    double h = 0.0;
    if (p > 0.0) h -= 2.0 * p * std::log2(p);
    const double q = 1.0 - 2.0 * p;
    if (q > 0.0) h -= q * std::log2(q);
    return h;
}

double total_entropy_bits(const CostMap& rho, double lambda) {
    double total = 0.0;
    for (double r : rho.rho) total += ternary_entropy_bits(change_probability(r, lambda));
    return total;
}

double lambda_search(const CostMap& rho, double payload_bits) {
    const double n = static_cast<double>(rho.rho.size());
    if (!(payload_bits > 0.0) || payload_bits >= kMaxPayloadBpp * n)
        throw InvalidArgument("lambda_search: payload " + format_double(payload_bits) +
                              " bits outside (0, log2(3) * " + format_double(n) + ")");

    double lo = 1e-8, hi = 1e3; // entropy decreasing in lambda: want H(lo) >= payload >= H(hi)
    while (total_entropy_bits(rho, lo) < payload_bits) {
        lo /= 10.0;
        if (lo < 1e-30)
            throw NumericError("lambda_search: payload unreachable even at vanishing lambda (all-wet cost map?)");
    }
    while (total_entropy_bits(rho, hi) > payload_bits) {
        hi *= 10.0;
        if (hi > 1e30) throw NumericError("lambda_search: entropy cannot be pushed down to the payload");
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = std::sqrt(lo * hi);
        const double entropy = total_entropy_bits(rho, mid);
        if (std::abs(entropy - payload_bits) / payload_bits < 1e-3) return mid;
        (entropy > payload_bits ? lo : hi) = mid;
    }
    throw NumericError("lambda_search: did not converge to 0.1% relative tolerance");
}

EmbeddingResult simulate_embedding(const GrayImage& cover, const CostMap& rho, double payload_bpp,
                                   std::uint64_t seed) {
    if (rho.height != cover.height || rho.width != cover.width ||
        rho.rho.size() != cover.pixels.size())
        throw InvalidArgument("simulate_embedding: cost map does not match the cover");
    if (!(payload_bpp > 0.0) || payload_bpp >= kMaxPayloadBpp)
        throw InvalidArgument("simulate_embedding: payload must lie in (0, log2 3) bpp");
    const double payload_bits = payload_bpp * static_cast<double>(cover.pixels.size());

    EmbeddingResult result;
    result.lambda = lambda_search(rho, payload_bits);
    result.stego = cover;
    result.changes.assign(cover.pixels.size(), 0);

    for (std::size_t i = 0; i < cover.pixels.size(); ++i) {
        const double p = change_probability(rho.rho[i], result.lambda);
        result.expected_changes += 2.0 * p;
        const double u = counter_uniform(seed, static_cast<std::uint64_t>(i));
        int change = 0;
        if (u < p)
            change = -1;
        else if (u < 2.0 * p)
            change = +1;
        if (change == 0) continue;
        const int value = cover.pixels[i];
        if (value == 0 && change == -1) change = +1;   // redirect off the boundary
        if (value == 255 && change == +1) change = -1;
        result.changes[i] = static_cast<std::int8_t>(change);
        result.stego.pixels[i] = static_cast<std::uint8_t>(value + change);
    }
    return result;
}

namespace {

// exact counts when the weights already sum to n, else floor-proportional
std::pair<std::size_t, std::size_t> split_counts(std::size_t n, double wt, double wv, double wtest) {
    if (wt < 0 || wv < 0 || wtest < 0 || wt + wv + wtest <= 0)
        throw InvalidArgument("make_dataset: split weights must be nonnegative and not all zero");
    const double total = wt + wv + wtest;
    const bool integral = wt == std::floor(wt) && wv == std::floor(wv) && wtest == std::floor(wtest);
    if (integral && static_cast<std::size_t>(total) == n)
        return {static_cast<std::size_t>(wt), static_cast<std::size_t>(wv)};
    const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * wt / total));
    const auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * wv / total));
    return {n_train, n_val};
}

} // namespace

std::string make_dataset(const std::string& covers_dir, const DatasetConfig& config, const std::string& out_dir) {
    if (config.algorithm != "uniform" && config.algorithm != "hill")
        throw InvalidArgument("make_dataset: unknown algorithm '" + config.algorithm + "'");
    if (!(config.payload_bpp > 0.0) || config.payload_bpp >= kMaxPayloadBpp)
        throw InvalidArgument("make_dataset: payload must lie in (0, log2 3) bpp");

    if (!fs::is_directory(covers_dir)) throw IoError("make_dataset: cover directory " + covers_dir + " does not exist");
    std::vector<fs::path> covers;
    for (const auto& entry : fs::directory_iterator(covers_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") covers.push_back(entry.path());
    if (covers.empty()) throw IoError("make_dataset: no .pgm covers in " + covers_dir);
    std::sort(covers.begin(), covers.end());

    const auto [n_train, n_val] = split_counts(covers.size(), config.split_train, config.split_val, config.split_test);
    if (n_train + n_val > covers.size())
        throw InvalidArgument("make_dataset: split counts exceed corpus size");
    std::vector<std::string> split_of(covers.size());
    const auto order = shuffled_indices(covers.size(), derive_seed(config.master_seed, /*stream=*/7));
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        split_of[order[rank]] = rank < n_train ? "train" : (rank < n_train + n_val ? "val" : "test");

    fs::create_directories(fs::path(out_dir) / "cover");
    fs::create_directories(fs::path(out_dir) / "stego");

    const std::string manifest_path = (fs::path(out_dir) / "manifest.csv").string();
    std::ofstream manifest(manifest_path, std::ios::trunc);
    if (!manifest) throw IoError("cannot write " + manifest_path);
    manifest << "path,role,split,seed,payload,algorithm,lambda\n";

    for (std::size_t i = 0; i < covers.size(); ++i) {
        const GrayImage cover = load_pgm(covers[i].string());
        const std::string name = covers[i].stem().string() + ".pgm";
        const std::uint64_t seed = derive_seed(config.master_seed, static_cast<std::uint64_t>(i));

        const CostMap rho = config.algorithm == "hill" ? hill_cost(cover) : uniform_cost(cover);
        const EmbeddingResult embedded = simulate_embedding(cover, rho, config.payload_bpp, seed);

        // re-encode the cover so both files share the normalized header
        save_pgm(cover, (fs::path(out_dir) / "cover" / name).string());
        save_pgm(embedded.stego, (fs::path(out_dir) / "stego" / name).string());

        manifest << "cover/" << name << ",cover," << split_of[i] << "," << seed << ","
                 << format_double(config.payload_bpp) << "," << config.algorithm << ",\n";
        manifest << "stego/" << name << ",stego," << split_of[i] << "," << seed << ","
                 << format_double(config.payload_bpp) << "," << config.algorithm << ","
                 << format_double(embedded.lambda) << "\n";
    }
    if (!manifest) throw IoError("write failed: " + manifest_path);
    return manifest_path;
}

} // namespace stegograph
