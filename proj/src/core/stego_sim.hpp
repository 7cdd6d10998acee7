#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "image.hpp"

namespace stegograph {

inline constexpr double kWetCost = 1e10;
inline constexpr double kMaxPayloadBpp = 1.584962500721156; // log2(3)

// Per-pixel embedding costs, same layout as the image.
struct CostMap {
    std::int64_t height = 0, width = 0;
    std::vector<double> rho;
};

CostMap uniform_cost(const GrayImage& cover);

// rho = (1 / max(|cover * H1| * L1, 1e-10)) * L2 with H1 the 3x3 high-pass
// kernel, L1/L2 3x3 and 15x15 mean filters, mirror padding throughout.
CostMap hill_cost(const GrayImage& cover);

// p(+1) = p(-1) = e^{-lambda*rho} / (1 + 2 e^{-lambda*rho})
double change_probability(double rho, double lambda);

// ternary entropy in bits of the (p, 1-2p, p) change distribution
double ternary_entropy_bits(double p);

double total_entropy_bits(const CostMap& rho, double lambda);

// Smallest lambda whose total entropy matches payload_bits within 0.1%
// relative. Binary search on log(lambda), bracket grown from [1e-8, 1e3].
double lambda_search(const CostMap& rho, double payload_bits);

struct EmbeddingResult {
    GrayImage stego;
    std::vector<std::int8_t> changes; // in {-1, 0, +1}
    double lambda = 0.0;
    double expected_changes = 0.0; // 2 * sum p_i
};

// Payload-limited sender simulation. The draw for pixel k depends only on
// (seed, k); at value 0 the -1 direction is redirected to +1 and at 255 the
// +1 direction to -1.
EmbeddingResult simulate_embedding(const GrayImage& cover, const CostMap& rho, double payload_bpp,
                                   std::uint64_t seed);

struct DatasetConfig {
    double payload_bpp = 0.4;
    std::string algorithm = "uniform"; // uniform | hill
    std::uint64_t master_seed = 1;
    // Split weights; exact counts when they sum to the corpus size, else
    // proportions. Defaults mirror the 4000/1000/5000 protocol.
    double split_train = 40, split_val = 10, split_test = 50;
};

// One stego per cover, deterministic splits, manifest written to
// out_dir/manifest.csv (path,role,split,seed,payload,algorithm,lambda).
// Returns the manifest path.
std::string make_dataset(const std::string& covers_dir, const DatasetConfig& config, const std::string& out_dir);

} // namespace stegograph
