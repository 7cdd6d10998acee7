#pragma once

#include <cmath>

#include "core/autodiff.hpp"
#include "core/rng.hpp"

namespace stegograph::testutil {

// deterministic pseudo-random fill, no std distributions
template <typename T>
Tensor<T> rand_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    Tensor<T> t(std::move(shape));
    for (std::int64_t i = 0; i < t.numel(); ++i)
        t[i] = static_cast<T>(lo + (hi - lo) * counter_uniform(seed, static_cast<std::uint64_t>(i)));
    return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double worst = 0.0;
    for (std::int64_t i = 0; i < a.numel(); ++i)
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return worst;
}

// loss = sum(value * fixed_weights): sensitive to every output coordinate
template <typename T>
Var<T> weighted_sum(const Var<T>& v, std::uint64_t seed) {
    auto weights = make_const(rand_tensor<T>(v->value.shape(), seed, 0.5, 1.5));
    return sum_all(mul(v, weights));
}

// Finite differences are invalid where |.| kinks, so gradient checks through
// the abs-activated first group push its conv biases to alternating +/-bias_mag
// (large against the weight-times-residual spread): the abs input then stays on
// one side of zero per channel while both branches are still exercised.
template <typename T>
void soften_abs_kink(ParamStore<T>& store, const std::string& conv_prefix, double weight_scale, double bias_mag) {
    auto& w = store.get(conv_prefix + ".w").node->value;
    for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<T>(w[i] * weight_scale);
    auto& b = store.get(conv_prefix + ".b").node->value;
    for (std::int64_t c = 0; c < b.numel(); ++c) b[c] = static_cast<T>(c % 2 == 0 ? bias_mag : -bias_mag);
}

// Settles batch-norm running statistics onto the data distribution so an
// eval-mode pass normalizes sensibly instead of with the (0,1) init.
template <typename F>
void warm_running_stats(F&& train_forward, int steps = 60) {
    NoGradGuard guard;
    for (int i = 0; i < steps; ++i) (void)train_forward();
}

} // namespace stegograph::testutil
