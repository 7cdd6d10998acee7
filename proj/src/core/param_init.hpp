#pragma once

#include <cmath>
#include <random>

#include "autodiff.hpp"
#include "rng.hpp"

namespace stegograph {

// U(-bound, bound) filled from explicit 64-bit draws; std distributions are
// implementation-defined, mt19937_64 output is not.
template <typename T>
Tensor<T> uniform_tensor(Shape shape, double bound, std::mt19937_64& gen) {
    Tensor<T> t(std::move(shape));
    const std::int64_t n = t.numel();
    for (std::int64_t i = 0; i < n; ++i)
        t[i] = static_cast<T>((2.0 * u64_to_unit_double(gen()) - 1.0) * bound);
    return t;
}

template <typename T>
double fan_in_bound(std::int64_t fan_in) {
    return 1.0 / std::sqrt(static_cast<double>(fan_in));
}

// conv weight [F,C,kh,kw] + zero bias [F]
template <typename T>
void add_conv_params(ParamStore<T>& store, const std::string& prefix, std::int64_t out_ch, std::int64_t in_ch,
                     std::int64_t kh, std::int64_t kw, std::mt19937_64& gen) {
    const double bound = fan_in_bound<T>(in_ch * kh * kw);
    store.add_parameter(prefix + ".w", uniform_tensor<T>(Shape{out_ch, in_ch, kh, kw}, bound, gen));
    store.add_parameter(prefix + ".b", Tensor<T>(Shape{out_ch}));
}

// linear weight [d_in,d_out] + zero bias [d_out]
template <typename T>
void add_linear_params(ParamStore<T>& store, const std::string& prefix, std::int64_t d_in, std::int64_t d_out,
                       std::mt19937_64& gen) {
    const double bound = fan_in_bound<T>(d_in);
    store.add_parameter(prefix + ".w", uniform_tensor<T>(Shape{d_in, d_out}, bound, gen));
    store.add_parameter(prefix + ".b", Tensor<T>(Shape{d_out}));
}

// gamma=1, beta=0, running mean=0, running var=1
template <typename T>
void add_bn_params(ParamStore<T>& store, const std::string& prefix, std::int64_t channels) {
    store.add_parameter(prefix + ".gamma", Tensor<T>(Shape{channels}, T(1)));
    store.add_parameter(prefix + ".beta", Tensor<T>(Shape{channels}));
    store.add_buffer(prefix + ".rmean", Tensor<T>(Shape{channels}));
    store.add_buffer(prefix + ".rvar", Tensor<T>(Shape{channels}, T(1)));
}

} // namespace stegograph
