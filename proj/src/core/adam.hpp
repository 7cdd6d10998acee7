#pragma once

#include <cmath>
#include <vector>

#include "autodiff.hpp"

namespace stegograph {

// Adam with bias correction. One step consumes the accumulated gradients and
// zeroes them; first/second moment buffers persist per parameter.
template <typename T>
class Adam {
public:
    Adam(ParamStore<T>& store, T lr = T(1e-3), T beta1 = T(0.5), T beta2 = T(0.999), T eps = T(1e-8))
        : store_(store), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        if (lr <= T(0)) throw InvalidArgument("adam: learning rate must be positive");
        if (beta1 < T(0) || beta1 >= T(1) || beta2 < T(0) || beta2 >= T(1))
            throw InvalidArgument("adam: betas must lie in [0,1)");
        for (auto& p : store.parameters()) {
            m_.emplace_back(p.value().shape());
            v_.emplace_back(p.value().shape());
        }
    }

    void step() {
        ++t_;
        const T bc1 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta1_), t_));
        const T bc2 = T(1) - static_cast<T>(std::pow(static_cast<double>(beta2_), t_));
        auto& params = store_.parameters();
        for (std::size_t pi = 0; pi < params.size(); ++pi) {
            Tensor<T>& theta = params[pi].value();
            const Tensor<T>& g = params[pi].grad();
            Tensor<T>& m = m_[pi];
            Tensor<T>& v = v_[pi];
            const std::int64_t n = theta.numel();
            for (std::int64_t i = 0; i < n; ++i) {
                m[i] = beta1_ * m[i] + (T(1) - beta1_) * g[i];
                v[i] = beta2_ * v[i] + (T(1) - beta2_) * g[i] * g[i];
                const T mhat = m[i] / bc1;
                const T vhat = v[i] / bc2;
                theta[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
            }
        }
        store_.zero_grads();
    }

    long steps_taken() const { return t_; }

private:
    ParamStore<T>& store_;
    T lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

} // namespace stegograph
