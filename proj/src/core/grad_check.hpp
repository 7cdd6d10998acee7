#pragma once

#include <functional>
#include <string>
#include <vector>

#include "autodiff.hpp"

namespace stegograph {

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::int64_t worst_index = -1;
    double analytic = 0.0;
    double numeric = 0.0;
};

// Central-difference check of every parameter coordinate against the tape
// gradients. Runs in double; rel = |a-n| / max(|a|, |n|). Coordinates where
// both gradients sit below 1e-6 agree at the noise floor of the difference
// quotient and score zero — without this, an exactly-zero analytic gradient
// (e.g. a conv bias cancelled by normalization) is compared against pure
// rounding noise.
inline GradCheckReport check_gradients(ParamStore<double>& store,
                                       const std::function<Var<double>()>& forward_loss, double h = 1e-5) {
    store.zero_grads();
    auto loss = forward_loss();
    backward(loss);

    std::vector<Tensor<double>> analytic;
    for (auto& p : store.parameters()) analytic.push_back(p.grad());

    GradCheckReport report;
    auto& params = store.parameters();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor<double>& theta = params[pi].value();
        const std::int64_t n = theta.numel();
        for (std::int64_t i = 0; i < n; ++i) {
            const double saved = theta[i];
            double up, down;
            {
                NoGradGuard guard;
                theta[i] = saved + h;
                up = forward_loss()->value[0];
                theta[i] = saved - h;
                down = forward_loss()->value[0];
            }
            theta[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double a = analytic[pi][i];
            const double denom = std::max(std::abs(a), std::abs(numeric));
            const double rel = denom < 1e-6 ? 0.0 : std::abs(a - numeric) / denom;
            if (rel > report.max_rel_error) {
                report.max_rel_error = rel;
                report.worst_param = params[pi].name;
                report.worst_index = i;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    store.zero_grads();
    return report;
}

} // namespace stegograph
