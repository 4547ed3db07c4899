#pragma once

#include <cmath>

#include "../core/error.hpp"
#include "network.hpp"

namespace vmms::nn {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update from the gradients currently stored in `net`.
inline void adam_step(Network& net, double lr, const AdamParams& p = {})
{
    auto params = net.parameters();
    for (const auto* prm : params)
        for (double g : prm->grad.data)
            if (!std::isfinite(g)) throw divergence_error("divergence detected");

    ++net.adam_steps;
    const double t = static_cast<double>(net.adam_steps);
    const double c1 = 1.0 - std::pow(p.beta1, t);
    const double c2 = 1.0 - std::pow(p.beta2, t);
    for (auto* prm : params) {
        auto& w = prm->value.data;
        auto& g = prm->grad.data;
        auto& m = prm->m.data;
        auto& v = prm->v.data;
        for (std::size_t i = 0; i < w.size(); ++i) {
            m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g[i];
            v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + p.eps);
        }
    }
}

/// target <- tau * net + (1 - tau) * target, parameter-wise.
inline void soft_update(Network& target, const Network& net, double tau)
{
    if (!(target.architecture() == net.architecture()))
        throw logic_error("architecture mismatch in soft update: " + describe(target.architecture()) + " vs " +
                          describe(net.architecture()));
    auto dst = target.parameters();
    auto src = net.parameters();
    for (std::size_t k = 0; k < dst.size(); ++k) {
        auto& d = dst[k]->value.data;
        const auto& s = src[k]->value.data;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] = tau * s[i] + (1.0 - tau) * d[i];
    }
}

/// Copies parameter values (not optimizer state).
inline void copy_parameters(Network& target, const Network& net) { soft_update(target, net, 1.0); }

} // namespace vmms::nn
