#include "air/adam.hpp"

#include <cmath>

#include "air/error.hpp"

namespace air::ad {

AdamState make_adam_state(const ParameterStore& store) {
    AdamState s;
    for (const auto& p : store) {
        s.m.emplace_back(p.value.shape(), 0.0);
        s.v.emplace_back(p.value.shape(), 0.0);
    }
    return s;
}

void adam_step(ParameterStore& store, AdamState& state, double lr, const AdamConfig& cfg) {
    if (state.m.size() != store.size()) throw ContractViolation("adam_step: state does not match store");
    for (const auto& p : store) {
        if (!p.grad.all_finite()) throw NumericFault("adam_step: non-finite gradient in " + p.name);
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    std::size_t i = 0;
    for (auto& p : store) {
        double* __restrict w = p.value.raw();
        const double* __restrict g = p.grad.raw();
        double* __restrict m = state.m[i].raw();
        double* __restrict v = state.v[i].raw();
        const std::size_t size = p.value.size();
        for (std::size_t j = 0; j < size; ++j) {
            m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            w[j] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
        ++i;
    }
}

}  // namespace air::ad
