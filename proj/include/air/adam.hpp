#pragma once

#include <cstdint>
#include <vector>

#include "air/autodiff.hpp"

namespace air::ad {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moments, one buffer per parameter in store order.
struct AdamState {
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::uint64_t step = 0;
};

AdamState make_adam_state(const ParameterStore& store);

// One bias-corrected Adam update using the gradients stored in `store`.
// A non-finite gradient raises NumericFault before anything is modified.
void adam_step(ParameterStore& store, AdamState& state, double lr, const AdamConfig& cfg = {});

}  // namespace air::ad
