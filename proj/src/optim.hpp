#pragma once

#include <cstdint>
#include <vector>

#include "tensor.hpp"

namespace scfm {

struct AdamwConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double weight_decay = 1e-4;
    double eps = 1e-8;
};

struct OptimState {
    AdamwConfig cfg;
    int64_t step = 0;
    std::vector<Tensor> m;  // first moments, shape-matched to params
    std::vector<Tensor> v;  // second moments

    static OptimState init(const std::vector<Tensor*>& params, AdamwConfig cfg);
};

// Decoupled-weight-decay Adam with bias correction; mutates params in place.
void adamw_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, OptimState& state);

}  // namespace scfm
