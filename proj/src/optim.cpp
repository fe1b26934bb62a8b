#include "optim.hpp"

#include <cmath>

namespace scfm {

OptimState OptimState::init(const std::vector<Tensor*>& params, AdamwConfig cfg) {
    OptimState s;
    s.cfg = cfg;
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape));
        s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
}

void adamw_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, OptimState& state) {
    if (params.size() != grads.size() || params.size() != state.m.size())
        throw ShapeError("adamw_step: param/grad/state count mismatch");
    state.step += 1;
    const AdamwConfig& c = state.cfg;
    double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
    double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = grads[k];
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        if (!p.same_shape(g) || !p.same_shape(m))
            throw ShapeError("adamw_step: shape mismatch at param " + std::to_string(k));
        for (size_t i = 0; i < p.data.size(); ++i) {
            double gi = g.data[i];
            m.data[i] = c.beta1 * m.data[i] + (1.0 - c.beta1) * gi;
            v.data[i] = c.beta2 * v.data[i] + (1.0 - c.beta2) * gi * gi;
            double mh = m.data[i] / bc1;
            double vh = v.data[i] / bc2;
            p.data[i] -= c.lr * (mh / (std::sqrt(vh) + c.eps) + c.weight_decay * p.data[i]);
        }
    }
}

}  // namespace scfm
