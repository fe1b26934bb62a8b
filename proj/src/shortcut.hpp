#pragma once

#include <cstdint>
#include <vector>

#include "flow.hpp"
#include "net.hpp"
#include "optim.hpp"

namespace scfm {

// Uniform over {1/n, 2/n, 4/n, ..., 1/2}; n must be a power of two >= 2.
double sample_d(int n, Rng& rng);
bool is_power_of_two(int n);

// Half-and-half average of two d-conditioned evaluations along the sampling
// direction, with the midpoint reached by one d-step of the frozen field
// toward data. Requires t >= 2d.
Tensor sc_target(const Theta& th_ema, const Tensor& x_t, double t, double d,
                 const std::vector<int>& labels, Tensor* x_next_out = nullptr);

// Mean-over-elements squared error between V(x_t, t, 2d) and sc_target.
double sc_loss(const Theta& th, const Theta& th_ema, const Tensor& x_t, double t, double d,
               const std::vector<int>& labels);

// theta_ema = mu*theta_ema + (1-mu)*theta on every parameter tensor.
void ema_theta(Theta& th_ema, const Theta& th, double mu);

struct ShortcutConfig {
    int iters = 8000;
    int batch = 128;
    double lr = 1e-3;
    double dropout = 0.1;
    double mu = 0.999;
    int grid_n = 128;  // defines the d ladder
    uint64_t seed = 0;
};

struct ShortcutStepRngs {
    Rng data, noise, time, step, dropout;
    static ShortcutStepRngs make(uint64_t seed);
};

// One joint update: velocity regression at d=0 plus consistency at a sampled d,
// summed with equal weight; EMA refreshed afterward. Returns (fm, consistency).
std::pair<double, double> sc_train_step(Theta& th, Theta& th_ema, OptimState& opt,
                                        const LabeledPoints& data, const ShortcutConfig& cfg,
                                        ShortcutStepRngs& rngs);

struct ShortcutResult {
    Theta theta;
    Theta theta_ema;
    std::vector<double> losses;  // fm + consistency per iteration
};

ShortcutResult train_shortcut(const LabeledPoints& data, const NetConfig& net_cfg,
                              const ShortcutConfig& cfg);

}  // namespace scfm
