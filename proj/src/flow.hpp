#pragma once

#include <cstdint>
#include <vector>

#include "data.hpp"
#include "net.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace scfm {

// times run 1 -> 0 (noise to data), n steps, n+1 entries.
struct TimeGrid {
    int n = 0;
    std::vector<double> times;
    double shift = 1.0;
};

TimeGrid make_grid(int n);
// Interior points move through s*t / (1 + (s-1)*t); endpoints stay exact.
TimeGrid shift_grid(const TimeGrid& grid, double s);
double shift_time(double t, double s);

// (1-t)*x0 + t*x1
Tensor interpolate(const Tensor& x0, const Tensor& x1, double t);

// One signed Euler update x - (t_from - t_to)*v. t_to > t_from moves toward
// noise; both the sampler and consistency targets share this helper.
Tensor euler_step(const Tensor& x, double t_from, double t_to, const Tensor& v);

// Full trajectory from z at t=1 down the grid; n+1 states. w > 0 applies
// guidance; step-conditioned nets receive each step's width.
std::vector<Tensor> euler_sample(const Theta& th, const TimeGrid& grid, const Tensor& z,
                                 const std::vector<int>& labels, double w);

struct PathSample {
    Tensor x0;  // data
    Tensor x1;  // noise
    double t = 0.0;
    Tensor xt;        // (1-t)*x0 + t*x1
    Tensor v_target;  // x1 - x0
    std::vector<int> labels;

    static PathSample make(Tensor x0, Tensor x1, double t, std::vector<int> labels);
};

struct LossAndGrads {
    double loss = 0.0;
    std::vector<Tensor> grads;  // Theta::param_ptrs order
};

// Builds the velocity-regression term on an existing tape; labels are the
// post-dropout ones.
int fm_loss_node(Tape& tape, TapeNet& net, const PathSample& batch, const std::vector<int>& labels,
                 const double* d = nullptr);

LossAndGrads fm_loss(Theta& th, const PathSample& batch, double dropout_prob, Rng& dropout_rng);

std::vector<int> dropout_labels(const std::vector<int>& labels, double prob, Rng& rng);

struct TeacherConfig {
    int iters = 20000;
    int batch = 128;
    double lr = 1e-3;
    double dropout = 0.1;
    uint64_t seed = 0;
};

struct TeacherResult {
    Theta theta;
    std::vector<double> losses;  // one entry per iteration
};

// Standard velocity-matching training on standardized data; fully determined
// by the seed.
TeacherResult train_teacher(const LabeledPoints& data, const NetConfig& net_cfg,
                            const TeacherConfig& cfg);

}  // namespace scfm
