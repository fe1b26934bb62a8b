#pragma once

#include <cstdint>
#include <vector>

#include "data.hpp"
#include "distill.hpp"
#include "flow.hpp"
#include "net.hpp"

namespace scfm {

// Mean over seeded random directions of the 1-D 2-Wasserstein distance
// between the projected samples.
double sliced_wasserstein(const Tensor& a, const Tensor& b, int n_proj, uint64_t seed);

// W2 between two sorted 1-D samples; unequal sizes integrate the quantile gap.
double wasserstein_1d(std::vector<double> a, std::vector<double> b);

struct StraightnessResult {
    double value = 0.0;  // mean path-length excess over the chord
    int degenerate = 0;  // zero-chord trajectories left out of the mean
};

StraightnessResult straightness(const std::vector<Tensor>& trajectory);

// Mean squared gap between the field at t1 and its own two-step blend over
// random triples; 0 for any constant field. w > 0 probes the guided field on
// conditional models.
double consistency_residual(const Theta& model, const LabeledPoints& batch, const TimeGrid& grid,
                            int trials, Rng& rng, double w = 0.0);

struct FidelityArgs {
    int count = 2000;
    int steps_teacher = 128;
    int steps_student = 4;
    double w = 2.0;
    double shift = 3.0;
    int n_proj = 128;
    uint64_t seed = 0;
};

// Distance between many-step and few-step outputs started from one shared
// noise/label draw; reported in data coordinates.
double teacher_student_fidelity(const Theta& teacher, const Theta& student, const Normalization& norm,
                                const FidelityArgs& args);

// Shared draw used by fidelity so paired runs stay paired.
void eval_noise_and_labels(int count, int class_count, uint64_t seed, Tensor& z, std::vector<int>& labels);

}  // namespace scfm
