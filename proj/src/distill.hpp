#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "flow.hpp"
#include "net.hpp"
#include "optim.hpp"

namespace scfm {

enum class Variant { Vanilla, VanillaMix, Cyclic, FastSlow };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant v);

// Three grid times at consecutive multiples of skip, descending.
struct TripleTimes {
    double t1 = 0.0, t2 = 0.0, t3 = 0.0;
    int skip = 1;
    double d_i() const { return t1 - t2; }
    double d_next() const { return t2 - t3; }
};

// Start index uniform over the positions leaving room for two skip-strides.
TripleTimes sample_triple(const TimeGrid& grid, int skip, Rng& rng);

// Powers of two {2, 4, ..., n/4} used by the self-teaching branch.
std::vector<int> self_skip_set(int n);

struct DistillConfig {
    int iters = 5000;
    double lr = 1e-3;
    int batch_n = 16;              // N
    double teacher_fraction = 0.4;  // k/N
    double mu_slow = 0.999;
    double mu_fast = 0.99;
    int restart_period = 1000;  // cyclic variant only; 0 disables
    Variant variant = Variant::FastSlow;
    int grid_n = 128;
    double shift_lo = 2.5, shift_hi = 4.5;
    double w_lo = 0.0, w_hi = 4.0;
    int lora_rank = 4;
    double lora_alpha = 4.0;
    int few_shot = 0;  // >0: train on a frozen subset used as the whole batch
    uint64_t seed = 0;

    int k() const;
    void validate() const;
};

// Per-layer dense delta matrices. EMA runs on these rather than the low-rank
// factors, whose product is not linear in them.
struct DenseDelta {
    std::vector<Tensor> d;

    static DenseDelta from(const LoraDelta& delta);
};

struct EmaState {
    DenseDelta slow;  // consistency-target field
    DenseDelta fast;  // only maintained by the fast-slow schedule
    bool has_fast = false;
    int64_t iteration = 0;

    static EmaState init(const LoraDelta& delta, bool with_fast);
};

Theta merge_dense(const Theta& th0, const DenseDelta& delta);

void ema_update(DenseDelta& state, const LoraDelta& delta, double mu);

// period > 0 and iteration % period == 0 snaps the slow copy back to the
// current adapters.
void cyclic_restart(EmaState& state, const LoraDelta& delta, int period, int64_t iteration);

// Convex d-weighted blend of two frozen velocities along one Euler step of
// provider_a; labels/w apply guidance to both evaluations.
Tensor scfm_target(const Theta& provider_a, const Theta& provider_b, const Tensor& x_t1,
                   const TripleTimes& triple, const std::vector<int>& labels, double w,
                   Tensor* x_t2_out = nullptr);

struct DistillRngs {
    Rng data, noise, shift, triples, cfg_w;
    static DistillRngs make(uint64_t seed);
};

// One full update: sample batch/shift/triples, build targets per variant,
// regress the adapted field onto them, refresh EMA state. Returns the loss.
double distill_step(const Theta& theta0, LoraDelta& delta, EmaState& state, OptimState& opt,
                    const LabeledPoints& data, const DistillConfig& cfg, DistillRngs& rngs);

struct DistillResult {
    LoraDelta delta;
    EmaState state;
    OptimState opt;
};

using DistillHook = std::function<void(int iter, double loss, const LoraDelta&, const EmaState&)>;

// data must already be standardized. few_shot > 0 freezes a subset as the
// batch for every iteration.
DistillResult run_distill(const Theta& theta0, const LabeledPoints& data, const DistillConfig& cfg,
                          const DistillHook& hook = DistillHook());

}  // namespace scfm
