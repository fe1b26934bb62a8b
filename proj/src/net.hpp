#pragma once

#include <vector>

#include "rng.hpp"
#include "tape.hpp"
#include "tensor.hpp"

namespace scfm {

struct NetConfig {
    int input_dim = 2;
    int hidden_dim = 128;
    int num_hidden_layers = 3;
    int time_embed_dim = 32;   // also the class embedding width
    int class_count = 0;       // 0 = unconditional
    int step_embed_dim = 0;    // >0 enables the step-size head

    int dense_layers() const { return num_hidden_layers + 1; }
    bool conditional() const { return class_count > 0; }
    bool step_conditioned() const { return step_embed_dim > 0; }
    int concat_dim() const;
    // [in, out] dims of dense layer k
    int layer_in(int k) const;
    int layer_out(int k) const;
    void validate() const;
};

// Dense MLP parameters. The class embedding table holds one extra row used as
// the learned null condition.
struct Theta {
    NetConfig cfg;
    std::vector<Tensor> w;  // [out,in] per layer
    std::vector<Tensor> b;  // [out] per layer
    Tensor class_embed;     // [class_count+1, time_embed_dim], empty if unconditional

    static Theta init(const NetConfig& cfg, Rng& rng);
    std::vector<Tensor*> param_ptrs();  // w0,b0,...,wL,bL[,class_embed]
    void check_finite() const;
};

struct LoraDelta {
    int rank = 4;
    double alpha = 4.0;
    std::vector<Tensor> a;  // [rank, in] per dense layer
    std::vector<Tensor> bm;  // [out, rank] per dense layer

    // B starts at zero so the fresh adapter is an exact identity on theta0.
    static LoraDelta init(const NetConfig& cfg, int rank, double alpha, Rng& rng);
    std::vector<Tensor*> param_ptrs();  // a0,b0,a1,b1,...
    // (alpha/rank) * B * A for layer k
    Tensor effective(int k) const;
    void check_finite() const;
};

// Interleaved sin/cos of t against dim/2 geometric frequencies spanning [1,1000].
Tensor time_embed(double t, int dim);

int null_row(const NetConfig& cfg);  // embedding row index for the null label

// Plain forward with frozen parameters; labels empty for unconditional nets,
// label -1 selects the null row. d is required iff the net has a step head.
Tensor eval_velocity(const Theta& th, const Tensor& x, double t, const std::vector<int>& labels,
                     const double* d = nullptr);

// Merge-free variant applying W + (alpha/r)BA on the fly.
Tensor forward_velocity(const Theta& th0, const LoraDelta* delta, const Tensor& x, double t,
                        const std::vector<int>& labels, const double* d = nullptr);

Theta merge_params(const Theta& th0, const LoraDelta& delta);

// v_c + w*(v_c - v_null); w = 0 returns the conditional pass untouched.
Tensor cfg_velocity(const Theta& th, const Tensor& x, double t, const std::vector<int>& labels,
                    double w);
// Same combination applied to precomputed velocities, one w per row.
Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_null, const std::vector<double>& w);

// Differentiable forward graph. Parameters are registered once per tape; every
// forward() call reuses them, so multi-pass losses backpropagate into shared
// weights.
struct TapeNet {
    Tape* tape = nullptr;
    const Theta* theta = nullptr;
    const LoraDelta* delta = nullptr;
    bool train_base = false;

    std::vector<int> w_eff;    // per-layer weight nodes
    std::vector<int> b_nodes;  // per-layer bias nodes
    std::vector<int> a_nodes, bm_nodes;
    int embed_node = -1;
    std::vector<int> param_nodes;  // canonical gradient order

    // train_base: dense weights, biases, class table become params (teacher
    // training). With delta: only A/B factors become params (distillation).
    static TapeNet build(Tape& tape, const Theta& th, const LoraDelta* delta, bool train_base);
    int forward(int x_node, double t, const std::vector<int>& labels, const double* d = nullptr);
};

}  // namespace scfm
