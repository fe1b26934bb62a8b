#pragma once

// Shared fixtures: tiny hand-built networks whose outputs are known exactly.

#include "data.hpp"
#include "net.hpp"
#include "rng.hpp"
#include "tensor.hpp"

namespace testhelp {

// All weights zero, last-layer bias (cx, cy): the field is constant everywhere.
inline scfm::Theta constant_field_net(double cx, double cy, int class_count = 0,
                                      int step_embed_dim = 0) {
    scfm::NetConfig cfg;
    cfg.input_dim = 2;
    cfg.hidden_dim = 4;
    cfg.num_hidden_layers = 1;
    cfg.time_embed_dim = 2;
    cfg.class_count = class_count;
    cfg.step_embed_dim = step_embed_dim;
    scfm::Theta th;
    th.cfg = cfg;
    th.w.push_back(scfm::Tensor::zeros({4, cfg.concat_dim()}));
    th.b.push_back(scfm::Tensor::zeros({4}));
    th.w.push_back(scfm::Tensor::zeros({2, 4}));
    scfm::Tensor bias = scfm::Tensor::zeros({2});
    bias.data[0] = cx;
    bias.data[1] = cy;
    th.b.push_back(bias);
    if (class_count > 0) th.class_embed = scfm::Tensor::zeros({class_count + 1, cfg.time_embed_dim});
    return th;
}

inline scfm::LabeledPoints tiny_dataset(int n, uint64_t seed,
                                        scfm::DataKind kind = scfm::DataKind::Gaussians8) {
    scfm::DatasetSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    scfm::Rng rng(seed);
    return scfm::sample_dataset(spec, n, rng);
}

inline scfm::Tensor gaussian_batch(int rows, int cols, scfm::Rng& rng) {
    scfm::Tensor x = scfm::Tensor::zeros({rows, cols});
    for (auto& v : x.data) v = rng.gaussian();
    return x;
}

}  // namespace testhelp
