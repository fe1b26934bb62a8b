#include "net.hpp"

#include <cmath>
#include <string>

namespace scfm {

int NetConfig::concat_dim() const {
    return input_dim + time_embed_dim + (conditional() ? time_embed_dim : 0) + step_embed_dim;
}

int NetConfig::layer_in(int k) const { return k == 0 ? concat_dim() : hidden_dim; }

int NetConfig::layer_out(int k) const { return k == dense_layers() - 1 ? input_dim : hidden_dim; }

void NetConfig::validate() const {
    if (input_dim <= 0 || hidden_dim <= 0 || num_hidden_layers <= 0) throw ShapeError("net dims must be positive");
    if (time_embed_dim <= 0 || time_embed_dim % 2 != 0) throw ShapeError("time_embed_dim must be positive and even");
    if (class_count < 0) throw ShapeError("class_count must be >= 0");
    if (step_embed_dim < 0 || step_embed_dim % 2 != 0) throw ShapeError("step_embed_dim must be even");
}

Theta Theta::init(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    Theta th;
    th.cfg = cfg;
    for (int k = 0; k < cfg.dense_layers(); ++k) {
        int in = cfg.layer_in(k), out = cfg.layer_out(k);
        Tensor w = Tensor::zeros({out, in});
        double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : w.data) v = s * rng.gaussian();
        th.w.push_back(std::move(w));
        th.b.push_back(Tensor::zeros({out}));
    }
    if (cfg.conditional()) {
        th.class_embed = Tensor::zeros({cfg.class_count + 1, cfg.time_embed_dim});
        for (double& v : th.class_embed.data) v = 0.1 * rng.gaussian();
    }
    return th;
}

std::vector<Tensor*> Theta::param_ptrs() {
    std::vector<Tensor*> out;
    for (size_t k = 0; k < w.size(); ++k) {
        out.push_back(&w[k]);
        out.push_back(&b[k]);
    }
    if (cfg.conditional()) out.push_back(&class_embed);
    return out;
}

void Theta::check_finite() const {
    for (const Tensor& t : w) t.check_finite("dense weights");
    for (const Tensor& t : b) t.check_finite("dense biases");
    if (cfg.conditional()) class_embed.check_finite("class embedding");
}

LoraDelta LoraDelta::init(const NetConfig& cfg, int rank, double alpha, Rng& rng) {
    if (rank <= 0) throw ShapeError("lora rank must be positive");
    LoraDelta d;
    d.rank = rank;
    d.alpha = alpha;
    for (int k = 0; k < cfg.dense_layers(); ++k) {
        int in = cfg.layer_in(k), out = cfg.layer_out(k);
        Tensor a = Tensor::zeros({rank, in});
        double s = 1.0 / std::sqrt(static_cast<double>(in));
        for (double& v : a.data) v = s * rng.gaussian();
        d.a.push_back(std::move(a));
        d.bm.push_back(Tensor::zeros({out, rank}));
    }
    return d;
}

std::vector<Tensor*> LoraDelta::param_ptrs() {
    std::vector<Tensor*> out;
    for (size_t k = 0; k < a.size(); ++k) {
        out.push_back(&a[k]);
        out.push_back(&bm[k]);
    }
    return out;
}

Tensor LoraDelta::effective(int k) const {
    const Tensor& A = a[k];
    const Tensor& B = bm[k];
    int out = B.rows(), in = A.cols(), r = rank;
    Tensor d = Tensor::zeros({out, in});
    double s = alpha / static_cast<double>(r);
    for (int i = 0; i < out; ++i) {
        const double* bi = B.row_ptr(i);
        double* di = d.row_ptr(i);
        for (int q = 0; q < r; ++q) {
            double c = s * bi[q];
            if (c == 0.0) continue;
            const double* aq = A.row_ptr(q);
            for (int j = 0; j < in; ++j) di[j] += c * aq[j];
        }
    }
    return d;
}

void LoraDelta::check_finite() const {
    for (const Tensor& t : a) t.check_finite("lora A");
    for (const Tensor& t : bm) t.check_finite("lora B");
}

Tensor time_embed(double t, int dim) {
    if (dim <= 0 || dim % 2 != 0) throw ShapeError("time_embed: dim must be positive and even");
    int half = dim / 2;
    Tensor out = Tensor::zeros({dim});
    for (int k = 0; k < half; ++k) {
        double f = half == 1 ? 1.0 : std::pow(1000.0, static_cast<double>(k) / (half - 1));
        out.data[2 * k] = std::sin(f * t);
        out.data[2 * k + 1] = std::cos(f * t);
    }
    return out;
}

int null_row(const NetConfig& cfg) { return cfg.class_count; }

namespace {

Tensor feature_rows(const Tensor& f, int rows) {
    Tensor out = Tensor::zeros({rows, static_cast<int>(f.data.size())});
    for (int i = 0; i < rows; ++i) {
        double* p = out.row_ptr(i);
        for (size_t j = 0; j < f.data.size(); ++j) p[j] = f.data[j];
    }
    return out;
}

std::vector<int> embed_indices(const NetConfig& cfg, const std::vector<int>& labels, int rows) {
    if (static_cast<int>(labels.size()) != rows) throw ShapeError("label count vs batch rows");
    std::vector<int> idx(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) {
        int c = labels[i];
        if (c < -1 || c >= cfg.class_count)
            throw Error("label out of range: " + std::to_string(c));
        idx[i] = c < 0 ? null_row(cfg) : c;
    }
    return idx;
}

Tensor build_input(const NetConfig& cfg, const Tensor& x, double t, const std::vector<int>& labels,
                   const double* d, const Tensor& class_embed) {
    if (x.cols() != cfg.input_dim) throw ShapeError("input dim " + x.shape_str());
    if (t < 0.0 || t > 1.0) throw Error("t outside [0,1]");
    if (cfg.step_conditioned() != (d != nullptr))
        throw Error(d ? "step size supplied to a net without step head" : "net requires a step size");
    int b = x.rows();
    Tensor in = Tensor::zeros({b, cfg.concat_dim()});
    Tensor tf = time_embed(t, cfg.time_embed_dim);
    Tensor df = cfg.step_conditioned() ? time_embed(*d, cfg.step_embed_dim) : Tensor();
    std::vector<int> idx = cfg.conditional() ? embed_indices(cfg, labels, b) : std::vector<int>();
    for (int i = 0; i < b; ++i) {
        double* p = in.row_ptr(i);
        const double* xi = x.row_ptr(i);
        for (int j = 0; j < cfg.input_dim; ++j) *p++ = xi[j];
        for (double v : tf.data) *p++ = v;
        if (cfg.conditional()) {
            const double* e = class_embed.row_ptr(idx[i]);
            for (int j = 0; j < cfg.time_embed_dim; ++j) *p++ = e[j];
        }
        for (double v : df.data) *p++ = v;
    }
    return in;
}

}  // namespace

Tensor eval_velocity(const Theta& th, const Tensor& x, double t, const std::vector<int>& labels,
                     const double* d) {
    Tensor h = build_input(th.cfg, x, t, labels, d, th.class_embed);
    Tensor y;
    int L = th.cfg.dense_layers();
    for (int k = 0; k < L; ++k) {
        affine_forward(h, th.w[k], &th.b[k], y);
        if (k < L - 1)
            tanh_forward(y, h);
        else
            h = std::move(y);
    }
    return h;
}

Tensor forward_velocity(const Theta& th0, const LoraDelta* delta, const Tensor& x, double t,
                        const std::vector<int>& labels, const double* d) {
    if (!delta) return eval_velocity(th0, x, t, labels, d);
    Tensor h = build_input(th0.cfg, x, t, labels, d, th0.class_embed);
    Tensor y;
    int L = th0.cfg.dense_layers();
    for (int k = 0; k < L; ++k) {
        Tensor w_eff = th0.w[k];
        Tensor de = delta->effective(k);
        if (!w_eff.same_shape(de)) throw ShapeError("lora delta shape vs layer " + std::to_string(k));
        for (size_t i = 0; i < w_eff.data.size(); ++i) w_eff.data[i] += de.data[i];
        affine_forward(h, w_eff, &th0.b[k], y);
        if (k < L - 1)
            tanh_forward(y, h);
        else
            h = std::move(y);
    }
    return h;
}

Theta merge_params(const Theta& th0, const LoraDelta& delta) {
    if (delta.a.size() != th0.w.size()) throw ShapeError("lora layer count vs theta");
    Theta out = th0;
    for (size_t k = 0; k < out.w.size(); ++k) {
        Tensor de = delta.effective(static_cast<int>(k));
        if (!de.same_shape(out.w[k])) throw ShapeError("lora delta shape vs layer " + std::to_string(k));
        for (size_t i = 0; i < de.data.size(); ++i) out.w[k].data[i] += de.data[i];
    }
    return out;
}

Tensor cfg_velocity(const Theta& th, const Tensor& x, double t, const std::vector<int>& labels,
                    double w) {
    if (!th.cfg.conditional()) throw Error("guidance requires a class-conditional net");
    if (w < 0.0) throw Error("guidance scale must be >= 0");
    Tensor v_c = eval_velocity(th, x, t, labels);
    if (w == 0.0) return v_c;
    std::vector<int> nulls(labels.size(), -1);
    Tensor v_n = eval_velocity(th, x, t, nulls);
    return cfg_combine(v_c, v_n, std::vector<double>(static_cast<size_t>(x.rows()), w));
}

Tensor cfg_combine(const Tensor& v_cond, const Tensor& v_null, const std::vector<double>& w) {
    if (!v_cond.same_shape(v_null)) throw ShapeError("guided combine shape mismatch");
    if (static_cast<int>(w.size()) != v_cond.rows()) throw ShapeError("one guidance scale per row");
    Tensor out = v_cond;
    for (int i = 0; i < out.rows(); ++i) {
        double* o = out.row_ptr(i);
        const double* c = v_cond.row_ptr(i);
        const double* n = v_null.row_ptr(i);
        for (int j = 0; j < out.cols(); ++j) o[j] = c[j] + w[i] * (c[j] - n[j]);
    }
    return out;
}

TapeNet TapeNet::build(Tape& tape, const Theta& th, const LoraDelta* delta, bool train_base) {
    if (train_base && delta) throw Error("base training and adapter training are exclusive");
    TapeNet net;
    net.tape = &tape;
    net.theta = &th;
    net.delta = delta;
    net.train_base = train_base;
    int L = th.cfg.dense_layers();
    for (int k = 0; k < L; ++k) {
        int w_node;
        if (delta) {
            int a = tape.param(delta->a[k]);
            int bm = tape.param(delta->bm[k]);
            net.a_nodes.push_back(a);
            net.bm_nodes.push_back(bm);
            net.param_nodes.push_back(a);
            net.param_nodes.push_back(bm);
            int prod = tape.affine(bm, tape.transpose(a), -1);
            w_node = tape.add(tape.leaf(th.w[k]),
                              tape.scale(prod, delta->alpha / static_cast<double>(delta->rank)));
            net.b_nodes.push_back(tape.leaf(th.b[k]));
        } else if (train_base) {
            w_node = tape.param(th.w[k]);
            int b_node = tape.param(th.b[k]);
            net.b_nodes.push_back(b_node);
            net.param_nodes.push_back(w_node);
            net.param_nodes.push_back(b_node);
        } else {
            w_node = tape.leaf(th.w[k]);
            net.b_nodes.push_back(tape.leaf(th.b[k]));
        }
        net.w_eff.push_back(w_node);
    }
    if (th.cfg.conditional()) {
        if (train_base) {
            net.embed_node = tape.param(th.class_embed);
            net.param_nodes.push_back(net.embed_node);
        } else {
            net.embed_node = tape.leaf(th.class_embed);
        }
    }
    return net;
}

int TapeNet::forward(int x_node, double t, const std::vector<int>& labels, const double* d) {
    const NetConfig& cfg = theta->cfg;
    const Tensor& x = tape->value(x_node);
    if (x.cols() != cfg.input_dim) throw ShapeError("input dim " + x.shape_str());
    if (t < 0.0 || t > 1.0) throw Error("t outside [0,1]");
    if (cfg.step_conditioned() != (d != nullptr))
        throw Error(d ? "step size supplied to a net without step head" : "net requires a step size");
    int b = x.rows();
    std::vector<int> parts{x_node, tape->leaf(feature_rows(time_embed(t, cfg.time_embed_dim), b))};
    if (cfg.conditional()) parts.push_back(tape->rows_select(embed_node, embed_indices(cfg, labels, b)));
    if (cfg.step_conditioned()) parts.push_back(tape->leaf(feature_rows(time_embed(*d, cfg.step_embed_dim), b)));
    int h = tape->concat(parts);
    int L = cfg.dense_layers();
    for (int k = 0; k < L; ++k) {
        h = tape->affine(h, w_eff[k], b_nodes[k]);
        if (k < L - 1) h = tape->tanh_(h);
    }
    return h;
}

}  // namespace scfm
