#include "shortcut.hpp"

#include <cmath>

namespace scfm {

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double sample_d(int n, Rng& rng) {
    if (!is_power_of_two(n) || n < 2) throw ConfigError("step ladder needs a power-of-two step count >= 2");
    int levels = 0;
    for (int v = n; v > 1; v >>= 1) ++levels;  // log2(n) ladder entries
    int k = rng.uniform_int(levels);
    return static_cast<double>(1 << k) / static_cast<double>(n);
}

Tensor sc_target(const Theta& th_ema, const Tensor& x_t, double t, double d,
                 const std::vector<int>& labels, Tensor* x_next_out) {
    if (d <= 0.0 || d > 0.5) throw Error("consistency step size outside (0, 1/2]");
    if (t > 1.0 || t - 2.0 * d < -1e-12) throw Error("consistency window extends below t=0");
    Tensor v1 = eval_velocity(th_ema, x_t, t, labels, &d);
    Tensor x_next = euler_step(x_t, t, t - d, v1);
    Tensor v2 = eval_velocity(th_ema, x_next, std::max(0.0, t - d), labels, &d);
    Tensor out = v1;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = 0.5 * v1.data[i] + 0.5 * v2.data[i];
    if (x_next_out) *x_next_out = std::move(x_next);
    return out;
}

double sc_loss(const Theta& th, const Theta& th_ema, const Tensor& x_t, double t, double d,
               const std::vector<int>& labels) {
    Tensor target = sc_target(th_ema, x_t, t, d, labels);
    double d2 = 2.0 * d;
    Tensor pred = eval_velocity(th, x_t, t, labels, &d2);
    return mse_value(pred, target);
}

void ema_theta(Theta& th_ema, const Theta& th, double mu) {
    if (mu <= 0.0 || mu >= 1.0) throw ConfigError("EMA decay must lie in (0,1)");
    auto blend = [mu](Tensor& dst, const Tensor& src) {
        if (!dst.same_shape(src)) throw ShapeError("EMA shape mismatch");
        for (size_t i = 0; i < dst.data.size(); ++i)
            dst.data[i] = mu * dst.data[i] + (1.0 - mu) * src.data[i];
    };
    for (size_t k = 0; k < th_ema.w.size(); ++k) blend(th_ema.w[k], th.w[k]);
    for (size_t k = 0; k < th_ema.b.size(); ++k) blend(th_ema.b[k], th.b[k]);
    if (th_ema.cfg.conditional()) blend(th_ema.class_embed, th.class_embed);
}

ShortcutStepRngs ShortcutStepRngs::make(uint64_t seed) {
    return ShortcutStepRngs{Rng::substream(seed, "data"), Rng::substream(seed, "noise"),
                            Rng::substream(seed, "time"), Rng::substream(seed, "step"),
                            Rng::substream(seed, "dropout")};
}

namespace {

PathSample draw_batch(const LabeledPoints& data, int batch, double t, Rng& data_rng, Rng& noise_rng) {
    Tensor x0 = Tensor::zeros({batch, 2});
    std::vector<int> labels(batch);
    for (int i = 0; i < batch; ++i) {
        int j = data_rng.uniform_int(data.size());
        x0.at(i, 0) = data.x.at(j, 0);
        x0.at(i, 1) = data.x.at(j, 1);
        labels[i] = data.labels[j];
    }
    Tensor x1 = Tensor::zeros({batch, 2});
    for (double& v : x1.data) v = noise_rng.gaussian();
    return PathSample::make(std::move(x0), std::move(x1), t, std::move(labels));
}

}  // namespace

std::pair<double, double> sc_train_step(Theta& th, Theta& th_ema, OptimState& opt,
                                        const LabeledPoints& data, const ShortcutConfig& cfg,
                                        ShortcutStepRngs& rngs) {
    if (!th.cfg.step_conditioned()) throw ConfigError("consistency training needs a step-conditioned net");

    double t_fm = rngs.time.uniform();
    PathSample fm_batch = draw_batch(data, cfg.batch, t_fm, rngs.data, rngs.noise);

    // The 2d window must fit between t and the data end, so t lies in [2d, 1];
    // at d = 1/2 every consistency row trains the full jump from t = 1.
    double d = sample_d(cfg.grid_n, rngs.step);
    double t_sc = 2.0 * d + (1.0 - 2.0 * d) * rngs.time.uniform();
    PathSample sc_batch = draw_batch(data, cfg.batch, t_sc, rngs.data, rngs.noise);
    Tensor target = sc_target(th_ema, sc_batch.xt, t_sc, d, sc_batch.labels);

    std::vector<int> fm_labels = th.cfg.conditional()
                                     ? dropout_labels(fm_batch.labels, cfg.dropout, rngs.dropout)
                                     : std::vector<int>();
    Tape tape;
    TapeNet net = TapeNet::build(tape, th, nullptr, true);
    double d0 = 0.0;
    int fm_node = fm_loss_node(tape, net, fm_batch, fm_labels, &d0);
    double d2 = 2.0 * d;
    int sc_x = tape.leaf(sc_batch.xt);
    int sc_pred = net.forward(sc_x, t_sc, sc_batch.labels, &d2);
    int sc_node = tape.mse(sc_pred, tape.leaf(target));
    int loss = tape.add(fm_node, sc_node);

    double fm_v = tape.value(fm_node).data[0];
    double sc_v = tape.value(sc_node).data[0];
    if (!std::isfinite(fm_v) || !std::isfinite(sc_v)) throw DivergenceError("non-finite consistency-training loss");

    std::vector<Tensor> grads = tape.backward(loss, net.param_nodes);
    adamw_step(th.param_ptrs(), grads, opt);
    ema_theta(th_ema, th, cfg.mu);
    return {fm_v, sc_v};
}

ShortcutResult train_shortcut(const LabeledPoints& data, const NetConfig& net_cfg,
                              const ShortcutConfig& cfg) {
    if (data.size() == 0) throw ConfigError("empty dataset");
    if (!net_cfg.step_conditioned()) throw ConfigError("baseline net needs step_embed_dim > 0");
    Rng init_rng = Rng::substream(cfg.seed, "init");
    ShortcutResult r;
    r.theta = Theta::init(net_cfg, init_rng);
    r.theta_ema = r.theta;
    std::vector<Tensor*> params = r.theta.param_ptrs();
    AdamwConfig ocfg;
    ocfg.lr = cfg.lr;
    OptimState opt = OptimState::init(params, ocfg);
    ShortcutStepRngs rngs = ShortcutStepRngs::make(cfg.seed);
    r.losses.reserve(cfg.iters);
    for (int it = 0; it < cfg.iters; ++it) {
        auto [fm, sc] = sc_train_step(r.theta, r.theta_ema, opt, data, cfg, rngs);
        r.losses.push_back(fm + sc);
    }
    r.theta.check_finite();
    return r;
}

}  // namespace scfm
