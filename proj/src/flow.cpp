#include "flow.hpp"

#include <cmath>
#include <utility>

#include "errors.hpp"
#include "optim.hpp"
#include "tape.hpp"

namespace scfm {

TimeGrid make_grid(int n) {
    if (n < 1) throw ConfigError("grid needs at least one step");
    TimeGrid g;
    g.n = n;
    g.times.resize(n + 1);
    for (int i = 0; i <= n; ++i) g.times[i] = static_cast<double>(n - i) / n;
    g.times[0] = 1.0;
    g.times[n] = 0.0;
    return g;
}

double shift_time(double t, double s) { return s * t / (1.0 + (s - 1.0) * t); }

TimeGrid shift_grid(const TimeGrid& grid, double s) {
    if (s < 1.0) throw ConfigError("shift must be >= 1");
    TimeGrid g = grid;
    g.shift = s;
    for (int i = 1; i < g.n; ++i) g.times[i] = shift_time(grid.times[i], s);
    return g;
}

Tensor interpolate(const Tensor& x0, const Tensor& x1, double t) {
    if (!x0.same_shape(x1)) throw ShapeError("interpolate: " + x0.shape_str() + " vs " + x1.shape_str());
    if (t < 0.0 || t > 1.0) throw Error("interpolate: t outside [0,1]");
    Tensor out = x0;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = (1.0 - t) * x0.data[i] + t * x1.data[i];
    return out;
}

Tensor euler_step(const Tensor& x, double t_from, double t_to, const Tensor& v) {
    if (!x.same_shape(v)) throw ShapeError("euler_step: " + x.shape_str() + " vs " + v.shape_str());
    double d = t_from - t_to;
    Tensor out = x;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] -= d * v.data[i];
    return out;
}

std::vector<Tensor> euler_sample(const Theta& th, const TimeGrid& grid, const Tensor& z,
                                 const std::vector<int>& labels, double w) {
    z.check_finite("sampler input");
    std::vector<Tensor> traj;
    traj.reserve(grid.n + 1);
    traj.push_back(z);
    for (int i = 0; i < grid.n; ++i) {
        double t = grid.times[i];
        double t_next = grid.times[i + 1];
        double d = t - t_next;
        const double* dp = th.cfg.step_conditioned() ? &d : nullptr;
        Tensor v;
        if (th.cfg.conditional() && w > 0.0) {
            Tensor v_c = eval_velocity(th, traj.back(), t, labels, dp);
            std::vector<int> nulls(labels.size(), -1);
            Tensor v_n = eval_velocity(th, traj.back(), t, nulls, dp);
            v = cfg_combine(v_c, v_n, std::vector<double>(static_cast<size_t>(z.rows()), w));
        } else {
            v = eval_velocity(th, traj.back(), t, labels, dp);
        }
        Tensor next = euler_step(traj.back(), t, t_next, v);
        next.check_finite("sampler state");
        traj.push_back(std::move(next));
    }
    return traj;
}

PathSample PathSample::make(Tensor x0, Tensor x1, double t, std::vector<int> labels) {
    PathSample p;
    p.xt = interpolate(x0, x1, t);
    p.v_target = x1;
    for (size_t i = 0; i < p.v_target.data.size(); ++i) p.v_target.data[i] -= x0.data[i];
    p.x0 = std::move(x0);
    p.x1 = std::move(x1);
    p.t = t;
    p.labels = std::move(labels);
    return p;
}

std::vector<int> dropout_labels(const std::vector<int>& labels, double prob, Rng& rng) {
    std::vector<int> out = labels;
    if (prob <= 0.0) return out;
    for (int& c : out)
        if (rng.uniform() < prob) c = -1;
    return out;
}

int fm_loss_node(Tape& tape, TapeNet& net, const PathSample& batch, const std::vector<int>& labels,
                 const double* d) {
    int x = tape.leaf(batch.xt);
    int out = net.forward(x, batch.t, labels, d);
    return tape.mse(out, tape.leaf(batch.v_target));
}

LossAndGrads fm_loss(Theta& th, const PathSample& batch, double dropout_prob, Rng& dropout_rng) {
    if (batch.xt.rows() == 0) throw ConfigError("empty batch");
    std::vector<int> labels = th.cfg.conditional()
                                  ? dropout_labels(batch.labels, dropout_prob, dropout_rng)
                                  : std::vector<int>();
    Tape tape;
    TapeNet net = TapeNet::build(tape, th, nullptr, true);
    int loss = fm_loss_node(tape, net, batch, labels);
    LossAndGrads r;
    r.loss = tape.value(loss).data[0];
    if (!std::isfinite(r.loss)) throw DivergenceError("non-finite velocity-matching loss");
    r.grads = tape.backward(loss, net.param_nodes);
    return r;
}

TeacherResult train_teacher(const LabeledPoints& data, const NetConfig& net_cfg,
                            const TeacherConfig& cfg) {
    if (data.size() == 0) throw ConfigError("empty dataset");
    Rng init_rng = Rng::substream(cfg.seed, "init");
    Rng data_rng = Rng::substream(cfg.seed, "data");
    Rng noise_rng = Rng::substream(cfg.seed, "noise");
    Rng time_rng = Rng::substream(cfg.seed, "time");
    Rng dropout_rng = Rng::substream(cfg.seed, "dropout");

    TeacherResult r;
    r.theta = Theta::init(net_cfg, init_rng);
    std::vector<Tensor*> params = r.theta.param_ptrs();
    AdamwConfig ocfg;
    ocfg.lr = cfg.lr;
    OptimState opt = OptimState::init(params, ocfg);

    r.losses.reserve(cfg.iters);
    for (int it = 0; it < cfg.iters; ++it) {
        Tensor x0 = Tensor::zeros({cfg.batch, 2});
        std::vector<int> labels(cfg.batch);
        for (int i = 0; i < cfg.batch; ++i) {
            int j = data_rng.uniform_int(data.size());
            x0.at(i, 0) = data.x.at(j, 0);
            x0.at(i, 1) = data.x.at(j, 1);
            labels[i] = data.labels[j];
        }
        Tensor x1 = Tensor::zeros({cfg.batch, 2});
        for (double& v : x1.data) v = noise_rng.gaussian();
        double t = time_rng.uniform();
        PathSample batch = PathSample::make(std::move(x0), std::move(x1), t, std::move(labels));
        LossAndGrads lg = fm_loss(r.theta, batch, cfg.dropout, dropout_rng);
        adamw_step(params, lg.grads, opt);
        r.losses.push_back(lg.loss);
    }
    r.theta.check_finite();
    return r;
}

}  // namespace scfm
