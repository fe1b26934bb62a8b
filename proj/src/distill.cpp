#include "distill.hpp"

#include <cmath>

#include "shortcut.hpp"

namespace scfm {

Variant parse_variant(const std::string& name) {
    if (name == "vanilla") return Variant::Vanilla;
    if (name == "vanilla-mix") return Variant::VanillaMix;
    if (name == "cyclic") return Variant::Cyclic;
    if (name == "fast-slow") return Variant::FastSlow;
    throw ConfigError("unknown variant: " + name);
}

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::Vanilla: return "vanilla";
        case Variant::VanillaMix: return "vanilla-mix";
        case Variant::Cyclic: return "cyclic";
        case Variant::FastSlow: return "fast-slow";
    }
    throw ConfigError("unknown variant");
}

TripleTimes sample_triple(const TimeGrid& grid, int skip, Rng& rng) {
    if (skip < 1) throw ConfigError("skip must be >= 1");
    int last_start = grid.n - 2 * skip;
    if (last_start < 0) throw ConfigError("grid too small for skip " + std::to_string(skip));
    int start = rng.uniform_int(last_start + 1);
    TripleTimes t;
    t.skip = skip;
    t.t1 = grid.times[start];
    t.t2 = grid.times[start + skip];
    t.t3 = grid.times[start + 2 * skip];
    return t;
}

std::vector<int> self_skip_set(int n) {
    if (!is_power_of_two(n) || n < 8) throw ConfigError("grid size must be a power of two >= 8");
    std::vector<int> out;
    for (int s = 2; s <= n / 4; s *= 2) out.push_back(s);
    return out;
}

int DistillConfig::k() const {
    int n = few_shot > 0 ? few_shot : batch_n;
    return static_cast<int>(std::lround(teacher_fraction * n));
}

void DistillConfig::validate() const {
    int n = few_shot > 0 ? few_shot : batch_n;
    if (n <= 1) throw ConfigError("batch size must be > 1");
    if (k() <= 0 || k() >= n) throw ConfigError("teacher fraction leaves no room for both branches");
    if (!(mu_fast > 0.0 && mu_fast < mu_slow && mu_slow < 1.0))
        throw ConfigError("EMA decays must satisfy 0 < fast < slow < 1");
    self_skip_set(grid_n);
    if (shift_lo < 1.0 || shift_hi < shift_lo) throw ConfigError("bad shift range");
    if (w_lo < 0.0 || w_hi < w_lo) throw ConfigError("bad guidance range");
    if (restart_period < 0) throw ConfigError("restart period must be >= 0");
    if (iters < 0) throw ConfigError("iteration count must be >= 0");
    if (lora_rank <= 0) throw ConfigError("adapter rank must be positive");
}

DenseDelta DenseDelta::from(const LoraDelta& delta) {
    DenseDelta d;
    for (size_t k = 0; k < delta.a.size(); ++k) d.d.push_back(delta.effective(static_cast<int>(k)));
    return d;
}

EmaState EmaState::init(const LoraDelta& delta, bool with_fast) {
    EmaState s;
    s.slow = DenseDelta::from(delta);
    s.has_fast = with_fast;
    if (with_fast) s.fast = DenseDelta::from(delta);
    return s;
}

Theta merge_dense(const Theta& th0, const DenseDelta& delta) {
    if (delta.d.size() != th0.w.size()) throw ShapeError("delta layer count vs theta");
    Theta out = th0;
    for (size_t k = 0; k < out.w.size(); ++k) {
        if (!delta.d[k].same_shape(out.w[k])) throw ShapeError("delta shape vs layer " + std::to_string(k));
        for (size_t i = 0; i < out.w[k].data.size(); ++i) out.w[k].data[i] += delta.d[k].data[i];
    }
    return out;
}

void ema_update(DenseDelta& state, const LoraDelta& delta, double mu) {
    if (mu <= 0.0 || mu >= 1.0) throw ConfigError("EMA decay must lie in (0,1)");
    if (state.d.size() != delta.a.size()) throw ShapeError("EMA layer count vs adapters");
    for (size_t k = 0; k < state.d.size(); ++k) {
        Tensor eff = delta.effective(static_cast<int>(k));
        if (!eff.same_shape(state.d[k])) throw ShapeError("EMA shape vs layer " + std::to_string(k));
        for (size_t i = 0; i < eff.data.size(); ++i)
            state.d[k].data[i] = mu * state.d[k].data[i] + (1.0 - mu) * eff.data[i];
    }
}

void cyclic_restart(EmaState& state, const LoraDelta& delta, int period, int64_t iteration) {
    if (period <= 0) return;
    if (iteration % period != 0) return;
    state.slow = DenseDelta::from(delta);
}

namespace {

Tensor provider_velocity(const Theta& th, const Tensor& x, double t, const std::vector<int>& labels,
                         double w) {
    Tensor v = (th.cfg.conditional() && w > 0.0) ? cfg_velocity(th, x, t, labels, w)
                                                 : eval_velocity(th, x, t, labels);
    v.check_finite("target-provider velocity");
    return v;
}

}  // namespace

Tensor scfm_target(const Theta& provider_a, const Theta& provider_b, const Tensor& x_t1,
                   const TripleTimes& triple, const std::vector<int>& labels, double w,
                   Tensor* x_t2_out) {
    double di = triple.d_i(), dn = triple.d_next();
    if (di <= 0.0 || dn <= 0.0) throw Error("triple times must be strictly decreasing");
    Tensor v_a = provider_velocity(provider_a, x_t1, triple.t1, labels, w);
    Tensor x_t2 = euler_step(x_t1, triple.t1, triple.t2, v_a);
    Tensor v_b = provider_velocity(provider_b, x_t2, triple.t2, labels, w);
    double wa = di / (di + dn), wb = dn / (di + dn);
    Tensor out = v_a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = wa * v_a.data[i] + wb * v_b.data[i];
    if (x_t2_out) *x_t2_out = std::move(x_t2);
    return out;
}

DistillRngs DistillRngs::make(uint64_t seed) {
    return DistillRngs{Rng::substream(seed, "data"), Rng::substream(seed, "noise"),
                       Rng::substream(seed, "shift"), Rng::substream(seed, "triples"),
                       Rng::substream(seed, "cfg-w")};
}

double distill_step(const Theta& theta0, LoraDelta& delta, EmaState& state, OptimState& opt,
                    const LabeledPoints& data, const DistillConfig& cfg, DistillRngs& rngs) {
    bool few_shot = cfg.few_shot > 0;
    int n = few_shot ? data.size() : cfg.batch_n;
    int k = cfg.k();
    bool conditional = theta0.cfg.conditional();

    Tensor x0 = Tensor::zeros({n, 2});
    std::vector<int> labels(n);
    if (few_shot) {
        x0 = data.x;
        labels = data.labels;
    } else {
        for (int i = 0; i < n; ++i) {
            int j = rngs.data.uniform_int(data.size());
            x0.at(i, 0) = data.x.at(j, 0);
            x0.at(i, 1) = data.x.at(j, 1);
            labels[i] = data.labels[j];
        }
    }
    Tensor x1 = Tensor::zeros({n, 2});
    for (double& v : x1.data) v = rngs.noise.gaussian();

    double s = rngs.shift.uniform(cfg.shift_lo, cfg.shift_hi);
    TimeGrid grid = shift_grid(make_grid(cfg.grid_n), s);
    std::vector<int> skips = self_skip_set(cfg.grid_n);

    if (cfg.variant == Variant::FastSlow && !state.has_fast)
        throw ConfigError("fast-slow self branch needs the fast averaged copy");
    Theta theta_minus = merge_dense(theta0, state.slow);
    Theta theta_plus = state.has_fast ? merge_dense(theta0, state.fast) : Theta();

    // teacher branch pairs: (theta*, theta*), or (theta*, theta-) for the
    // blended variants; self branch: (theta-, theta-), or (theta+, theta-)
    bool mix_teacher = cfg.variant == Variant::VanillaMix || cfg.variant == Variant::FastSlow;
    const Theta& teacher_b = mix_teacher ? theta_minus : theta0;
    const Theta& self_a = cfg.variant == Variant::FastSlow ? theta_plus : theta_minus;

    Tape tape;
    TapeNet net = TapeNet::build(tape, theta0, &delta, false);
    int loss_node = -1;
    double inv_n = 1.0 / static_cast<double>(n);
    for (int i = 0; i < n; ++i) {
        int skip = i < k ? 1 : skips[rngs.triples.uniform_int(static_cast<int>(skips.size()))];
        TripleTimes triple = sample_triple(grid, skip, rngs.triples);
        double w = conditional ? rngs.cfg_w.uniform(cfg.w_lo, cfg.w_hi) : 0.0;
        Tensor xi = Tensor::row2(x0.at(i, 0), x0.at(i, 1));
        Tensor zi = Tensor::row2(x1.at(i, 0), x1.at(i, 1));
        Tensor x_t1 = interpolate(xi, zi, triple.t1);
        std::vector<int> li = conditional ? std::vector<int>{labels[i]} : std::vector<int>();

        Tensor target = i < k ? scfm_target(theta0, teacher_b, x_t1, triple, li, w)
                              : scfm_target(self_a, theta_minus, x_t1, triple, li, w);

        int x_node = tape.leaf(x_t1);
        int pred = net.forward(x_node, triple.t1, li);
        if (conditional && w > 0.0) {
            int pred_null = net.forward(x_node, triple.t1, {-1});
            int diff = tape.add(pred, tape.scale(pred_null, -1.0));
            pred = tape.add(pred, tape.scale(diff, w));
        }
        int term = tape.scale(tape.mse(pred, tape.leaf(target)), inv_n);
        loss_node = i == 0 ? term : tape.add(loss_node, term);
    }

    double loss = tape.value(loss_node).data[0];
    if (!std::isfinite(loss)) throw DivergenceError("non-finite distillation loss");
    std::vector<Tensor> grads = tape.backward(loss_node, net.param_nodes);
    adamw_step(delta.param_ptrs(), grads, opt);

    state.iteration += 1;
    ema_update(state.slow, delta, cfg.mu_slow);
    if (state.has_fast) ema_update(state.fast, delta, cfg.mu_fast);
    if (cfg.variant == Variant::Cyclic) cyclic_restart(state, delta, cfg.restart_period, state.iteration);
    return loss;
}

DistillResult run_distill(const Theta& theta0, const LabeledPoints& data, const DistillConfig& cfg,
                          const DistillHook& hook) {
    cfg.validate();
    if (data.size() == 0) throw ConfigError("empty dataset");
    if (theta0.cfg.step_conditioned()) throw ConfigError("distillation target net has no step head");

    LabeledPoints train = cfg.few_shot > 0 ? few_shot_subset(data, cfg.few_shot, cfg.seed) : data;

    Rng lora_rng = Rng::substream(cfg.seed, "lora-init");
    DistillResult r;
    r.delta = LoraDelta::init(theta0.cfg, cfg.lora_rank, cfg.lora_alpha, lora_rng);
    r.state = EmaState::init(r.delta, cfg.variant == Variant::FastSlow);

    std::vector<Tensor*> params = r.delta.param_ptrs();
    AdamwConfig ocfg;
    ocfg.lr = cfg.lr;
    r.opt = OptimState::init(params, ocfg);
    DistillRngs rngs = DistillRngs::make(cfg.seed);

    for (int it = 0; it < cfg.iters; ++it) {
        double loss = distill_step(theta0, r.delta, r.state, r.opt, train, cfg, rngs);
        if (hook) hook(it + 1, loss, r.delta, r.state);
    }
    r.delta.check_finite();
    return r;
}

}  // namespace scfm
