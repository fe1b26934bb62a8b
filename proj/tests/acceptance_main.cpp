// End-to-end acceptance run: eleven checks covering gradient correctness,
// formula exactness, training quality at the reference scale, schedule
// comparisons across seeds, and bitwise reproducibility. Each check prints a
// single PASS/FAIL line on stdout; progress notes go to stderr. Exit status is
// the number of failed checks.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "../src/checkpoint.hpp"
#include "../src/config.hpp"
#include "../src/data.hpp"
#include "../src/distill.hpp"
#include "../src/errors.hpp"
#include "../src/flow.hpp"
#include "../src/metrics.hpp"
#include "../src/net.hpp"
#include "../src/runner.hpp"
#include "../src/shortcut.hpp"
#include "helpers.hpp"

using namespace scfm;

namespace {

namespace fs = std::filesystem;

// Heldout sliced Wasserstein of the first verified reference teacher run
// (20k iterations, seed 42, 128-step sampling). The guard allows +20%.
constexpr double kTeacherSwBaseline = 0.4928;  // heldout SW of the reference teacher, first verified run

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

int g_failed = 0;

void report(int idx, bool pass, const std::string& name, const std::string& detail) {
    std::ostringstream os;
    os << "[" << (idx < 10 ? " " : "") << idx << "] " << (pass ? "PASS" : "FAIL") << " " << name
       << ": " << detail;
    std::cout << os.str() << std::endl;
    if (!pass) ++g_failed;
}

void note(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

ExperimentConfig reference_config() {
    ExperimentConfig cfg;  // defaults are the reference gaussians8 experiment
    cfg.resolve();
    return cfg;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0.0;
    for (int i = 0; i < a.numel(); ++i) worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
    return worst;
}

// ---- check 1: gradients ----------------------------------------------------

void check_gradients() {
    Timer t;
    GradProbeReport rep = run_gradient_probes(100, 2026, 1e-4);
    double sec = t.seconds();
    bool pass = rep.failures == 0 && rep.probes == 100 && sec < 10.0;
    report(1, pass, "gradient check",
           "100 probes vs central differences, worst rel err " + fmt(rep.worst, 3) + " (" +
               rep.worst_case + "), " + fmt(sec, 3) + " s");
}

// ---- check 2: adapter ema identity -----------------------------------------

void check_ema_identity() {
    Timer t;
    NetConfig nc;
    nc.input_dim = 2;
    nc.hidden_dim = 16;
    nc.num_hidden_layers = 1;
    nc.time_embed_dim = 8;
    Rng rng(7);
    Theta th0 = Theta::init(nc, rng);
    Rng lora_rng = Rng::substream(7, "adapter");
    LoraDelta delta = LoraDelta::init(nc, 2, 2.0, lora_rng);
    EmaState st = EmaState::init(delta, false);
    const double mu = 0.999;

    // Oracle state: exponential average of the merged dense weights.
    Theta oracle = merge_params(th0, delta);
    double worst = 0.0;
    for (int it = 0; it < 100; ++it) {
        for (Tensor* p : delta.param_ptrs())
            for (double& v : p->data) v += 0.05 * rng.gaussian();
        ema_update(st.slow, delta, mu);
        Theta merged = merge_params(th0, delta);
        for (size_t k = 0; k < oracle.w.size(); ++k)
            for (int i = 0; i < oracle.w[k].numel(); ++i)
                oracle.w[k].data[i] = mu * oracle.w[k].data[i] + (1.0 - mu) * merged.w[k].data[i];
        for (size_t k = 0; k < oracle.b.size(); ++k)
            for (int i = 0; i < oracle.b[k].numel(); ++i)
                oracle.b[k].data[i] = mu * oracle.b[k].data[i] + (1.0 - mu) * merged.b[k].data[i];
        Theta via = merge_dense(th0, st.slow);
        for (size_t k = 0; k < oracle.w.size(); ++k)
            worst = std::max(worst, max_abs_diff(via.w[k], oracle.w[k]));
        for (size_t k = 0; k < oracle.b.size(); ++k)
            worst = std::max(worst, max_abs_diff(via.b[k], oracle.b[k]));
    }
    double sec = t.seconds();
    bool pass = worst <= 1e-10 && sec < 1.0;
    report(2, pass, "adapter ema identity",
           "base-plus-averaged-delta vs full-parameter average over 100 updates, max diff " +
               fmt(worst, 3) + ", " + fmt(sec, 3) + " s");
}

// ---- check 3: formula suite ------------------------------------------------

struct SubChecks {
    bool ok = true;
    std::string first_bad;
    int count = 0;

    void req(bool c, const std::string& what) {
        ++count;
        if (ok && !c) {
            ok = false;
            first_bad = what;
        }
    }
};

void check_formulas() {
    Timer t;
    SubChecks s;
    Rng rng(31);

    Tensor x0 = testhelp::gaussian_batch(5, 2, rng);
    Tensor z = testhelp::gaussian_batch(5, 2, rng);

    // Path endpoints and regression target.
    Tensor at0 = interpolate(x0, z, 0.0);
    Tensor at1 = interpolate(x0, z, 1.0);
    s.req(max_abs_diff(at0, x0) == 0.0, "path start is the data point");
    s.req(max_abs_diff(at1, z) == 0.0, "path end is the noise point");
    PathSample ps = PathSample::make(x0, z, 0.3, {});
    bool vt = true;
    for (int i = 0; i < x0.numel(); ++i)
        vt = vt && ps.v_target.data[i] == z.data[i] - x0.data[i];
    s.req(vt, "regression target is noise minus data");

    // Constant-field sampling telescopes to one exact step on any grid.
    Theta cnet = testhelp::constant_field_net(0.8, -1.7);
    Tensor c = Tensor::zeros({5, 2});
    for (int i = 0; i < 5; ++i) {
        c.at(i, 0) = 0.8;
        c.at(i, 1) = -1.7;
    }
    for (int n : {1, 4, 7}) {
        Tensor end = euler_sample(cnet, make_grid(n), z, {}, 0.0).back();
        double err = 0.0;
        for (int i = 0; i < end.numel(); ++i)
            err = std::max(err, std::abs(end.data[i] - (z.data[i] - c.data[i])));
        s.req(err <= 1e-12, "constant field telescoping, " + std::to_string(n) + " steps");
    }
    {
        Tensor end = euler_sample(cnet, shift_grid(make_grid(5), 3.0), z, {}, 0.0).back();
        double err = 0.0;
        for (int i = 0; i < end.numel(); ++i)
            err = std::max(err, std::abs(end.data[i] - (z.data[i] - c.data[i])));
        s.req(err <= 1e-12, "constant field telescoping on a shifted grid");
    }

    // Step-halving target is the plain mean of its two evaluations.
    {
        NetConfig nc;
        nc.input_dim = 2;
        nc.hidden_dim = 8;
        nc.num_hidden_layers = 1;
        nc.time_embed_dim = 4;
        nc.step_embed_dim = 4;
        Rng srng(5);
        Theta th = Theta::init(nc, srng);
        Tensor x = testhelp::gaussian_batch(4, 2, srng);
        double tt = 0.7, d = 0.25;
        Tensor target = sc_target(th, x, tt, d, {});
        Tensor v1 = eval_velocity(th, x, tt, {}, &d);
        Tensor xn = euler_step(x, tt, tt - d, v1);
        Tensor v2 = eval_velocity(th, xn, std::max(0.0, tt - d), {}, &d);
        double err = 0.0;
        for (int i = 0; i < target.numel(); ++i)
            err = std::max(err, std::abs(target.data[i] - 0.5 * (v1.data[i] + v2.data[i])));
        s.req(err <= 1e-14, "halved-step target equals the two-point mean");
    }

    // Two-segment blend weights are the segment widths.
    {
        Theta pa = testhelp::constant_field_net(1.0, 0.0);
        Theta pb = testhelp::constant_field_net(0.0, 1.0);
        TripleTimes tr;
        tr.t1 = 0.9;
        tr.t2 = 0.8;
        tr.t3 = 0.5;
        tr.skip = 1;
        Tensor x = testhelp::gaussian_batch(3, 2, rng);
        Tensor target = scfm_target(pa, pb, x, tr, {}, 0.0);
        double err = 0.0;
        for (int i = 0; i < target.rows(); ++i) {
            err = std::max(err, std::abs(target.at(i, 0) - 0.25));
            err = std::max(err, std::abs(target.at(i, 1) - 0.75));
        }
        s.req(err <= 1e-12, "segment-width blend gives (0.25, 0.75)");
    }

    // Zero guidance reproduces the conditional field bit for bit.
    {
        NetConfig nc;
        nc.input_dim = 2;
        nc.hidden_dim = 8;
        nc.num_hidden_layers = 1;
        nc.time_embed_dim = 4;
        nc.class_count = 3;
        Rng crng(9);
        Theta th = Theta::init(nc, crng);
        Tensor x = testhelp::gaussian_batch(4, 2, crng);
        std::vector<int> labels{0, 1, 2, 1};
        Tensor guided = cfg_velocity(th, x, 0.4, labels, 0.0);
        Tensor plain = eval_velocity(th, x, 0.4, labels, nullptr);
        s.req(max_abs_diff(guided, plain) == 0.0, "zero guidance is the conditional field");
    }

    // Time warp: exact endpoints and the s=3 midpoint.
    for (double sh : {1.5, 3.0, 7.0}) {
        s.req(shift_time(0.0, sh) == 0.0, "warp fixes t=0");
        s.req(shift_time(1.0, sh) == 1.0, "warp fixes t=1");
    }
    s.req(shift_time(0.5, 3.0) == 0.75, "warp midpoint at strength 3");

    double sec = t.seconds();
    bool pass = s.ok && sec < 1.0;
    report(3, pass, "formula suite",
           pass ? std::to_string(s.count) + " identities exact, " + fmt(sec, 3) + " s"
                : "failed: " + s.first_bad);
}

// ---- checks 4-10: reference-scale training ---------------------------------

struct SeedTrace {
    uint64_t seed = 0;
    double vanilla_target = 0.0;  // 4-step fidelity of the plain schedule at 2000
    int reach_iter = -1;          // first fast-slow iteration at or below it
    double fs_final = 0.0;        // fast-slow 4-step fidelity at 10000
    double cyc_final = 0.0;       // cyclic 4-step fidelity at 10000
};

// Raw-adapter merge: the optimization trajectory the schedule comparisons
// probe. The shipped student is the slow-EMA merge below.
Theta distill_merged(const Theta& theta0, const LabeledPoints& data, const DistillConfig& cfg,
                     const DistillHook& hook = DistillHook()) {
    DistillResult r = run_distill(theta0, data, cfg, hook);
    return merge_params(theta0, r.delta);
}

Theta distill_student(const Theta& theta0, const LabeledPoints& data, const DistillConfig& cfg) {
    DistillResult r = run_distill(theta0, data, cfg);
    return merge_dense(theta0, r.state.slow);
}

void run_reference_checks() {
    ExperimentConfig cfg = reference_config();

    // Teacher.
    Timer t4;
    note("training reference teacher (" + std::to_string(cfg.teacher.iters) + " iterations)");
    PreparedData data = prepare_data(cfg.data);
    TeacherRunResult teacher = run_teacher_pipeline(cfg, data);
    Tensor z;
    std::vector<int> labels;
    eval_noise_and_labels(cfg.eval.count, teacher.theta.cfg.class_count, cfg.seed, z, labels);
    TimeGrid tg = shift_grid(make_grid(cfg.eval.teacher_steps), cfg.eval.shift);
    Tensor samples =
        denormalize(euler_sample(teacher.theta, tg, z, labels, cfg.eval.w).back(), data.norm);
    LabeledPoints held = heldout_data(cfg.data, cfg.eval.heldout);
    double sw = sliced_wasserstein(samples, held.x, cfg.eval.n_proj, cfg.seed);
    double sec4 = t4.seconds();
    {
        bool pass = sw <= kTeacherSwBaseline * 1.2 && sec4 <= 900.0;
        report(4, pass, "teacher quality",
               "heldout sliced W " + fmt(sw) + " (recorded baseline " + fmt(kTeacherSwBaseline) +
                   ", limit " + fmt(kTeacherSwBaseline * 1.2) + "), " + fmt(sec4, 3) + " s");
    }

    // Shared evaluation context for the seed-42 comparisons.
    note("preparing evaluation context");
    EvalContext ctx = EvalContext::make(teacher.theta, data.norm, data.normalized, cfg.eval,
                                        cfg.seed, cfg.distill.grid_n);
    double base4 = ctx.fidelity(teacher.theta, data.norm, 4);
    double base8 = ctx.fidelity(teacher.theta, data.norm, 8);

    // Reference distillation run; the shipped student is the slow-EMA merge.
    Timer t5;
    note("distilling reference schedule (" + std::to_string(cfg.distill.iters) + " iterations)");
    Theta student = distill_student(teacher.theta, data.normalized, cfg.distill);
    double stud4 = ctx.fidelity(student, data.norm, 4);
    double stud8 = ctx.fidelity(student, data.norm, 8);
    double sec5 = t5.seconds();
    {
        double gain4 = (base4 - stud4) / base4;
        double gain8 = (base8 - stud8) / base8;
        bool pass = gain4 >= 0.30 && gain8 >= 0.20 && sec5 <= 1800.0;
        report(5, pass, "distillation gain",
               "4-step " + fmt(base4) + " -> " + fmt(stud4) + " (" + fmt(100 * gain4, 3) +
                   "% vs >=30%), 8-step " + fmt(base8) + " -> " + fmt(stud8) + " (" +
                   fmt(100 * gain8, 3) + "% vs >=20%), " + fmt(sec5, 3) + " s");
    }

    // Straightening and self-consistency on the same run.
    {
        double st_teacher = ctx.straightness_at(teacher.theta, 4);
        double st_student = ctx.straightness_at(student, 4);
        double res0 = ctx.residual_of(teacher.theta);
        double res1 = ctx.residual_of(student);
        bool pass = st_student < st_teacher && res1 <= 0.5 * res0;
        report(6, pass, "straightening",
               "4-step straightness " + fmt(st_teacher) + " -> " + fmt(st_student) +
                   ", consistency residual " + fmt(res0) + " -> " + fmt(res1) + " (need <=" +
                   fmt(0.5 * res0) + ")");
    }

    // Schedule comparisons across three seeds.
    std::vector<SeedTrace> traces;
    for (uint64_t seed : {uint64_t{42}, uint64_t{43}, uint64_t{44}}) {
        SeedTrace tr;
        tr.seed = seed;
        note("schedule comparison, seed " + std::to_string(seed));
        EvalContext sctx = EvalContext::make(teacher.theta, data.norm, data.normalized, cfg.eval,
                                             seed, cfg.distill.grid_n);

        DistillConfig van = cfg.distill;
        van.variant = Variant::Vanilla;
        van.seed = seed;
        van.iters = 2000;
        Theta v2000 = distill_merged(teacher.theta, data.normalized, van);
        tr.vanilla_target = sctx.fidelity(v2000, data.norm, 4);

        DistillConfig fsc = cfg.distill;
        fsc.variant = Variant::FastSlow;
        fsc.seed = seed;
        fsc.iters = 10000;
        DistillHook fs_hook = [&](int iter, double, const LoraDelta& delta, const EmaState&) {
            bool probe = (iter % 100 == 0 && iter <= 1600) || iter == fsc.iters;
            if (!probe) return;
            double fid = sctx.fidelity(merge_params(teacher.theta, delta), data.norm, 4);
            if (iter <= 1600 && tr.reach_iter < 0 && fid <= tr.vanilla_target) tr.reach_iter = iter;
            if (iter == fsc.iters) tr.fs_final = fid;
        };
        run_distill(teacher.theta, data.normalized, fsc, fs_hook);

        DistillConfig cyc = cfg.distill;
        cyc.variant = Variant::Cyclic;
        cyc.restart_period = 500;
        cyc.seed = seed;
        cyc.iters = 10000;
        Theta cyc_student = distill_merged(teacher.theta, data.normalized, cyc);
        tr.cyc_final = sctx.fidelity(cyc_student, data.norm, 4);
        traces.push_back(tr);
    }
    {
        int within_claim = 0, within_pass = 0;
        std::string detail;
        for (const SeedTrace& tr : traces) {
            if (tr.reach_iter >= 0 && tr.reach_iter <= 1200) ++within_claim;
            if (tr.reach_iter >= 0 && tr.reach_iter <= 1600) ++within_pass;
            detail += "seed " + std::to_string(tr.seed) + " target " + fmt(tr.vanilla_target) +
                      " reached at " +
                      (tr.reach_iter < 0 ? std::string("never") : std::to_string(tr.reach_iter)) +
                      "; ";
        }
        bool pass = within_pass >= 2;
        report(7, pass, "fast-slow speedup",
               detail + std::to_string(within_claim) + "/3 within 1200, " +
                   std::to_string(within_pass) + "/3 within the 1600 allowance");
    }
    {
        int no_better = 0;
        std::string detail;
        for (const SeedTrace& tr : traces) {
            if (tr.cyc_final >= tr.fs_final) ++no_better;
            detail += "seed " + std::to_string(tr.seed) + " cyclic " + fmt(tr.cyc_final) +
                      " vs fast-slow " + fmt(tr.fs_final) + "; ";
        }
        bool pass = no_better >= 2;
        report(8, pass, "cyclic restarts",
               detail + std::to_string(no_better) + "/3 seeds show no late-stage advantage");
    }

    // Few-shot distillation on the frozen 10-point subset.
    Timer t9;
    note("few-shot distillation");
    DistillConfig few = cfg.distill;
    few.few_shot = 10;
    Theta few_student = distill_student(teacher.theta, data.normalized, few);
    double few8 = ctx.fidelity(few_student, data.norm, 8);
    double sec9 = t9.seconds();
    {
        bool pass = few8 <= 2.0 * stud8 && sec9 <= 1800.0;
        report(9, pass, "few-shot",
               "10-point 8-step fidelity " + fmt(few8) + " vs full-data " + fmt(stud8) +
                   " (limit " + fmt(2.0 * stud8) + "), " + fmt(sec9, 3) + " s");
    }

    // Step-conditioned baseline against the teacher at one step.
    note("training step-conditioned baseline (" + std::to_string(cfg.shortcut.iters) +
         " iterations)");
    NetConfig sc_net = cfg.net;
    sc_net.step_embed_dim = cfg.shortcut_step_embed;
    sc_net.validate();
    ShortcutResult sc = train_shortcut(data.normalized, sc_net, cfg.shortcut);
    {
        TimeGrid one = make_grid(1);
        Tensor teacher_one =
            denormalize(euler_sample(teacher.theta, one, z, labels, cfg.eval.w).back(), data.norm);
        Tensor sc_one =
            denormalize(euler_sample(sc.theta_ema, one, z, labels, cfg.eval.w).back(), data.norm);
        double sw_teacher = sliced_wasserstein(teacher_one, held.x, cfg.eval.n_proj, cfg.seed);
        double sw_sc = sliced_wasserstein(sc_one, held.x, cfg.eval.n_proj, cfg.seed);
        bool pass = sw_sc < sw_teacher;
        report(10, pass, "one-step baseline",
               "step-conditioned 1-step sliced W " + fmt(sw_sc) + " vs teacher 1-step " +
                   fmt(sw_teacher));
    }
}

// ---- check 11: reproducibility ---------------------------------------------

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error("acceptance: cannot read " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

// Metrics rows end in a wall-clock column; equality is required of everything
// before it.
std::string drop_timing_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!first) {
            size_t comma = line.rfind(',');
            if (comma != std::string::npos) line = line.substr(0, comma);
        }
        first = false;
        out << line << "\n";
    }
    return out.str();
}

void check_reproducibility() {
    const std::string base = "acceptance_repro_tmp";
    fs::remove_all(base);
    ExperimentConfig tiny;
    tiny.seed = 9;
    tiny.out_dir = base;
    tiny.data.kind = DataKind::Moons;
    tiny.data.size = 256;
    tiny.data.sigma = 0.05;
    tiny.net.hidden_dim = 16;
    tiny.net.num_hidden_layers = 1;
    tiny.net.time_embed_dim = 4;
    tiny.teacher.iters = 40;
    tiny.teacher.batch = 32;
    tiny.distill.iters = 4;
    tiny.distill.batch_n = 8;
    tiny.distill.grid_n = 16;
    tiny.distill.lora_rank = 2;
    tiny.shortcut.iters = 6;
    tiny.shortcut.batch = 16;
    tiny.shortcut.grid_n = 16;
    tiny.shortcut_step_embed = 4;
    tiny.eval.steps = {2};
    tiny.eval.count = 32;
    tiny.eval.n_proj = 8;
    tiny.eval.teacher_steps = 8;
    tiny.eval.eval_every = 2;
    tiny.eval.residual_trials = 8;
    tiny.eval.heldout = 128;
    tiny.resolve();

    std::ostringstream sink;
    std::vector<std::string> mismatches;
    auto compare = [&](const std::string& what, const std::string& a, const std::string& b) {
        if (a != b) mismatches.push_back(what);
    };

    try {
        cmd_train_teacher(tiny, sink);
        std::string ckpt1 = slurp(base + "/teacher.ckpt");
        std::string loss1 = slurp(base + "/teacher_loss.csv");
        std::string held1 = slurp(base + "/teacher_heldout.csv");
        std::string conf1 = slurp(base + "/config.toml");
        cmd_train_teacher(tiny, sink);
        compare("teacher checkpoint", ckpt1, slurp(base + "/teacher.ckpt"));
        compare("teacher loss csv", loss1, slurp(base + "/teacher_loss.csv"));
        compare("teacher heldout csv", held1, slurp(base + "/teacher_heldout.csv"));
        compare("resolved config", conf1, slurp(base + "/config.toml"));

        cmd_distill(tiny, base + "/teacher.ckpt", sink);
        std::string stud1 = slurp(base + "/student-vanilla.ckpt");
        std::string met1 = drop_timing_column(slurp(base + "/metrics-vanilla.csv"));
        cmd_distill(tiny, base + "/teacher.ckpt", sink);
        compare("student checkpoint", stud1, slurp(base + "/student-vanilla.ckpt"));
        compare("metrics csv", met1, drop_timing_column(slurp(base + "/metrics-vanilla.csv")));

        cmd_train_shortcut(tiny, sink);
        std::string sc1 = slurp(base + "/shortcut.ckpt");
        std::string scl1 = slurp(base + "/shortcut_loss.csv");
        cmd_train_shortcut(tiny, sink);
        compare("baseline checkpoint", sc1, slurp(base + "/shortcut.ckpt"));
        compare("baseline loss csv", scl1, slurp(base + "/shortcut_loss.csv"));

        cmd_eval(base + "/teacher.ckpt", base + "/student-vanilla.ckpt", {2, 4}, tiny.eval, 3,
                 base + "/eval1.csv", sink);
        cmd_eval(base + "/teacher.ckpt", base + "/student-vanilla.ckpt", {2, 4}, tiny.eval, 3,
                 base + "/eval2.csv", sink);
        compare("eval csv", slurp(base + "/eval1.csv"), slurp(base + "/eval2.csv"));

        cmd_sample(base + "/teacher.ckpt", 2, 64, 5, 1.0, 3.0, base + "/s1.csv", sink);
        cmd_sample(base + "/teacher.ckpt", 2, 64, 5, 1.0, 3.0, base + "/s2.csv", sink);
        compare("sample csv", slurp(base + "/s1.csv"), slurp(base + "/s2.csv"));
    } catch (const std::exception& e) {
        mismatches.push_back(std::string("exception: ") + e.what());
    }

    fs::remove_all(base);
    bool pass = mismatches.empty();
    std::string detail = "checkpoints and csvs byte-identical across re-runs (metrics timing "
                         "column excluded)";
    if (!pass) {
        detail = "mismatch in";
        for (const auto& m : mismatches) detail += " [" + m + "]";
    }
    report(11, pass, "reproducibility", detail);
}

}  // namespace

int main() {
    Timer total;
    std::cout << "acceptance run: 11 checks" << std::endl;
    try {
        check_gradients();
        check_ema_identity();
        check_formulas();
        run_reference_checks();
        check_reproducibility();
    } catch (const std::exception& e) {
        std::cout << "FATAL " << e.what() << std::endl;
        return 99;
    }
    std::cout << (g_failed == 0 ? "all 11 checks passed" : std::to_string(g_failed) + " checks failed")
              << " in " << fmt(total.seconds(), 4) << " s" << std::endl;
    return g_failed;
}
