#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace scfm {

double wasserstein_1d(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ConfigError("empty sample set");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    size_t na = a.size(), nb = b.size();
    if (na == nb) {
        double acc = 0.0;
        for (size_t i = 0; i < na; ++i) {
            double d = a[i] - b[i];
            acc += d * d;
        }
        return std::sqrt(acc / static_cast<double>(na));
    }
    // piecewise-constant inverse CDFs; integrate the squared gap over quantiles
    double acc = 0.0;
    size_t ia = 0, ib = 0;
    double q = 0.0;
    while (ia < na && ib < nb) {
        double qa = static_cast<double>(ia + 1) / na;
        double qb = static_cast<double>(ib + 1) / nb;
        double q_next = std::min(qa, qb);
        double d = a[ia] - b[ib];
        acc += (q_next - q) * d * d;
        q = q_next;
        if (qa <= q_next + 1e-15) ++ia;
        if (qb <= q_next + 1e-15) ++ib;
    }
    return std::sqrt(acc);
}

double sliced_wasserstein(const Tensor& a, const Tensor& b, int n_proj, uint64_t seed) {
    if (a.rows() == 0 || b.rows() == 0) throw ConfigError("empty point set");
    if (a.cols() != 2 || b.cols() != 2) throw ShapeError("point sets must be [n,2]");
    if (n_proj <= 0) throw ConfigError("need at least one projection");
    Rng rng = Rng::substream(seed, "projections");
    std::vector<double> pa(a.rows()), pb(b.rows());
    double acc = 0.0;
    for (int p = 0; p < n_proj; ++p) {
        double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double ux = std::cos(phi), uy = std::sin(phi);
        for (int i = 0; i < a.rows(); ++i) pa[i] = ux * a.at(i, 0) + uy * a.at(i, 1);
        for (int i = 0; i < b.rows(); ++i) pb[i] = ux * b.at(i, 0) + uy * b.at(i, 1);
        acc += wasserstein_1d(pa, pb);
    }
    return acc / n_proj;
}

StraightnessResult straightness(const std::vector<Tensor>& trajectory) {
    if (trajectory.size() < 2) throw ConfigError("trajectory needs at least one step");
    int b = trajectory.front().rows();
    StraightnessResult r;
    double acc = 0.0;
    int used = 0;
    for (int j = 0; j < b; ++j) {
        double path = 0.0;
        for (size_t i = 0; i + 1 < trajectory.size(); ++i) {
            double dx = trajectory[i + 1].at(j, 0) - trajectory[i].at(j, 0);
            double dy = trajectory[i + 1].at(j, 1) - trajectory[i].at(j, 1);
            path += std::sqrt(dx * dx + dy * dy);
        }
        double cx = trajectory.back().at(j, 0) - trajectory.front().at(j, 0);
        double cy = trajectory.back().at(j, 1) - trajectory.front().at(j, 1);
        double chord = std::sqrt(cx * cx + cy * cy);
        if (chord < 1e-12) {
            ++r.degenerate;
            continue;
        }
        acc += path / chord - 1.0;
        ++used;
    }
    r.value = used > 0 ? acc / used : 0.0;
    return r;
}

double consistency_residual(const Theta& model, const LabeledPoints& batch, const TimeGrid& grid,
                            int trials, Rng& rng, double w) {
    if (trials < 1) throw ConfigError("need at least one trial");
    if (batch.size() == 0) throw ConfigError("empty batch");
    bool guided = model.cfg.conditional() && w > 0.0;
    std::vector<int> skips = self_skip_set(grid.n);
    double acc = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        int j = rng.uniform_int(batch.size());
        int skip = skips[rng.uniform_int(static_cast<int>(skips.size()))];
        TripleTimes triple = sample_triple(grid, skip, rng);
        Tensor x0 = Tensor::row2(batch.x.at(j, 0), batch.x.at(j, 1));
        Tensor z = Tensor::row2(rng.gaussian(), rng.gaussian());
        Tensor x_t1 = interpolate(x0, z, triple.t1);
        std::vector<int> li =
            model.cfg.conditional() ? std::vector<int>{batch.labels[j]} : std::vector<int>();
        Tensor v = guided ? cfg_velocity(model, x_t1, triple.t1, li, w)
                          : eval_velocity(model, x_t1, triple.t1, li);
        Tensor target = scfm_target(model, model, x_t1, triple, li, w);
        acc += mse_value(v, target);
    }
    double out = acc / trials;
    if (!std::isfinite(out)) throw DivergenceError("non-finite consistency residual");
    return out;
}

void eval_noise_and_labels(int count, int class_count, uint64_t seed, Tensor& z,
                           std::vector<int>& labels) {
    Rng rng = Rng::substream(seed, "eval");
    z = Tensor::zeros({count, 2});
    labels.assign(count, 0);
    for (int i = 0; i < count; ++i) {
        z.at(i, 0) = rng.gaussian();
        z.at(i, 1) = rng.gaussian();
        if (class_count > 0) labels[i] = rng.uniform_int(class_count);
    }
}

double teacher_student_fidelity(const Theta& teacher, const Theta& student, const Normalization& norm,
                                const FidelityArgs& args) {
    if (args.count <= 0) throw ConfigError("empty seed list");
    Tensor z;
    std::vector<int> labels;
    eval_noise_and_labels(args.count, teacher.cfg.class_count, args.seed, z, labels);
    std::vector<int> use = teacher.cfg.conditional() ? labels : std::vector<int>();

    TimeGrid tg = shift_grid(make_grid(args.steps_teacher), args.shift);
    TimeGrid sg = shift_grid(make_grid(args.steps_student), args.shift);
    Tensor xt = denormalize(euler_sample(teacher, tg, z, use, args.w).back(), norm);
    Tensor xs = denormalize(euler_sample(student, sg, z, use, args.w).back(), norm);
    return sliced_wasserstein(xt, xs, args.n_proj, args.seed);
}

}  // namespace scfm
