#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "config.hpp"
#include "runner.hpp"

namespace {

scfm::ExperimentConfig load_cfg(const std::string& path) {
    scfm::ExperimentConfig cfg = scfm::parse_config(path);
    if (const char* s = std::getenv("SCFM_SEED")) {
        try {
            size_t pos = 0;
            cfg.seed = std::stoull(s, &pos);
            if (pos != std::string(s).size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw scfm::ConfigError("SCFM_SEED must be an unsigned integer");
        }
        cfg.resolve();
    }
    return cfg;
}

std::vector<int> parse_step_list(const std::string& text) {
    std::vector<int> out;
    std::string tok;
    std::istringstream in(text);
    while (std::getline(in, tok, ',')) {
        try {
            size_t pos = 0;
            int v = std::stoi(tok, &pos);
            if (pos != tok.size() || v < 1) throw std::invalid_argument("bad entry");
            out.push_back(v);
        } catch (const std::exception&) {
            throw scfm::ConfigError("--steps entries must be positive integers: '" + tok + "'");
        }
    }
    if (out.empty()) throw scfm::ConfigError("--steps list is empty");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flow-matching distillation laboratory on 2-D toy densities"};
    app.require_subcommand(1);

    std::string config_path, teacher_path, student_path, ckpt_path, out_path;
    std::string variant_flag, steps_flag = "3,4,8";
    int few_shot = -1;
    int steps = 4, count = 2000, probes = 100;
    uint64_t seed = 42;
    double w = 2.0, shift = 3.0, tol = 1e-4;

    auto* t = app.add_subcommand("train-teacher", "Train the velocity-matching teacher");
    t->add_option("--config", config_path, "experiment config file")->required();

    auto* d = app.add_subcommand("distill", "Distill a few-step student from a teacher checkpoint");
    d->add_option("--config", config_path, "experiment config file")->required();
    d->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
    d->add_option("--variant", variant_flag, "vanilla|vanilla-mix|cyclic|fast-slow");
    d->add_option("--few-shot", few_shot, "train on this many frozen points");

    auto* sc = app.add_subcommand("train-shortcut", "Train the step-conditioned baseline");
    sc->add_option("--config", config_path, "experiment config file")->required();

    auto* e = app.add_subcommand("eval", "Score a student against a teacher");
    e->add_option("--teacher", teacher_path, "teacher checkpoint")->required();
    e->add_option("--student", student_path, "student checkpoint")->required();
    e->add_option("--steps", steps_flag, "comma-separated student step counts");
    e->add_option("--seed", seed, "evaluation seed");
    e->add_option("--count", count, "points per evaluation");
    e->add_option("--w", w, "guidance scale");
    e->add_option("--shift", shift, "sampler time shift");
    e->add_option("--out", out_path, "CSV output path");

    auto* s = app.add_subcommand("sample", "Draw samples from any checkpoint");
    s->add_option("--ckpt", ckpt_path, "checkpoint")->required();
    s->add_option("--steps", steps, "sampler steps");
    s->add_option("--count", count, "sample count");
    s->add_option("--seed", seed, "sampling seed");
    s->add_option("--w", w, "guidance scale");
    s->add_option("--shift", shift, "sampler time shift");
    s->add_option("--out", out_path, "output path (.csv or .svg)")->required();

    auto* p = app.add_subcommand("plot", "Render overlays and metric curves for a run directory");
    p->add_option("--config", config_path, "experiment config file")->required();

    auto* g = app.add_subcommand("grad-check", "Finite-difference check of every gradient path");
    g->add_option("--probes", probes, "number of random probes");
    g->add_option("--seed", seed, "probe seed");
    g->add_option("--tol", tol, "max relative error");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (t->parsed()) {
            scfm::cmd_train_teacher(load_cfg(config_path), std::cout);
        } else if (d->parsed()) {
            scfm::ExperimentConfig cfg = load_cfg(config_path);
            if (!variant_flag.empty()) cfg.distill.variant = scfm::parse_variant(variant_flag);
            if (few_shot >= 0) cfg.distill.few_shot = few_shot;
            cfg.resolve();
            scfm::cmd_distill(cfg, teacher_path, std::cout);
        } else if (sc->parsed()) {
            scfm::cmd_train_shortcut(load_cfg(config_path), std::cout);
        } else if (e->parsed()) {
            scfm::EvalConfig eval;
            eval.count = count;
            eval.w = w;
            eval.shift = shift;
            scfm::cmd_eval(teacher_path, student_path, parse_step_list(steps_flag), eval, seed,
                           out_path, std::cout);
        } else if (s->parsed()) {
            scfm::cmd_sample(ckpt_path, steps, count, seed, w, shift, out_path, std::cout);
        } else if (p->parsed()) {
            scfm::cmd_plot(load_cfg(config_path), std::cout);
        } else if (g->parsed()) {
            scfm::GradProbeReport rep = scfm::run_gradient_probes(probes, seed, tol);
            std::cout << "probes: " << rep.probes << "\n";
            std::cout << "worst relative error: " << rep.worst << " (" << rep.worst_case << ")\n";
            std::cout << (rep.failures == 0 ? "PASS" : "FAIL") << " at tolerance " << tol << "\n";
            if (rep.failures > 0) return 1;
        }
    } catch (const scfm::ConfigError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const scfm::DivergenceError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 3;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 0;
}
