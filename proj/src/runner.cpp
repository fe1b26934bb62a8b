#include "runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "svg.hpp"
#include "tape.hpp"

namespace scfm {

namespace {

namespace fs = std::filesystem;

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string num17(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string num_fixed(double v, int places) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(places) << v;
    return os.str();
}

std::vector<int> conditional_labels(const Theta& th, const std::vector<int>& labels) {
    return th.cfg.conditional() ? labels : std::vector<int>();
}

}  // namespace

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw ConfigError("cannot create directory " + path + ": " + ec.message());
}

void write_text_file(const std::string& path, const std::string& body) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << body;
    if (!f) throw ConfigError("failed writing " + path);
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

PreparedData prepare_data(const DatasetSpec& spec) {
    Rng rng = Rng::substream(spec.seed, "dataset");
    PreparedData p;
    p.raw = sample_dataset(spec, spec.size, rng);
    p.norm = compute_normalization(p.raw);
    p.normalized = LabeledPoints{normalize(p.raw.x, p.norm), p.raw.labels, p.raw.class_count};
    return p;
}

LabeledPoints heldout_data(const DatasetSpec& spec, int count) {
    Rng rng = Rng::substream(spec.seed, "heldout");
    return sample_dataset(spec, count, rng);
}

std::string metrics_header() {
    return "iteration,loss,residual,fid_sw_3,fid_sw_4,fid_sw_8,straightness_4,seconds";
}

std::string metrics_row_csv(const MetricsRow& r) {
    std::ostringstream os;
    os << r.iteration << "," << num17(r.loss) << "," << num17(r.residual) << "," << num17(r.fid3)
       << "," << num17(r.fid4) << "," << num17(r.fid8) << "," << num17(r.straightness4) << ","
       << num_fixed(r.seconds, 3);
    return os.str();
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    if (!std::getline(in, line) || line != metrics_header())
        throw FormatError("unexpected metrics header in " + path);
    std::vector<MetricsRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() != 8) throw FormatError("bad metrics row in " + path + ": " + line);
        MetricsRow r;
        r.iteration = static_cast<int>(vals[0]);
        r.loss = vals[1];
        r.residual = vals[2];
        r.fid3 = vals[3];
        r.fid4 = vals[4];
        r.fid8 = vals[5];
        r.straightness4 = vals[6];
        r.seconds = vals[7];
        rows.push_back(r);
    }
    return rows;
}

EvalContext EvalContext::make(const Theta& teacher, const Normalization& norm,
                              const LabeledPoints& normalized, const EvalConfig& eval,
                              uint64_t seed, int residual_grid_n) {
    EvalContext c;
    c.eval = eval;
    c.seed = seed;
    eval_noise_and_labels(eval.count, teacher.cfg.class_count, seed, c.z, c.labels);
    std::vector<int> use = conditional_labels(teacher, c.labels);
    TimeGrid tg = shift_grid(make_grid(eval.teacher_steps), eval.shift);
    c.teacher_out = denormalize(euler_sample(teacher, tg, c.z, use, eval.w).back(), norm);
    c.residual_batch = normalized;
    // Residual triples live on the same shifted grid the samplers integrate.
    c.residual_grid = shift_grid(make_grid(residual_grid_n), eval.shift);
    return c;
}

double EvalContext::fidelity(const Theta& student, const Normalization& norm, int steps) const {
    std::vector<int> use = conditional_labels(student, labels);
    TimeGrid g = shift_grid(make_grid(steps), eval.shift);
    Tensor out = denormalize(euler_sample(student, g, z, use, eval.w).back(), norm);
    return sliced_wasserstein(teacher_out, out, eval.n_proj, seed);
}

double EvalContext::straightness_at(const Theta& student, int steps) const {
    int m = std::min(256, z.rows());
    Tensor zs = Tensor::zeros({m, 2});
    for (int i = 0; i < m; ++i) {
        zs.at(i, 0) = z.at(i, 0);
        zs.at(i, 1) = z.at(i, 1);
    }
    std::vector<int> use;
    if (student.cfg.conditional()) use.assign(labels.begin(), labels.begin() + m);
    TimeGrid g = shift_grid(make_grid(steps), eval.shift);
    return straightness(euler_sample(student, g, zs, use, eval.w)).value;
}

double EvalContext::residual_of(const Theta& student) const {
    // Fresh stream per call: every checkpoint is probed on the same triples.
    // The residual probes the guided field, matching fidelity and straightness.
    Rng rng = Rng::substream(seed, "residual");
    return consistency_residual(student, residual_batch, residual_grid, eval.residual_trials, rng,
                                eval.w);
}

MetricsRow EvalContext::row(const Theta& student, const Normalization& norm, int iteration,
                            double loss, double seconds) const {
    MetricsRow r;
    r.iteration = iteration;
    r.loss = loss;
    r.residual = residual_of(student);
    r.fid3 = fidelity(student, norm, 3);
    r.fid4 = fidelity(student, norm, 4);
    r.fid8 = fidelity(student, norm, 8);
    r.straightness4 = straightness_at(student, 4);
    r.seconds = seconds;
    return r;
}

TeacherRunResult run_teacher_pipeline(const ExperimentConfig& cfg, const PreparedData& data) {
    TeacherResult t = train_teacher(data.normalized, cfg.net, cfg.teacher);
    return TeacherRunResult{std::move(t.theta), data.norm, std::move(t.losses)};
}

DistillRunResult run_distill_pipeline(const Theta& theta0, const PreparedData& data,
                                      const ExperimentConfig& cfg, std::ostream* stream) {
    EvalContext ectx = EvalContext::make(theta0, data.norm, data.normalized, cfg.eval, cfg.seed,
                                         cfg.distill.grid_n);
    auto start = std::chrono::steady_clock::now();
    DistillRunResult out;
    auto emit = [&](const MetricsRow& r) {
        out.rows.push_back(r);
        if (stream) {
            *stream << metrics_row_csv(r) << "\n";
            stream->flush();
        }
    };
    if (stream) *stream << metrics_header() << "\n";
    // The adapter starts at exact zero, so iteration 0 scores the teacher.
    emit(ectx.row(theta0, data.norm, 0, std::numeric_limits<double>::quiet_NaN(),
                  seconds_since(start)));

    double loss_sum = 0.0;
    int loss_n = 0;
    int last_iter = 0;
    DistillHook hook = [&](int iter, double loss, const LoraDelta&, const EmaState& state) {
        loss_sum += loss;
        ++loss_n;
        last_iter = iter;
        if (iter % cfg.eval.eval_every == 0 || iter == cfg.distill.iters) {
            // The shipped student is the slow-EMA merge; the raw adapters
            // jitter between iterations and only feed the optimizer.
            Theta student = merge_dense(theta0, state.slow);
            emit(ectx.row(student, data.norm, iter, loss_sum / loss_n, seconds_since(start)));
            loss_sum = 0.0;
            loss_n = 0;
        }
    };
    try {
        out.trained = run_distill(theta0, data.normalized, cfg.distill, hook);
    } catch (const DivergenceError& e) {
        throw DivergenceError(std::string(e.what()) + "; last finite iteration " +
                              std::to_string(last_iter));
    }
    return out;
}

std::string run_tag(const DistillConfig& cfg) {
    std::string tag = variant_name(cfg.variant);
    if (cfg.few_shot > 0) tag += "-few" + std::to_string(cfg.few_shot);
    return tag;
}

LoadedModel load_model(const std::string& path) {
    if (!fs::exists(path)) throw ConfigError("missing checkpoint " + path);
    switch (checkpoint_kind(path)) {
        case CkptKind::Teacher: {
            TeacherCkpt t = load_teacher(path);
            return LoadedModel{std::move(t.theta), t.norm, t.data, CkptKind::Teacher};
        }
        case CkptKind::Student: {
            StudentCkpt s = load_student(path);
            return LoadedModel{merge_dense(s.theta0, s.ema.slow), s.norm, s.data,
                               CkptKind::Student};
        }
        case CkptKind::Shortcut: {
            ShortcutCkpt s = load_shortcut(path);
            return LoadedModel{std::move(s.theta_ema), s.norm, s.data, CkptKind::Shortcut};
        }
    }
    throw FormatError("unreadable checkpoint " + path);
}

std::string cmd_train_teacher(const ExperimentConfig& cfg, std::ostream& console) {
    ensure_dir(cfg.out_dir);
    PreparedData data = prepare_data(cfg.data);
    console << "training teacher: " << data_kind_name(cfg.data.kind) << ", " << cfg.teacher.iters
            << " iterations, seed " << cfg.seed << "\n";
    TeacherRunResult t = run_teacher_pipeline(cfg, data);

    std::string ckpt = cfg.out_dir + "/teacher.ckpt";
    save_teacher(ckpt, t.theta, t.norm, cfg.data);
    std::ostringstream loss_csv;
    loss_csv << "iteration,loss\n";
    for (size_t i = 0; i < t.losses.size(); ++i)
        loss_csv << (i + 1) << "," << num17(t.losses[i]) << "\n";
    write_text_file(cfg.out_dir + "/teacher_loss.csv", loss_csv.str());
    write_text_file(cfg.out_dir + "/config.toml", serialize_config(cfg));

    Tensor z;
    std::vector<int> labels;
    eval_noise_and_labels(cfg.eval.count, t.theta.cfg.class_count, cfg.seed, z, labels);
    std::vector<int> use = conditional_labels(t.theta, labels);
    TimeGrid tg = shift_grid(make_grid(cfg.eval.teacher_steps), cfg.eval.shift);
    Tensor samples = denormalize(euler_sample(t.theta, tg, z, use, cfg.eval.w).back(), t.norm);
    LabeledPoints held = heldout_data(cfg.data, cfg.eval.heldout);
    double sw = sliced_wasserstein(samples, held.x, cfg.eval.n_proj, cfg.seed);
    write_text_file(cfg.out_dir + "/teacher_heldout.csv",
                    "metric,value\nheldout_sw," + num17(sw) + "\n");

    double tail = 0.0;
    int tail_n = std::min<int>(100, static_cast<int>(t.losses.size()));
    for (int i = 0; i < tail_n; ++i) tail += t.losses[t.losses.size() - 1 - i];
    if (tail_n > 0) tail /= tail_n;
    console << "final loss (last " << tail_n << " iters): " << tail << "\n";
    console << "heldout sliced Wasserstein at " << cfg.eval.teacher_steps << " steps: " << sw
            << "\n";
    console << "wrote " << ckpt << "\n";
    return ckpt;
}

std::string cmd_distill(const ExperimentConfig& cfg, const std::string& teacher_path,
                        std::ostream& console) {
    if (!fs::exists(teacher_path))
        throw ConfigError("missing teacher checkpoint " + teacher_path + "; run train-teacher first");
    TeacherCkpt teacher = load_teacher(teacher_path);
    ensure_dir(cfg.out_dir);

    // The teacher fixes the data recipe; its stored constants define the
    // coordinates the student trains in.
    PreparedData data;
    {
        Rng rng = Rng::substream(teacher.data.seed, "dataset");
        data.raw = sample_dataset(teacher.data, teacher.data.size, rng);
        data.norm = teacher.norm;
        data.normalized = LabeledPoints{normalize(data.raw.x, data.norm), data.raw.labels,
                                        data.raw.class_count};
    }

    std::string tag = run_tag(cfg.distill);
    console << "distilling " << tag << ": " << cfg.distill.iters << " iterations, seed " << cfg.seed
            << "\n";
    std::string metrics_path = cfg.out_dir + "/metrics-" + tag + ".csv";
    std::ofstream metrics(metrics_path, std::ios::binary);
    if (!metrics) throw ConfigError("cannot write " + metrics_path);

    DistillRunResult r = run_distill_pipeline(teacher.theta, data, cfg, &metrics);
    for (const auto& row : r.rows)
        console << "iter " << row.iteration << " loss " << row.loss << " fid4 " << row.fid4
                << " residual " << row.residual << "\n";

    std::string ckpt = cfg.out_dir + "/student-" + tag + ".ckpt";
    save_student(ckpt, teacher.theta, r.trained.delta, r.trained.state, r.trained.opt, data.norm,
                 teacher.data);
    write_text_file(cfg.out_dir + "/config.toml", serialize_config(cfg));
    console << "wrote " << ckpt << "\n";
    console << "wrote " << metrics_path << "\n";
    return ckpt;
}

std::string cmd_train_shortcut(const ExperimentConfig& cfg, std::ostream& console) {
    ensure_dir(cfg.out_dir);
    PreparedData data = prepare_data(cfg.data);
    NetConfig net = cfg.net;
    net.step_embed_dim = cfg.shortcut_step_embed;
    net.validate();
    console << "training step-conditioned baseline: " << cfg.shortcut.iters << " iterations, seed "
            << cfg.seed << "\n";
    ShortcutResult r = train_shortcut(data.normalized, net, cfg.shortcut);

    std::string ckpt = cfg.out_dir + "/shortcut.ckpt";
    save_shortcut(ckpt, r.theta, r.theta_ema, data.norm, cfg.data);
    std::ostringstream loss_csv;
    loss_csv << "iteration,loss\n";
    for (size_t i = 0; i < r.losses.size(); ++i)
        loss_csv << (i + 1) << "," << num17(r.losses[i]) << "\n";
    write_text_file(cfg.out_dir + "/shortcut_loss.csv", loss_csv.str());
    write_text_file(cfg.out_dir + "/config.toml", serialize_config(cfg));

    Tensor z;
    std::vector<int> labels;
    eval_noise_and_labels(cfg.eval.count, net.class_count, cfg.seed, z, labels);
    std::vector<int> use = conditional_labels(r.theta_ema, labels);
    Tensor one = denormalize(euler_sample(r.theta_ema, make_grid(1), z, use, cfg.eval.w).back(),
                             data.norm);
    LabeledPoints held = heldout_data(cfg.data, cfg.eval.heldout);
    double sw = sliced_wasserstein(one, held.x, cfg.eval.n_proj, cfg.seed);
    console << "1-step heldout sliced Wasserstein: " << sw << "\n";
    console << "wrote " << ckpt << "\n";
    return ckpt;
}

void cmd_eval(const std::string& teacher_path, const std::string& student_path,
              const std::vector<int>& steps, const EvalConfig& eval, uint64_t seed,
              const std::string& out_path, std::ostream& console) {
    LoadedModel teacher = load_model(teacher_path);
    LoadedModel student = load_model(student_path);

    PreparedData data;
    {
        Rng rng = Rng::substream(teacher.data.seed, "dataset");
        data.raw = sample_dataset(teacher.data, teacher.data.size, rng);
        data.norm = teacher.norm;
        data.normalized = LabeledPoints{normalize(data.raw.x, data.norm), data.raw.labels,
                                        data.raw.class_count};
    }
    EvalContext ectx = EvalContext::make(teacher.theta, teacher.norm, data.normalized, eval, seed, 128);

    std::vector<int> table = steps;
    if (std::find(table.begin(), table.end(), eval.teacher_steps) == table.end())
        table.push_back(eval.teacher_steps);

    std::ostringstream csv;
    csv << "metric,steps,value\n";
    console << "steps  fid_sw                 straightness\n";
    for (int k : table) {
        double fid = ectx.fidelity(student.theta, student.norm, k);
        double st = ectx.straightness_at(student.theta, k);
        csv << "fid_sw," << k << "," << num17(fid) << "\n";
        csv << "straightness," << k << "," << num17(st) << "\n";
        console << std::left << std::setw(6) << k << " " << std::setw(22) << num17(fid) << " "
                << num17(st) << "\n";
    }
    double res = ectx.residual_of(student.theta);
    csv << "residual,0," << num17(res) << "\n";
    console << "residual " << num17(res) << "\n";
    if (!out_path.empty()) {
        write_text_file(out_path, csv.str());
        console << "wrote " << out_path << "\n";
    }
}

void cmd_sample(const std::string& ckpt_path, int steps, int count, uint64_t seed, double w,
                double shift, const std::string& out_path, std::ostream& console) {
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (count < 1) throw ConfigError("count must be >= 1");
    LoadedModel model = load_model(ckpt_path);
    Tensor z;
    std::vector<int> labels;
    eval_noise_and_labels(count, model.theta.cfg.class_count, seed, z, labels);
    std::vector<int> use = conditional_labels(model.theta, labels);
    TimeGrid g = shift_grid(make_grid(steps), shift);
    Tensor x = denormalize(euler_sample(model.theta, g, z, use, w).back(), model.norm);

    bool svg = out_path.size() >= 4 && out_path.substr(out_path.size() - 4) == ".svg";
    if (svg) {
        static const char* palette[8] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
        std::deque<Tensor> parts;
        std::vector<ScatterGroup> groups;
        int cc = model.theta.cfg.class_count;
        if (cc > 0) {
            for (int c = 0; c < cc; ++c) {
                std::vector<int> rows;
                for (int i = 0; i < count; ++i)
                    if (labels[i] == c) rows.push_back(i);
                Tensor part = Tensor::zeros({static_cast<int>(rows.size()), 2});
                for (size_t i = 0; i < rows.size(); ++i) {
                    part.at(static_cast<int>(i), 0) = x.at(rows[i], 0);
                    part.at(static_cast<int>(i), 1) = x.at(rows[i], 1);
                }
                parts.push_back(std::move(part));
                groups.push_back({&parts.back(), palette[c % 8], "class " + std::to_string(c)});
            }
        } else {
            parts.push_back(x);
            groups.push_back({&parts.back(), "#1f77b4", ""});
        }
        write_scatter_svg(out_path, groups,
                          std::to_string(steps) + "-step samples (" + std::to_string(count) + ")");
    } else {
        write_points_csv(out_path, x, labels);
    }
    console << "wrote " << out_path << "\n";
}

void cmd_plot(const ExperimentConfig& cfg, std::ostream& console) {
    std::string dir = cfg.out_dir;
    std::string teacher_path = dir + "/teacher.ckpt";
    if (!fs::exists(teacher_path))
        throw ConfigError("missing " + teacher_path + "; run train-teacher first");
    LoadedModel teacher = load_model(teacher_path);
    PreparedData data = prepare_data(teacher.data);

    int count = std::min(cfg.eval.count, 2000);
    Tensor z;
    std::vector<int> labels;
    eval_noise_and_labels(count, teacher.theta.cfg.class_count, cfg.seed, z, labels);
    std::vector<int> use = conditional_labels(teacher.theta, labels);
    TimeGrid tg = shift_grid(make_grid(cfg.eval.teacher_steps), cfg.eval.shift);

    std::deque<Tensor> keep;
    std::vector<ScatterGroup> groups;
    keep.push_back(Tensor::zeros({std::min(count, data.raw.size()), 2}));
    for (int i = 0; i < keep.back().rows(); ++i) {
        keep.back().at(i, 0) = data.raw.x.at(i, 0);
        keep.back().at(i, 1) = data.raw.x.at(i, 1);
    }
    groups.push_back({&keep.back(), "#bdbdbd", "data"});
    keep.push_back(denormalize(euler_sample(teacher.theta, tg, z, use, cfg.eval.w).back(),
                               teacher.norm));
    groups.push_back({&keep.back(), "#1f77b4",
                      "teacher " + std::to_string(cfg.eval.teacher_steps)});

    std::vector<std::string> students, metric_files;
    for (const auto& e : fs::directory_iterator(dir)) {
        std::string name = e.path().filename().string();
        if (name.rfind("student-", 0) == 0 && name.size() > 5 &&
            name.substr(name.size() - 5) == ".ckpt")
            students.push_back(name);
        if (name.rfind("metrics-", 0) == 0 && name.size() > 4 &&
            name.substr(name.size() - 4) == ".csv")
            metric_files.push_back(name);
    }
    std::sort(students.begin(), students.end());
    std::sort(metric_files.begin(), metric_files.end());

    static const char* palette[5] = {"#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
    int color = 0;
    for (const auto& name : students) {
        LoadedModel s = load_model(dir + "/" + name);
        std::vector<int> suse = conditional_labels(s.theta, labels);
        TimeGrid sg = shift_grid(make_grid(4), cfg.eval.shift);
        keep.push_back(denormalize(euler_sample(s.theta, sg, z, suse, cfg.eval.w).back(), s.norm));
        std::string tag = name.substr(8, name.size() - 8 - 5);
        groups.push_back({&keep.back(), palette[color % 5], tag + " 4"});
        ++color;
    }
    write_scatter_svg(dir + "/overlay.svg", groups, data_kind_name(teacher.data.kind));
    console << "wrote " << dir << "/overlay.svg\n";

    for (const auto& name : metric_files) {
        std::vector<MetricsRow> rows = read_metrics_csv(dir + "/" + name);
        std::string tag = name.substr(8, name.size() - 8 - 4);
        std::vector<double> its;
        for (const auto& r : rows) its.push_back(r.iteration);
        auto col = [&](double MetricsRow::* f) {
            std::vector<double> v;
            for (const auto& r : rows) v.push_back(r.*f);
            return v;
        };
        write_curves_svg(dir + "/fidelity-" + tag + ".svg",
                         {{its, col(&MetricsRow::fid3), "#1f77b4", "fid_sw_3"},
                          {its, col(&MetricsRow::fid4), "#d62728", "fid_sw_4"},
                          {its, col(&MetricsRow::fid8), "#2ca02c", "fid_sw_8"}},
                         tag + " fidelity", "iteration", "sliced W");
        write_curves_svg(dir + "/diagnostics-" + tag + ".svg",
                         {{its, col(&MetricsRow::residual), "#9467bd", "residual"},
                          {its, col(&MetricsRow::straightness4), "#ff7f0e", "straightness_4"}},
                         tag + " diagnostics", "iteration", "value");
        console << "wrote " << dir << "/fidelity-" << tag << ".svg\n";
        console << "wrote " << dir << "/diagnostics-" << tag << ".svg\n";
    }
}

GradProbeReport run_gradient_probes(int probes, uint64_t seed, double tol) {
    Rng rng = Rng::substream(seed, "grad-check");
    GradProbeReport rep;
    for (int p = 0; p < probes; ++p) {
        int mode = p % 3;
        NetConfig nc;
        nc.hidden_dim = 4 + 2 * rng.uniform_int(4);
        nc.num_hidden_layers = 1 + rng.uniform_int(2);
        nc.time_embed_dim = 4;
        if (mode == 2)
            nc.class_count = 2 + rng.uniform_int(3);
        else
            nc.class_count = rng.uniform_int(2) == 0 ? 0 : 3;
        nc.step_embed_dim = (mode == 0 && rng.uniform_int(2) == 1) ? 4 : 0;

        const int B = 2;
        Tensor xt = Tensor::zeros({B, 2});
        Tensor target = Tensor::zeros({B, 2});
        for (int i = 0; i < B; ++i)
            for (int j = 0; j < 2; ++j) {
                xt.at(i, j) = rng.gaussian();
                target.at(i, j) = rng.gaussian();
            }
        double t = rng.uniform();
        double d = 0.25 * (1.0 + rng.uniform());
        const double* dp = nc.step_conditioned() ? &d : nullptr;
        std::vector<int> lbl(B, 0);
        if (nc.conditional())
            for (int i = 0; i < B; ++i)
                lbl[i] = rng.uniform_int(nc.class_count + 1) - 1;  // null included
        std::vector<int> use = nc.conditional() ? lbl : std::vector<int>();

        Rng init_rng = Rng::substream(seed ^ (0x9e37u + p), "init");
        Theta th = Theta::init(nc, init_rng);
        LoraDelta delta;
        bool use_delta = mode == 1 || (mode == 2 && (p / 3) % 2 == 0);
        if (use_delta) {
            delta = LoraDelta::init(nc, 2, 2.0, init_rng);
            // Zero factors hide half the product rule; make both sides real.
            for (auto& bmat : delta.bm)
                for (auto& v : bmat.data) v = 0.3 * init_rng.gaussian();
        }

        std::vector<double> w_rows;
        if (mode == 2)
            for (int i = 0; i < B; ++i) w_rows.push_back(4.0 * rng.uniform());

        Tape tape;
        TapeNet net = TapeNet::build(tape, th, use_delta ? &delta : nullptr, !use_delta);
        int x_node = tape.leaf(xt);
        int loss;
        if (mode == 2) {
            int pc = net.forward(x_node, t, use, dp);
            int pn = net.forward(x_node, t, std::vector<int>(B, -1), dp);
            int diff = tape.add(pc, tape.scale(pn, -1.0));
            int comb = tape.add(pc, tape.row_scale(diff, w_rows));
            loss = tape.mse(comb, tape.leaf(target));
        } else {
            int pred = net.forward(x_node, t, use, dp);
            loss = tape.mse(pred, tape.leaf(target));
        }
        std::vector<Tensor> grads = tape.backward(loss, net.param_nodes);

        auto loss_at = [&](const Theta& th2, const LoraDelta* d2) {
            if (mode == 2) {
                Tensor vc = forward_velocity(th2, d2, xt, t, use, dp);
                Tensor vn = forward_velocity(th2, d2, xt, t, std::vector<int>(B, -1), dp);
                return mse_value(cfg_combine(vc, vn, w_rows), target);
            }
            return mse_value(forward_velocity(th2, d2, xt, t, use, dp), target);
        };

        std::vector<Tensor*> ptrs = use_delta ? delta.param_ptrs() : th.param_ptrs();
        for (size_t j = 0; j < ptrs.size(); ++j) {
            auto fn = [&](const Tensor& probe) {
                Theta th2 = th;
                LoraDelta d2 = delta;
                std::vector<Tensor*> p2 = use_delta ? d2.param_ptrs() : th2.param_ptrs();
                *p2[j] = probe;
                return loss_at(th2, use_delta ? &d2 : nullptr);
            };
            double rel = finite_diff_check(fn, *ptrs[j], grads[j], 1e-5);
            if (rel > rep.worst) {
                rep.worst = rel;
                rep.worst_case = "probe " + std::to_string(p) + " mode " + std::to_string(mode) +
                                 " tensor " + std::to_string(j);
            }
            if (rel > tol) ++rep.failures;
        }
        ++rep.probes;
    }
    return rep;
}

}  // namespace scfm
