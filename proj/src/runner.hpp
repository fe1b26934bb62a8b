#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "config.hpp"
#include "metrics.hpp"

namespace scfm {

void ensure_dir(const std::string& path);
void write_text_file(const std::string& path, const std::string& body);
std::string read_text_file(const std::string& path);

struct PreparedData {
    LabeledPoints raw;
    LabeledPoints normalized;
    Normalization norm;
};

// Training draw plus its standardization constants.
PreparedData prepare_data(const DatasetSpec& spec);

// Fresh draw from the same density on a stream the training set never touches.
LabeledPoints heldout_data(const DatasetSpec& spec, int count);

struct MetricsRow {
    int iteration = 0;
    double loss = 0.0;
    double residual = 0.0;
    double fid3 = 0.0, fid4 = 0.0, fid8 = 0.0;
    double straightness4 = 0.0;
    double seconds = 0.0;
};

std::string metrics_header();
std::string metrics_row_csv(const MetricsRow& r);
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

// Shared noise/label draw with the many-step reference run precomputed, so a
// training loop can score checkpoints repeatedly at fixed cost.
struct EvalContext {
    EvalConfig eval;
    uint64_t seed = 0;
    Tensor z;
    std::vector<int> labels;      // empty for unconditional nets
    Tensor teacher_out;           // data-space endpoints of the reference run
    LabeledPoints residual_batch;
    TimeGrid residual_grid;

    static EvalContext make(const Theta& teacher, const Normalization& norm,
                            const LabeledPoints& normalized, const EvalConfig& eval, uint64_t seed,
                            int residual_grid_n);

    double fidelity(const Theta& student, const Normalization& norm, int steps) const;
    double straightness_at(const Theta& student, int steps) const;
    double residual_of(const Theta& student) const;
    MetricsRow row(const Theta& student, const Normalization& norm, int iteration, double loss,
                   double seconds) const;
};

struct TeacherRunResult {
    Theta theta;
    Normalization norm;
    std::vector<double> losses;
};

TeacherRunResult run_teacher_pipeline(const ExperimentConfig& cfg, const PreparedData& data);

struct DistillRunResult {
    DistillResult trained;
    std::vector<MetricsRow> rows;
};

// Metrics are recorded at iteration 0, every eval_every iterations, and at the
// end; streamed to `stream` as they appear when one is given.
DistillRunResult run_distill_pipeline(const Theta& theta0, const PreparedData& data,
                                      const ExperimentConfig& cfg, std::ostream* stream);

// Tag distinguishing parallel distillation artifacts in one output directory.
std::string run_tag(const DistillConfig& cfg);

// Any checkpoint reduced to a sampling-ready velocity field: students arrive
// merged, the baseline arrives as its averaged copy.
struct LoadedModel {
    Theta theta;
    Normalization norm;
    DatasetSpec data;
    CkptKind kind = CkptKind::Teacher;
};

LoadedModel load_model(const std::string& path);

std::string cmd_train_teacher(const ExperimentConfig& cfg, std::ostream& console);
std::string cmd_distill(const ExperimentConfig& cfg, const std::string& teacher_path,
                        std::ostream& console);
std::string cmd_train_shortcut(const ExperimentConfig& cfg, std::ostream& console);
void cmd_eval(const std::string& teacher_path, const std::string& student_path,
              const std::vector<int>& steps, const EvalConfig& eval, uint64_t seed,
              const std::string& out_path, std::ostream& console);
void cmd_sample(const std::string& ckpt_path, int steps, int count, uint64_t seed, double w,
                double shift, const std::string& out_path, std::ostream& console);
void cmd_plot(const ExperimentConfig& cfg, std::ostream& console);

struct GradProbeReport {
    int probes = 0;
    int failures = 0;
    double worst = 0.0;
    std::string worst_case;
};

// Random architectures, inputs, and loss modes checked against central
// differences; worst relative error reported.
GradProbeReport run_gradient_probes(int probes, uint64_t seed, double tol);

}  // namespace scfm
