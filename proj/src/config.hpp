#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "data.hpp"
#include "distill.hpp"
#include "flow.hpp"
#include "net.hpp"
#include "shortcut.hpp"

namespace scfm {

// Minimal TOML subset: flat [section] headers, key = value lines, values are
// integers, floats, booleans, or double-quoted strings. Unknown keys reject.
struct TomlDoc {
    // section -> key -> (raw value, line number)
    std::map<std::string, std::map<std::string, std::pair<std::string, int>>> sections;

    static TomlDoc parse_file(const std::string& path);
    static TomlDoc parse_text(const std::string& text, const std::string& origin);
};

struct EvalConfig {
    std::vector<int> steps = {3, 4, 8};
    int count = 2000;
    int n_proj = 128;
    double w = 2.0;
    double shift = 3.0;
    int teacher_steps = 128;
    int eval_every = 100;
    int residual_trials = 256;
    int heldout = 10000;
};

struct ExperimentConfig {
    uint64_t seed = 42;
    std::string out_dir = "runs/default";
    DatasetSpec data;
    bool data_seed_explicit = false;
    NetConfig net;
    bool class_count_explicit = false;
    TeacherConfig teacher;
    DistillConfig distill;
    ShortcutConfig shortcut;
    int shortcut_step_embed = 32;
    EvalConfig eval;

    // Fills derived defaults (net.class_count from the dataset, per-phase
    // seeds from the experiment seed) and checks constraints.
    void resolve();
};

ExperimentConfig parse_config(const std::string& path);
ExperimentConfig config_from_text(const std::string& text, const std::string& origin);

// Every field written back out, defaults included, so a run is self-describing.
std::string serialize_config(const ExperimentConfig& cfg);

}  // namespace scfm
