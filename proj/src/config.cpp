#include "config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace scfm {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool in_str = false;
    for (size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') in_str = !in_str;
        if (line[i] == '#' && !in_str) return line.substr(0, i);
    }
    return line;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

TomlDoc TomlDoc::parse_text(const std::string& text, const std::string& origin) {
    TomlDoc doc;
    std::istringstream in(text);
    std::string raw;
    std::string section;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') fail(origin, lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) fail(origin, lineno, "empty section name");
            doc.sections[section];
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, lineno, "empty key");
        if (value.empty()) fail(origin, lineno, "empty value for key '" + key + "'");
        auto& sec = doc.sections[section];
        if (sec.count(key)) fail(origin, lineno, "duplicate key '" + key + "'");
        sec[key] = {value, lineno};
    }
    return doc;
}

TomlDoc TomlDoc::parse_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_text(buf.str(), path);
}

namespace {

// Tracks consumption so anything left over can be reported as unknown.
struct Reader {
    const TomlDoc* doc;
    std::string origin;
    std::set<std::pair<std::string, std::string>> used;

    const std::pair<std::string, int>* find(const std::string& sec, const std::string& key) {
        auto s = doc->sections.find(sec);
        if (s == doc->sections.end()) return nullptr;
        auto k = s->second.find(key);
        if (k == s->second.end()) return nullptr;
        used.insert({sec, key});
        return &k->second;
    }

    bool get_string(const std::string& sec, const std::string& key, std::string& out) {
        const auto* v = find(sec, key);
        if (!v) return false;
        const std::string& raw = v->first;
        if (raw.size() < 2 || raw.front() != '"' || raw.back() != '"')
            fail(origin, v->second, "value for '" + key + "' must be a quoted string");
        out = raw.substr(1, raw.size() - 2);
        return true;
    }

    bool get_double(const std::string& sec, const std::string& key, double& out) {
        const auto* v = find(sec, key);
        if (!v) return false;
        try {
            size_t pos = 0;
            out = std::stod(v->first, &pos);
            if (pos != v->first.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(origin, v->second, "value for '" + key + "' is not a number: " + v->first);
        }
        return true;
    }

    bool get_int(const std::string& sec, const std::string& key, int& out) {
        double d = 0.0;
        if (!get_double(sec, key, d)) return false;
        if (d != std::floor(d)) {
            const auto* v = find(sec, key);
            fail(origin, v->second, "value for '" + key + "' must be an integer");
        }
        out = static_cast<int>(d);
        return true;
    }

    bool get_u64(const std::string& sec, const std::string& key, uint64_t& out) {
        const auto* v = find(sec, key);
        if (!v) return false;
        try {
            size_t pos = 0;
            out = std::stoull(v->first, &pos);
            if (pos != v->first.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            fail(origin, v->second, "value for '" + key + "' is not an unsigned integer: " + v->first);
        }
        return true;
    }

    void check_unknown() {
        for (const auto& [sec, keys] : doc->sections)
            for (const auto& [key, val] : keys)
                if (!used.count({sec, key}))
                    fail(origin, val.second,
                         "unknown key '" + (sec.empty() ? key : sec + "." + key) + "'");
    }
};

std::vector<int> parse_steps(const std::string& text, const std::string& origin, int line) {
    std::vector<int> out;
    std::istringstream in(text);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        tok = trim(tok);
        try {
            size_t pos = 0;
            int v = std::stoi(tok, &pos);
            if (pos != tok.size() || v < 1) throw std::invalid_argument("bad step");
            out.push_back(v);
        } catch (const std::exception&) {
            fail(origin, line, "step list entries must be positive integers: '" + tok + "'");
        }
    }
    if (out.empty()) fail(origin, line, "empty step list");
    return out;
}

}  // namespace

void ExperimentConfig::resolve() {
    if (!data_seed_explicit) data.seed = seed;
    teacher.seed = seed;
    distill.seed = seed;
    shortcut.seed = seed;
    net.input_dim = 2;
    if (!class_count_explicit) net.class_count = data_class_count(data.kind);
    try {
        net.validate();
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }
    distill.validate();
    if (data.size <= 0) throw ConfigError("dataset size must be positive");
    if (teacher.iters < 0 || teacher.batch <= 0) throw ConfigError("bad teacher training settings");
    if (teacher.dropout < 0.0 || teacher.dropout >= 1.0) throw ConfigError("dropout must lie in [0,1)");
    if (shortcut.iters < 0 || shortcut.batch <= 0) throw ConfigError("bad baseline training settings");
    if (shortcut_step_embed <= 0 || shortcut_step_embed % 2 != 0)
        throw ConfigError("baseline step embedding width must be positive and even");
    if (!is_power_of_two(shortcut.grid_n) || shortcut.grid_n < 2)
        throw ConfigError("baseline step ladder needs a power-of-two step count");
    if (eval.count <= 0 || eval.n_proj <= 0 || eval.teacher_steps < 1)
        throw ConfigError("bad evaluation settings");
    if (eval.eval_every <= 0) throw ConfigError("eval interval must be positive");
    if (eval.w < 0.0) throw ConfigError("guidance scale must be >= 0");
    if (eval.shift < 1.0) throw ConfigError("shift must be >= 1");
    for (int s : eval.steps)
        if (s < 1) throw ConfigError("step counts must be >= 1");
    if (eval.heldout <= 0 || eval.residual_trials <= 0) throw ConfigError("bad evaluation settings");
}

ExperimentConfig config_from_text(const std::string& text, const std::string& origin) {
    TomlDoc doc = TomlDoc::parse_text(text, origin);
    Reader r{&doc, origin, {}};
    ExperimentConfig c;

    r.get_u64("experiment", "seed", c.seed);
    r.get_string("experiment", "out_dir", c.out_dir);

    std::string kind;
    if (r.get_string("data", "kind", kind)) c.data.kind = parse_data_kind(kind);
    r.get_int("data", "size", c.data.size);
    r.get_double("data", "sigma", c.data.sigma);
    c.data_seed_explicit = r.get_u64("data", "seed", c.data.seed);

    r.get_int("net", "hidden_dim", c.net.hidden_dim);
    r.get_int("net", "num_hidden_layers", c.net.num_hidden_layers);
    r.get_int("net", "time_embed_dim", c.net.time_embed_dim);
    c.class_count_explicit = r.get_int("net", "class_count", c.net.class_count);

    r.get_int("teacher", "iters", c.teacher.iters);
    r.get_int("teacher", "batch", c.teacher.batch);
    r.get_double("teacher", "lr", c.teacher.lr);
    r.get_double("teacher", "dropout", c.teacher.dropout);

    r.get_int("distill", "iters", c.distill.iters);
    r.get_double("distill", "lr", c.distill.lr);
    r.get_int("distill", "batch", c.distill.batch_n);
    r.get_double("distill", "teacher_fraction", c.distill.teacher_fraction);
    r.get_double("distill", "mu_slow", c.distill.mu_slow);
    r.get_double("distill", "mu_fast", c.distill.mu_fast);
    r.get_int("distill", "restart_period", c.distill.restart_period);
    std::string variant;
    if (r.get_string("distill", "variant", variant)) c.distill.variant = parse_variant(variant);
    r.get_int("distill", "grid_n", c.distill.grid_n);
    r.get_double("distill", "shift_lo", c.distill.shift_lo);
    r.get_double("distill", "shift_hi", c.distill.shift_hi);
    r.get_double("distill", "w_lo", c.distill.w_lo);
    r.get_double("distill", "w_hi", c.distill.w_hi);
    r.get_int("distill", "lora_rank", c.distill.lora_rank);
    r.get_double("distill", "lora_alpha", c.distill.lora_alpha);
    r.get_int("distill", "few_shot", c.distill.few_shot);

    r.get_int("shortcut", "iters", c.shortcut.iters);
    r.get_int("shortcut", "batch", c.shortcut.batch);
    r.get_double("shortcut", "lr", c.shortcut.lr);
    r.get_double("shortcut", "dropout", c.shortcut.dropout);
    r.get_double("shortcut", "mu", c.shortcut.mu);
    r.get_int("shortcut", "grid_n", c.shortcut.grid_n);
    r.get_int("shortcut", "step_embed_dim", c.shortcut_step_embed);

    std::string steps;
    const auto* steps_raw = r.find("eval", "steps");
    if (steps_raw) {
        if (!r.get_string("eval", "steps", steps))
            fail(origin, steps_raw->second, "steps must be a quoted list like \"3,4,8\"");
        c.eval.steps = parse_steps(steps, origin, steps_raw->second);
    }
    r.get_int("eval", "count", c.eval.count);
    r.get_int("eval", "n_proj", c.eval.n_proj);
    r.get_double("eval", "w", c.eval.w);
    r.get_double("eval", "shift", c.eval.shift);
    r.get_int("eval", "teacher_steps", c.eval.teacher_steps);
    r.get_int("eval", "eval_every", c.eval.eval_every);
    r.get_int("eval", "residual_trials", c.eval.residual_trials);
    r.get_int("eval", "heldout", c.eval.heldout);

    r.check_unknown();
    c.resolve();
    return c;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return config_from_text(buf.str(), path);
}

namespace {

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    std::string s = os.str();
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

}  // namespace

std::string serialize_config(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "[experiment]\n";
    os << "seed = " << c.seed << "\n";
    os << "out_dir = \"" << c.out_dir << "\"\n\n";
    os << "[data]\n";
    os << "kind = \"" << data_kind_name(c.data.kind) << "\"\n";
    os << "size = " << c.data.size << "\n";
    os << "sigma = " << fmt_double(c.data.sigma) << "\n";
    os << "seed = " << c.data.seed << "\n\n";
    os << "[net]\n";
    os << "hidden_dim = " << c.net.hidden_dim << "\n";
    os << "num_hidden_layers = " << c.net.num_hidden_layers << "\n";
    os << "time_embed_dim = " << c.net.time_embed_dim << "\n";
    os << "class_count = " << c.net.class_count << "\n\n";
    os << "[teacher]\n";
    os << "iters = " << c.teacher.iters << "\n";
    os << "batch = " << c.teacher.batch << "\n";
    os << "lr = " << fmt_double(c.teacher.lr) << "\n";
    os << "dropout = " << fmt_double(c.teacher.dropout) << "\n\n";
    os << "[distill]\n";
    os << "iters = " << c.distill.iters << "\n";
    os << "lr = " << fmt_double(c.distill.lr) << "\n";
    os << "batch = " << c.distill.batch_n << "\n";
    os << "teacher_fraction = " << fmt_double(c.distill.teacher_fraction) << "\n";
    os << "mu_slow = " << fmt_double(c.distill.mu_slow) << "\n";
    os << "mu_fast = " << fmt_double(c.distill.mu_fast) << "\n";
    os << "restart_period = " << c.distill.restart_period << "\n";
    os << "variant = \"" << variant_name(c.distill.variant) << "\"\n";
    os << "grid_n = " << c.distill.grid_n << "\n";
    os << "shift_lo = " << fmt_double(c.distill.shift_lo) << "\n";
    os << "shift_hi = " << fmt_double(c.distill.shift_hi) << "\n";
    os << "w_lo = " << fmt_double(c.distill.w_lo) << "\n";
    os << "w_hi = " << fmt_double(c.distill.w_hi) << "\n";
    os << "lora_rank = " << c.distill.lora_rank << "\n";
    os << "lora_alpha = " << fmt_double(c.distill.lora_alpha) << "\n";
    os << "few_shot = " << c.distill.few_shot << "\n\n";
    os << "[shortcut]\n";
    os << "iters = " << c.shortcut.iters << "\n";
    os << "batch = " << c.shortcut.batch << "\n";
    os << "lr = " << fmt_double(c.shortcut.lr) << "\n";
    os << "dropout = " << fmt_double(c.shortcut.dropout) << "\n";
    os << "mu = " << fmt_double(c.shortcut.mu) << "\n";
    os << "grid_n = " << c.shortcut.grid_n << "\n";
    os << "step_embed_dim = " << c.shortcut_step_embed << "\n\n";
    os << "[eval]\n";
    os << "steps = \"";
    for (size_t i = 0; i < c.eval.steps.size(); ++i) {
        if (i) os << ",";
        os << c.eval.steps[i];
    }
    os << "\"\n";
    os << "count = " << c.eval.count << "\n";
    os << "n_proj = " << c.eval.n_proj << "\n";
    os << "w = " << fmt_double(c.eval.w) << "\n";
    os << "shift = " << fmt_double(c.eval.shift) << "\n";
    os << "teacher_steps = " << c.eval.teacher_steps << "\n";
    os << "eval_every = " << c.eval.eval_every << "\n";
    os << "residual_trials = " << c.eval.residual_trials << "\n";
    os << "heldout = " << c.eval.heldout << "\n";
    return os.str();
}

}  // namespace scfm
