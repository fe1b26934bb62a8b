#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "../src/config.hpp"
#include "../src/runner.hpp"
#include "doctest.h"

// SCFM_BIN is the absolute path of the command-line binary, supplied by the build.

namespace {

namespace fs = std::filesystem;

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    std::ostringstream buf;
    buf << f.rdbuf();
    return buf.str();
}

struct CliFixture {
    std::string dir = "test_cli_tmp";

    CliFixture() {
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~CliFixture() { fs::remove_all(dir); }

    std::string file(const std::string& name) const { return dir + "/" + name; }

    int run(const std::string& args, std::string* output = nullptr,
            const std::string& env = "") const {
        std::string cap = dir + "/capture.txt";
        std::string cmd = env.empty() ? "" : env + " ";
        cmd += std::string(SCFM_BIN) + " " + args + " >" + cap + " 2>&1";
        int rc = std::system(cmd.c_str());
        if (output) *output = read_bytes(cap);
        return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    }

    void write_config(const std::string& name, const std::string& out_dir) const {
        std::ofstream f(file(name));
        f << "[experiment]\n"
             "seed = 5\n"
             "out_dir = \""
          << dir << "/" << out_dir
          << "\"\n"
             "[data]\n"
             "kind = \"moons\"\n"
             "size = 256\n"
             "sigma = 0.05\n"
             "[net]\n"
             "hidden_dim = 16\n"
             "num_hidden_layers = 1\n"
             "time_embed_dim = 4\n"
             "[teacher]\n"
             "iters = 60\n"
             "batch = 32\n"
             "[distill]\n"
             "iters = 6\n"
             "batch = 8\n"
             "grid_n = 16\n"
             "lora_rank = 2\n"
             "variant = \"vanilla\"\n"
             "[shortcut]\n"
             "iters = 10\n"
             "batch = 16\n"
             "grid_n = 16\n"
             "step_embed_dim = 4\n"
             "[eval]\n"
             "steps = \"2,4\"\n"
             "count = 64\n"
             "n_proj = 16\n"
             "teacher_steps = 8\n"
             "eval_every = 3\n"
             "residual_trials = 16\n"
             "heldout = 256\n";
    }
};

}  // namespace

TEST_CASE("cli reports usage and rejects malformed invocations") {
    CliFixture cli;
    std::string out;
    CHECK(cli.run("--help", &out) == 0);
    CHECK(out.find("train-teacher") != std::string::npos);
    CHECK(out.find("grad-check") != std::string::npos);

    CHECK(cli.run("", &out) == 2);               // a subcommand is required
    CHECK(cli.run("frobnicate", &out) == 2);     // unknown subcommand
    CHECK(cli.run("train-teacher", &out) == 2);  // missing --config
    CHECK(cli.run("train-teacher --config " + cli.file("absent.toml"), &out) == 2);
    CHECK(out.find("cannot open") != std::string::npos);

    {
        std::ofstream f(cli.file("bad.toml"));
        f << "[teacher]\nrho = 1\n";
    }
    CHECK(cli.run("train-teacher --config " + cli.file("bad.toml"), &out) == 2);
    CHECK(out.find("unknown key") != std::string::npos);

    cli.write_config("cfg.toml", "runE");
    CHECK(cli.run("distill --config " + cli.file("cfg.toml") + " --teacher " +
                      cli.file("runE/teacher.ckpt"),
                  &out) == 2);
    CHECK(out.find("missing teacher checkpoint") != std::string::npos);

    CHECK(cli.run("train-teacher --config " + cli.file("cfg.toml"), &out, "SCFM_SEED=abc") == 2);
    CHECK(out.find("SCFM_SEED") != std::string::npos);
}

TEST_CASE("cli pipeline trains, distills, evaluates, and replays byte-identically") {
    CliFixture cli;
    std::string out;
    cli.write_config("cfgA.toml", "runA");
    cli.write_config("cfgB.toml", "runB");
    cli.write_config("cfgC.toml", "runC");
    std::string runA = cli.file("runA");

    REQUIRE(cli.run("train-teacher --config " + cli.file("cfgA.toml"), &out) == 0);
    CHECK(out.find("wrote") != std::string::npos);
    REQUIRE(fs::exists(runA + "/teacher.ckpt"));
    CHECK(fs::exists(runA + "/teacher_loss.csv"));
    CHECK(fs::exists(runA + "/teacher_heldout.csv"));
    REQUIRE(fs::exists(runA + "/config.toml"));

    // The resolved copy written next to the checkpoint parses on its own.
    scfm::ExperimentConfig resolved = scfm::parse_config(runA + "/config.toml");
    CHECK(resolved.seed == 5);
    CHECK(resolved.data.kind == scfm::DataKind::Moons);

    // Same config, fresh run: identical checkpoint bytes.
    REQUIRE(cli.run("train-teacher --config " + cli.file("cfgC.toml"), &out) == 0);
    CHECK(read_bytes(cli.file("runC") + "/teacher.ckpt") == read_bytes(runA + "/teacher.ckpt"));

    // The environment seed override changes the run.
    REQUIRE(cli.run("train-teacher --config " + cli.file("cfgB.toml"), &out, "SCFM_SEED=6") == 0);
    CHECK(read_bytes(cli.file("runB") + "/teacher.ckpt") != read_bytes(runA + "/teacher.ckpt"));

    REQUIRE(cli.run("distill --config " + cli.file("cfgA.toml") + " --teacher " + runA +
                        "/teacher.ckpt",
                    &out) == 0);
    REQUIRE(fs::exists(runA + "/student-vanilla.ckpt"));
    REQUIRE(fs::exists(runA + "/metrics-vanilla.csv"));
    std::vector<scfm::MetricsRow> rows = scfm::read_metrics_csv(runA + "/metrics-vanilla.csv");
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].iteration == 0);
    CHECK(rows[1].iteration == 3);
    CHECK(rows[2].iteration == 6);

    // Flags override the configured schedule and training budget.
    REQUIRE(cli.run("distill --config " + cli.file("cfgA.toml") + " --teacher " + runA +
                        "/teacher.ckpt --variant fast-slow --few-shot 10",
                    &out) == 0);
    REQUIRE(fs::exists(runA + "/student-fast-slow-few10.ckpt"));
    CHECK(cli.run("distill --config " + cli.file("cfgA.toml") + " --teacher " + runA +
                      "/teacher.ckpt --variant banana",
                  &out) == 2);

    REQUIRE(cli.run("eval --teacher " + runA + "/teacher.ckpt --student " + runA +
                        "/student-vanilla.ckpt --steps 2,4 --count 256 --seed 11 --out " +
                        cli.file("eval1.csv"),
                    &out) == 0);
    std::string e1 = read_bytes(cli.file("eval1.csv"));
    CHECK(e1.rfind("metric,steps,value\n", 0) == 0);
    CHECK(e1.find("fid_sw,2,") != std::string::npos);
    CHECK(e1.find("fid_sw,4,") != std::string::npos);
    CHECK(e1.find("fid_sw,128,") != std::string::npos);  // reference step count appended
    CHECK(e1.find("residual,0,") != std::string::npos);
    REQUIRE(cli.run("eval --teacher " + runA + "/teacher.ckpt --student " + runA +
                        "/student-vanilla.ckpt --steps 2,4 --count 256 --seed 11 --out " +
                        cli.file("eval2.csv"),
                    &out) == 0);
    CHECK(read_bytes(cli.file("eval2.csv")) == e1);
    CHECK(cli.run("eval --teacher " + runA + "/teacher.ckpt --student " + runA +
                      "/student-vanilla.ckpt --steps 2,x",
                  &out) == 2);

    REQUIRE(cli.run("sample --ckpt " + runA + "/teacher.ckpt --steps 4 --count 64 --seed 9 --out " +
                        cli.file("s1.csv"),
                    &out) == 0);
    std::string s1 = read_bytes(cli.file("s1.csv"));
    CHECK(s1.rfind("x0,x1,label\n", 0) == 0);
    REQUIRE(cli.run("sample --ckpt " + runA + "/teacher.ckpt --steps 4 --count 64 --seed 9 --out " +
                        cli.file("s2.csv"),
                    &out) == 0);
    CHECK(read_bytes(cli.file("s2.csv")) == s1);
    REQUIRE(cli.run("sample --ckpt " + runA +
                        "/student-vanilla.ckpt --steps 4 --count 64 --seed 9 --out " +
                        cli.file("s.svg"),
                    &out) == 0);
    CHECK(read_bytes(cli.file("s.svg")).rfind("<svg", 0) == 0);
    CHECK(cli.run("sample --ckpt " + runA + "/teacher.ckpt --steps 0 --out " + cli.file("x.csv"),
                  &out) == 2);

    REQUIRE(cli.run("train-shortcut --config " + cli.file("cfgA.toml"), &out) == 0);
    REQUIRE(fs::exists(runA + "/shortcut.ckpt"));
    CHECK(fs::exists(runA + "/shortcut_loss.csv"));
    REQUIRE(cli.run("sample --ckpt " + runA + "/shortcut.ckpt --steps 1 --count 32 --seed 3 --out " +
                        cli.file("sc.csv"),
                    &out) == 0);
    CHECK(read_bytes(cli.file("sc.csv")).rfind("x0,x1,label\n", 0) == 0);

    REQUIRE(cli.run("plot --config " + cli.file("cfgA.toml"), &out) == 0);
    CHECK(fs::exists(runA + "/overlay.svg"));
    CHECK(fs::exists(runA + "/fidelity-vanilla.svg"));
    CHECK(fs::exists(runA + "/diagnostics-fast-slow-few10.svg"));
    CHECK(read_bytes(runA + "/overlay.svg").rfind("<svg", 0) == 0);

    std::string gout;
    CHECK(cli.run("grad-check --probes 30 --seed 7", &gout) == 0);
    CHECK(gout.find("PASS") != std::string::npos);
}
