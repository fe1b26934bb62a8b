#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "checkpoint.hpp"
#include "helpers.hpp"

using namespace scfm;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string read_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

NetConfig demo_cfg(int classes = 0, int step_dim = 0) {
    NetConfig cfg;
    cfg.hidden_dim = 5;
    cfg.num_hidden_layers = 1;
    cfg.time_embed_dim = 4;
    cfg.class_count = classes;
    cfg.step_embed_dim = step_dim;
    return cfg;
}

DatasetSpec demo_spec() {
    DatasetSpec d;
    d.kind = DataKind::Moons;
    d.size = 4321;
    d.sigma = 0.17;
    d.seed = 0xDEADBEEFCAFEBABEULL;
    return d;
}

bool bits_equal(const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) return false;
    for (size_t i = 0; i < a.data.size(); ++i)
        if (a.data[i] != b.data[i] && !(a.data[i] != a.data[i] && b.data[i] != b.data[i]))
            return false;
    return true;
}

}  // namespace

TEST_CASE("array container round-trips values and shapes") {
    TempFile tf("ckpt_arrays.bin");
    ArrayMap m;
    m["alpha"] = Tensor({2, 3}, {1.0, -0.0, 1e-308, 1e300, 0.25, -17.5});
    m["beta/gamma"] = Tensor({4}, {0.0, 1.0, 2.0, 3.0});
    m["s"] = Tensor::scalar(42.0);
    save_arrays(tf.path, m);
    ArrayMap r = load_arrays(tf.path);
    REQUIRE(r.size() == 3);
    CHECK(bits_equal(r["alpha"], m["alpha"]));
    CHECK(std::signbit(r["alpha"].data[1]));
    CHECK(bits_equal(r["beta/gamma"], m["beta/gamma"]));
    CHECK(r["s"].shape == std::vector<int>{1});
}

TEST_CASE("identical content writes identical bytes in any insertion order") {
    TempFile a("ckpt_bytes_a.bin"), b("ckpt_bytes_b.bin");
    ArrayMap m1, m2;
    m1["one"] = Tensor::row2(1.0, 2.0);
    m1["two"] = Tensor::scalar(3.0);
    m2["two"] = Tensor::scalar(3.0);
    m2["one"] = Tensor::row2(1.0, 2.0);
    save_arrays(a.path, m1);
    save_arrays(b.path, m2);
    CHECK(read_bytes(a.path) == read_bytes(b.path));
}

TEST_CASE("malformed files are reported") {
    CHECK_THROWS_AS(load_arrays("no_such_file.bin"), Error);

    TempFile bad("ckpt_bad_magic.bin");
    {
        std::ofstream f(bad.path, std::ios::binary);
        f << "NOPE0000";
    }
    CHECK_THROWS_AS(load_arrays(bad.path), FormatError);

    TempFile vers("ckpt_bad_version.bin");
    {
        std::ofstream f(vers.path, std::ios::binary);
        f << "SCFM";
        const unsigned char v2[4] = {2, 0, 0, 0};
        f.write(reinterpret_cast<const char*>(v2), 4);
        const unsigned char zero[4] = {0, 0, 0, 0};
        f.write(reinterpret_cast<const char*>(zero), 4);
    }
    CHECK_THROWS_AS(load_arrays(vers.path), FormatError);

    TempFile trunc("ckpt_truncated.bin");
    {
        ArrayMap m;
        m["x"] = Tensor({8}, std::vector<double>(8, 1.5));
        save_arrays(trunc.path, m);
        std::string bytes = read_bytes(trunc.path);
        std::ofstream f(trunc.path, std::ios::binary | std::ios::trunc);
        f.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 10));
    }
    CHECK_THROWS_AS(load_arrays(trunc.path), FormatError);
}

TEST_CASE("teacher checkpoints restore weights, scaling, and the data recipe") {
    TempFile tf("ckpt_teacher.bin");
    Rng rng(301);
    Theta th = Theta::init(demo_cfg(3), rng);
    Normalization norm;
    norm.mean[0] = 0.5;
    norm.mean[1] = -1.25;
    norm.std[0] = 2.0;
    norm.std[1] = 0.75;
    save_teacher(tf.path, th, norm, demo_spec());

    TeacherCkpt c = load_teacher(tf.path);
    CHECK(c.theta.cfg.hidden_dim == 5);
    CHECK(c.theta.cfg.class_count == 3);
    for (size_t k = 0; k < th.w.size(); ++k) {
        CHECK(bits_equal(c.theta.w[k], th.w[k]));
        CHECK(bits_equal(c.theta.b[k], th.b[k]));
    }
    CHECK(bits_equal(c.theta.class_embed, th.class_embed));
    CHECK(c.norm.mean[1] == -1.25);
    CHECK(c.norm.std[0] == 2.0);
    CHECK(c.data.kind == DataKind::Moons);
    CHECK(c.data.size == 4321);
    CHECK(c.data.sigma == 0.17);
    CHECK(c.data.seed == 0xDEADBEEFCAFEBABEULL);
    CHECK(checkpoint_kind(tf.path) == CkptKind::Teacher);
}

TEST_CASE("the data recipe survives extreme seed bit patterns") {
    TempFile tf("ckpt_seed_bits.bin");
    Rng rng(303);
    Theta th = Theta::init(demo_cfg(), rng);
    DatasetSpec d = demo_spec();
    d.seed = 0xFFFFFFFFFFFFFFFFULL;  // encodes as a NaN payload
    save_teacher(tf.path, th, Normalization{}, d);
    CHECK(load_teacher(tf.path).data.seed == 0xFFFFFFFFFFFFFFFFULL);
}

TEST_CASE("student checkpoints carry adapter, averages, and optimizer") {
    TempFile tf("ckpt_student.bin");
    Rng rng(305);
    NetConfig cfg = demo_cfg(2);
    Theta th0 = Theta::init(cfg, rng);
    LoraDelta delta = LoraDelta::init(cfg, 3, 6.0, rng);
    for (auto& t : delta.bm)
        for (auto& v : t.data) v = rng.gaussian();
    EmaState ema = EmaState::init(delta, true);
    ema.iteration = 777;
    OptimState opt = OptimState::init(delta.param_ptrs(), AdamwConfig{});
    // drive the moments off zero
    std::vector<Tensor> grads;
    for (Tensor* p : delta.param_ptrs()) {
        Tensor g = Tensor::zeros(p->shape);
        for (auto& v : g.data) v = rng.gaussian();
        grads.push_back(std::move(g));
    }
    adamw_step(delta.param_ptrs(), grads, opt);
    adamw_step(delta.param_ptrs(), grads, opt);

    save_student(tf.path, th0, delta, ema, opt, Normalization{}, demo_spec());
    StudentCkpt s = load_student(tf.path);
    CHECK(s.delta.rank == 3);
    CHECK(s.delta.alpha == 6.0);
    for (size_t k = 0; k < delta.a.size(); ++k) {
        CHECK(bits_equal(s.delta.a[k], delta.a[k]));
        CHECK(bits_equal(s.delta.bm[k], delta.bm[k]));
    }
    CHECK(s.ema.has_fast);
    CHECK(s.ema.iteration == 777);
    for (size_t k = 0; k < ema.slow.d.size(); ++k) {
        CHECK(bits_equal(s.ema.slow.d[k], ema.slow.d[k]));
        CHECK(bits_equal(s.ema.fast.d[k], ema.fast.d[k]));
    }
    CHECK(s.opt.step == 2);
    CHECK(s.opt.cfg.lr == opt.cfg.lr);
    REQUIRE(s.opt.m.size() == opt.m.size());
    for (size_t k = 0; k < opt.m.size(); ++k) {
        CHECK(bits_equal(s.opt.m[k], opt.m[k]));
        CHECK(bits_equal(s.opt.v[k], opt.v[k]));
    }
    CHECK(checkpoint_kind(tf.path) == CkptKind::Student);

    SUBCASE("without the second average no fast arrays are written") {
        TempFile tf2("ckpt_student_nofast.bin");
        EmaState plain = EmaState::init(delta, false);
        save_student(tf2.path, th0, delta, plain, opt, Normalization{}, demo_spec());
        StudentCkpt s2 = load_student(tf2.path);
        CHECK_FALSE(s2.ema.has_fast);
        CHECK(s2.ema.fast.d.empty());
        ArrayMap raw = load_arrays(tf2.path);
        CHECK(raw.find("ema/fast0") == raw.end());
    }
}

TEST_CASE("baseline checkpoints keep both parameter sets") {
    TempFile tf("ckpt_shortcut.bin");
    Rng rng(307);
    NetConfig cfg = demo_cfg(0, 4);
    Theta th = Theta::init(cfg, rng);
    Theta ema = Theta::init(cfg, rng);
    save_shortcut(tf.path, th, ema, Normalization{}, demo_spec());
    ShortcutCkpt c = load_shortcut(tf.path);
    CHECK(bits_equal(c.theta.w[0], th.w[0]));
    CHECK(bits_equal(c.theta_ema.w[0], ema.w[0]));
    CHECK_FALSE(bits_equal(c.theta.w[0], c.theta_ema.w[0]));
    CHECK(c.theta.cfg.step_embed_dim == 4);
    CHECK(checkpoint_kind(tf.path) == CkptKind::Shortcut);
}

TEST_CASE("kind guards reject mismatched loads") {
    TempFile tf("ckpt_kind_guard.bin");
    Rng rng(309);
    Theta th = Theta::init(demo_cfg(), rng);
    save_teacher(tf.path, th, Normalization{}, demo_spec());
    CHECK_THROWS_AS(load_student(tf.path), FormatError);
    CHECK_THROWS_AS(load_shortcut(tf.path), FormatError);
}

TEST_CASE("tampered array shapes are named in the error") {
    TempFile tf("ckpt_tampered.bin");
    Rng rng(311);
    Theta th = Theta::init(demo_cfg(), rng);
    save_teacher(tf.path, th, Normalization{}, demo_spec());
    ArrayMap m = load_arrays(tf.path);
    m["net/w0"] = Tensor::zeros({2, 2});
    save_arrays(tf.path, m);
    try {
        load_teacher(tf.path);
        FAIL("expected a shape error");
    } catch (const ShapeError& e) {
        CHECK(std::string(e.what()).find("net/w0") != std::string::npos);
    }

    ArrayMap m2 = load_arrays(tf.path);
    m2.erase("net/b1");
    m2["net/w0"] = th.w[0];
    save_arrays(tf.path, m2);
    CHECK_THROWS_AS(load_teacher(tf.path), FormatError);
}
