#include <doctest.h>

#include <cmath>
#include <vector>

#include "optim.hpp"
#include "rng.hpp"

using namespace scfm;

namespace {

// Scalar decoupled-weight-decay Adam, written out longhand.
struct ScalarAdamw {
    AdamwConfig c;
    double m = 0.0, v = 0.0;
    int64_t t = 0;

    double step(double p, double g) {
        t += 1;
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g * g;
        double mh = m / (1.0 - std::pow(c.beta1, static_cast<double>(t)));
        double vh = v / (1.0 - std::pow(c.beta2, static_cast<double>(t)));
        return p - c.lr * (mh / (std::sqrt(vh) + c.eps) + c.weight_decay * p);
    }
};

}  // namespace

TEST_CASE("first step from zero with unit gradient") {
    AdamwConfig c;
    Tensor p = Tensor::scalar(0.0);
    OptimState st = OptimState::init({&p}, c);
    adamw_step({&p}, {Tensor::scalar(1.0)}, st);
    // Bias correction cancels exactly on step one, leaving lr / (1 + eps).
    CHECK(p.data[0] == doctest::Approx(-c.lr / (1.0 + c.eps)).epsilon(1e-9));
    CHECK(st.step == 1);
}

TEST_CASE("zero gradient applies pure decay") {
    AdamwConfig c;
    Tensor p = Tensor::row2(2.0, -3.0);
    OptimState st = OptimState::init({&p}, c);
    adamw_step({&p}, {Tensor::zeros({1, 2})}, st);
    CHECK(p.at(0, 0) == doctest::Approx(2.0 * (1.0 - c.lr * c.weight_decay)).epsilon(1e-14));
    CHECK(p.at(0, 1) == doctest::Approx(-3.0 * (1.0 - c.lr * c.weight_decay)).epsilon(1e-14));
}

TEST_CASE("constant positive gradient moves the parameter monotonically down") {
    AdamwConfig c;
    c.weight_decay = 0.0;
    Tensor p = Tensor::scalar(1.0);
    OptimState st = OptimState::init({&p}, c);
    double prev = p.data[0];
    for (int i = 0; i < 50; ++i) {
        adamw_step({&p}, {Tensor::scalar(1.0)}, st);
        CHECK(p.data[0] < prev);
        prev = p.data[0];
    }
}

TEST_CASE("trajectory matches the scalar reference on random gradients") {
    AdamwConfig c;
    c.lr = 3e-3;
    c.weight_decay = 2e-2;
    Rng rng(7);
    Tensor p = Tensor::zeros({2, 3});
    std::vector<double> start(6);
    for (auto& s : start) s = rng.gaussian();
    for (size_t i = 0; i < 6; ++i) p.data[i] = start[i];

    std::vector<ScalarAdamw> refs(6);
    std::vector<double> rp = start;
    for (auto& r : refs) r.c = c;

    OptimState st = OptimState::init({&p}, c);
    for (int it = 0; it < 200; ++it) {
        Tensor g = Tensor::zeros({2, 3});
        for (size_t i = 0; i < 6; ++i) g.data[i] = rng.gaussian();
        for (size_t i = 0; i < 6; ++i) rp[i] = refs[i].step(rp[i], g.data[i]);
        adamw_step({&p}, {g}, st);
        for (size_t i = 0; i < 6; ++i) CHECK(p.data[i] == doctest::Approx(rp[i]).epsilon(1e-12));
    }
}

TEST_CASE("moment buffers follow the exponential averages") {
    AdamwConfig c;
    Tensor p = Tensor::scalar(0.0);
    OptimState st = OptimState::init({&p}, c);
    adamw_step({&p}, {Tensor::scalar(2.0)}, st);
    CHECK(st.m[0].data[0] == doctest::Approx((1.0 - c.beta1) * 2.0).epsilon(1e-14));
    CHECK(st.v[0].data[0] == doctest::Approx((1.0 - c.beta2) * 4.0).epsilon(1e-14));
    adamw_step({&p}, {Tensor::scalar(-1.0)}, st);
    CHECK(st.m[0].data[0] ==
          doctest::Approx(c.beta1 * 0.2 + (1.0 - c.beta1) * -1.0).epsilon(1e-12));
}

TEST_CASE("mismatched counts and shapes are rejected") {
    AdamwConfig c;
    Tensor p = Tensor::scalar(0.0);
    OptimState st = OptimState::init({&p}, c);
    CHECK_THROWS_AS(adamw_step({&p}, {}, st), ShapeError);
    CHECK_THROWS_AS(adamw_step({&p}, {Tensor::row2(1.0, 2.0)}, st), ShapeError);
}
